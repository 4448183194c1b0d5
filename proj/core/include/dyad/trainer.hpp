#pragma once

#include <array>
#include <string>
#include <vector>

#include "dyad/losses.hpp"
#include "dyad/model.hpp"
#include "dyad/session.hpp"

namespace dyad {

struct TrainConfig {
    double lr0 = 1e-3;
    int halve_every = 20;
    int epochs = 40;
    int batch_size = 32;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::array<double, 3> split = {0.8, 0.1, 0.1};
    std::uint64_t seed = 7;
    bool kd_on = true;
    bool se_on = true;
    bool regularize_sequences = false;  // KD/SE on pre-pool sequences
    bool swap_kd_se = false;            // KL for KD, MSE for SE
    bool normalize_features = true;
    bool normalize_targets = true;
    bool split_by_session = false;
    int window_width = 20;
    int stride = 10;
    ModelConfig model;

    void validate() const;
};

struct EpochRow {
    int epoch;
    double lr, task, kd, se, total;
    double ccc_c_train, ccc_w_train, ccc_c_val, ccc_w_val;
};

struct RunReport {
    std::vector<EpochRow> rows;
    double test_ccc_c = 0.0, test_ccc_w = 0.0;
    int best_epoch = -1;
    double wall_seconds = 0.0;
};

// Normalization baked into a trained model.
struct DataStats {
    NormStats emitter, receiver;          // feature columns
    std::array<double, 2> target_mean{}, target_std{};
    bool features_normalized = false;
    bool targets_normalized = false;
};

struct TrainResult {
    ParamSet params;  // best-validation checkpoint
    ModelConfig model;
    DataStats stats;
    RunReport report;
};

struct Split {
    std::vector<int> train, val, test;
};

// Seeded shuffle of all window indices pooled across sessions, then a
// contiguous train/val/test partition.
Split split_data(int num_windows, std::uint64_t seed,
                 const std::array<double, 3>& fractions);

double lr_schedule(double lr0, int halve_every, int epoch);

struct AdamState {
    std::vector<Tensor> m, v;
    long step = 0;
};

// One Adam update; throws DivergenceError naming the parameter group on a
// non-finite gradient.
void adam_step(ParamSet& params, const std::vector<std::string>& names,
               const std::vector<Tensor>& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

// Differentiated batch objective plus the always-computed breakdown.
struct BatchLoss {
    Value total;
    LossBreakdown breakdown;
};

BatchLoss batch_loss(Tape& tape, const std::vector<ForwardCache>& caches,
                     const std::vector<std::array<double, 2>>& targets,
                     const TrainConfig& cfg);

std::vector<TrainingWindow> collect_windows(const std::vector<SessionBundle>& sessions,
                                            const TrainConfig& cfg,
                                            std::vector<int>* session_of = nullptr);

// partial, when given, is filled row by row so a divergence abort still
// leaves the last finite report behind.
TrainResult train(const TrainConfig& cfg, const std::vector<SessionBundle>& sessions,
                  RunReport* partial = nullptr);

// Zero out one modality's feature columns (input width stays fixed).
std::vector<SessionBundle> zero_modality(std::vector<SessionBundle> sessions,
                                         Source source, Modality modality);

// CCC per dimension of a checkpoint over a window set (eval mode).
std::array<double, 2> evaluate(const ParamSet& params, const ModelConfig& model,
                               const DataStats& stats,
                               const std::vector<TrainingWindow>& windows);

struct AblationRow {
    std::string name;
    double ccc_c, ccc_w;
    double delta_c, delta_w;  // full minus this run
};

// The standard campaign: Full, the two attention removals, the two loss
// removals, and one zeroed-modality run per feature-table cell.
std::vector<std::string> default_ablation_runs();

std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                      const std::vector<SessionBundle>& sessions,
                                      const std::vector<std::string>& runs);

// Report emission.
void write_report_csv(const RunReport& report, const std::string& path);
void write_ablation_csv(const std::vector<AblationRow>& table, const std::string& path);
void write_losses_svg(const RunReport& report, const std::string& path);

}  // namespace dyad
