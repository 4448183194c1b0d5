#include "dyad/dyadgen.hpp"

#include <cmath>

#include "dyad/rng.hpp"

namespace dyad {

namespace {

// Synthetic per-modality widths; only the 412/68 totals are contractual.
struct Block {
    Modality modality;
    int width;
};
const Block kEmitterBlocks[] = {{Modality::Audio, 162}, {Modality::Eye, 70},
                                {Modality::Facial, 180}};
const Block kReceiverBlocks[] = {{Modality::Eye, 20}, {Modality::Facial, 30},
                                 {Modality::Physio, 18}};

template <size_t N>
std::map<std::string, int> block_column_map(const Block (&blocks)[N]) {
    std::map<std::string, int> m;
    int off = 0;
    for (const auto& b : blocks) {
        for (int i = 0; i < b.width; ++i)
            m[to_string(b.modality) + ":ch" + std::to_string(i)] = off + i;
        off += b.width;
    }
    return m;
}

// 2-column mixing matrix, shared by all sessions of one seed.
Tensor mixing_matrix(Rng& rng, int dim) {
    Tensor m = Tensor::zeros({dim, 2});
    for (auto& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

void GenConfig::validate() const {
    if (num_sessions < 1) throw std::invalid_argument("GenConfig: num_sessions must be >= 1");
    if (label_step_prob < 0.0 || label_step_prob > 1.0)
        throw std::invalid_argument("GenConfig: label_step_prob must be in [0,1]");
    if (label_step_scale <= 0.0)
        throw std::invalid_argument("GenConfig: label_step_scale must be > 0");
    if (relatedness < 0.0 || relatedness > 1.0)
        throw std::invalid_argument("GenConfig: relatedness must be in [0,1]");
    if (receiver_lag < 0) throw std::invalid_argument("GenConfig: receiver_lag must be >= 0");
    if (noise_std < 0.0) throw std::invalid_argument("GenConfig: noise_std must be >= 0");
    if (timeline_length < receiver_lag + 2)
        throw std::invalid_argument("GenConfig: timeline too short for receiver_lag");
}

SessionBundle generate_session(const GenConfig& cfg, int index) {
    cfg.validate();
    if (index < 0 || index >= cfg.num_sessions)
        throw std::invalid_argument("generate_session: index out of range");

    const int t = cfg.timeline_length;

    // Mixtures come from a seed-only stream so every session of a dataset
    // shares the same feature geometry.
    Rng mix_rng = Rng::for_stream(cfg.seed, 0xfeedfaceULL);
    Tensor mix_e = mixing_matrix(mix_rng, kEmitterDim);
    Tensor mix_r = mixing_matrix(mix_rng, kReceiverDim);

    Rng rng = Rng::for_stream(cfg.seed, static_cast<std::uint64_t>(index));

    // Stepwise-constant latent walks: competence and warmth.
    Tensor labels = Tensor::zeros({t, 2});
    double cur[2] = {rng.normal() * cfg.label_step_scale,
                     rng.normal() * cfg.label_step_scale};
    for (int i = 0; i < t; ++i) {
        for (int d = 0; d < 2; ++d) {
            if (i > 0 && rng.uniform() < cfg.label_step_prob)
                cur[d] += rng.normal() * cfg.label_step_scale;
            labels.at(i, d) = cur[d];
        }
    }

    SessionBundle bundle;
    bundle.session_id = "synth_" + std::to_string(cfg.seed) + "_" + std::to_string(index);
    bundle.labels = labels;
    bundle.emitter.features = Tensor::zeros({t, kEmitterDim});
    bundle.receiver.features = Tensor::zeros({t, kReceiverDim});
    bundle.emitter.column_map = block_column_map(kEmitterBlocks);
    bundle.receiver.column_map = block_column_map(kReceiverBlocks);

    const double emitter_weight = 0.3 * cfg.relatedness;
    std::vector<double> ar(kEmitterDim, 0.0);
    for (int i = 0; i < t; ++i) {
        for (int j = 0; j < kEmitterDim; ++j) {
            ar[j] = 0.9 * ar[j] + cfg.noise_std * rng.normal();
            double mixed = mix_e.at(j, 0) * labels.at(i, 0) + mix_e.at(j, 1) * labels.at(i, 1);
            bundle.emitter.features.at(i, j) = emitter_weight * mixed + ar[j];
        }
        int lagged = std::max(0, i - cfg.receiver_lag);
        for (int j = 0; j < kReceiverDim; ++j) {
            double mixed = mix_r.at(j, 0) * labels.at(lagged, 0) +
                           mix_r.at(j, 1) * labels.at(lagged, 1);
            bundle.receiver.features.at(i, j) =
                cfg.relatedness * mixed + cfg.noise_std * rng.normal();
        }
    }
    bundle.validate();
    return bundle;
}

}  // namespace dyad
