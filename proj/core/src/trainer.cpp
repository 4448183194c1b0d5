#include "dyad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dyad/errors.hpp"
#include "dyad/signalprep.hpp"

namespace dyad {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1)
        throw ConfigError("TrainConfig: epochs and batch_size must be >= 1");
    if (halve_every < 1) throw ConfigError("TrainConfig: halve_every must be >= 1");
    if (lr0 <= 0.0) throw ConfigError("TrainConfig: lr0 must be > 0");
    double s = split[0] + split[1] + split[2];
    if (std::abs(s - 1.0) > 1e-9)
        throw ConfigError("TrainConfig: split fractions must sum to 1");
    if (window_width < 1 || stride < 1)
        throw ConfigError("TrainConfig: window_width and stride must be >= 1");
    model.validate();
}

Split split_data(int num_windows, std::uint64_t seed,
                 const std::array<double, 3>& fractions) {
    if (num_windows < 10)
        throw std::invalid_argument("split_data: need at least 10 windows, have " +
                                    std::to_string(num_windows));
    std::vector<int> idx(num_windows);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::for_stream(seed, 0x5eedULL);
    for (int i = num_windows - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    int n_train = static_cast<int>(std::floor(fractions[0] * num_windows));
    int n_val = static_cast<int>(std::floor(fractions[1] * num_windows));
    Split split;
    split.train.assign(idx.begin(), idx.begin() + n_train);
    split.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    split.test.assign(idx.begin() + n_train + n_val, idx.end());
    return split;
}

double lr_schedule(double lr0, int halve_every, int epoch) {
    if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
    return lr0 * std::pow(0.5, epoch / halve_every);
}

void adam_step(ParamSet& params, const std::vector<std::string>& names,
               const std::vector<Tensor>& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
    auto& tensors = params.tensors();
    if (grads.size() != tensors.size())
        throw std::invalid_argument("adam_step: gradient count mismatch");
    if (state.m.empty()) {
        for (const auto& t : tensors) {
            state.m.push_back(Tensor::zeros(t.shape));
            state.v.push_back(Tensor::zeros(t.shape));
        }
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
    for (size_t p = 0; p < tensors.size(); ++p) {
        if (!grads[p].all_finite())
            throw DivergenceError("non-finite gradient in parameter group " + names[p]);
        for (size_t i = 0; i < tensors[p].data.size(); ++i) {
            double g = grads[p].data[i];
            double& m = state.m[p].data[i];
            double& v = state.v[p].data[i];
            m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
            v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
            double mh = m / bc1, vh = v / bc2;
            tensors[p].data[i] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
    }
}

namespace {

Value mean_over(std::vector<Value> terms) {
    Value acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, 1.0 / terms.size());
}

}  // namespace

BatchLoss batch_loss(Tape& tape, const std::vector<ForwardCache>& caches,
                     const std::vector<std::array<double, 2>>& targets,
                     const TrainConfig& cfg) {
    if (caches.empty() || caches.size() != targets.size())
        throw std::invalid_argument("batch_loss: empty batch or size mismatch");
    int b = static_cast<int>(caches.size());
    std::vector<Value> preds_c, preds_w;
    Tensor label_c = Tensor::zeros({b, 1}), label_w = Tensor::zeros({b, 1});
    for (int i = 0; i < b; ++i) {
        preds_c.push_back(caches[i].pred_c);
        preds_w.push_back(caches[i].pred_w);
        label_c.data[i] = targets[i][0];
        label_w.data[i] = targets[i][1];
    }
    Value task = task_loss(concat(preds_c, 0), concat(preds_w, 0),
                           tape.constant(label_c), tape.constant(label_w));

    std::vector<Value> kd_terms, se_terms;
    for (const auto& c : caches) {
        Value a = cfg.regularize_sequences ? c.seq_e : c.pool_e;
        Value r = cfg.regularize_sequences ? c.seq_r : c.pool_r;
        Value er = cfg.regularize_sequences ? c.seq_er : c.pool_er;
        Value re = cfg.regularize_sequences ? c.seq_re : c.pool_re;
        if (!cfg.swap_kd_se) {
            kd_terms.push_back(kd_loss(a, r));
            se_terms.push_back(se_loss(er, a, re, r));
        } else {
            // Swapped variant: KL for distillation, MSE for similarity.
            kd_terms.push_back(add(kl_div(seq_softmax_prob(a), seq_softmax_prob(r)),
                                   kl_div(seq_softmax_prob(r), seq_softmax_prob(a))));
            se_terms.push_back(add(mse(er, a), mse(re, r)));
        }
    }
    Value kd = mean_over(kd_terms);
    Value se = mean_over(se_terms);

    BatchLoss out;
    out.breakdown.task = tape.value(task).data[0];
    out.breakdown.kd = tape.value(kd).data[0];
    out.breakdown.se = tape.value(se).data[0];
    out.breakdown.kd_on = cfg.kd_on;
    out.breakdown.se_on = cfg.se_on;
    // A disabled component is computed and logged but never enters the
    // differentiated objective.
    Value total = task;
    if (cfg.kd_on) total = add(total, kd);
    if (cfg.se_on) total = add(total, se);
    out.total = total;
    out.breakdown.total = tape.value(total).data[0];
    return out;
}

std::vector<TrainingWindow> collect_windows(const std::vector<SessionBundle>& sessions,
                                            const TrainConfig& cfg,
                                            std::vector<int>* session_of) {
    std::vector<TrainingWindow> windows;
    for (size_t s = 0; s < sessions.size(); ++s) {
        auto w = make_windows(sessions[s], cfg.window_width, cfg.stride);
        if (session_of) session_of->insert(session_of->end(), w.size(), static_cast<int>(s));
        windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }
    return windows;
}

namespace {

DataStats compute_stats(const std::vector<TrainingWindow>& windows,
                        const std::vector<int>& train_idx, const TrainConfig& cfg) {
    DataStats stats;
    stats.features_normalized = cfg.normalize_features;
    stats.targets_normalized = cfg.normalize_targets;
    int de = windows[0].emitter.cols(), dr = windows[0].receiver.cols();
    stats.emitter.mean.assign(de, 0.0);
    stats.emitter.std_dev.assign(de, 1.0);
    stats.receiver.mean.assign(dr, 0.0);
    stats.receiver.std_dev.assign(dr, 1.0);
    stats.target_mean = {0.0, 0.0};
    stats.target_std = {1.0, 1.0};

    if (cfg.normalize_features) {
        auto accumulate = [&](bool emitter, std::vector<double>& mean,
                              std::vector<double>& sd) {
            int d = emitter ? de : dr;
            std::vector<double> sum(d, 0.0), sq(d, 0.0);
            long rows = 0;
            for (int idx : train_idx) {
                const Tensor& m = emitter ? windows[idx].emitter : windows[idx].receiver;
                for (int i = 0; i < m.rows(); ++i)
                    for (int j = 0; j < d; ++j) {
                        sum[j] += m.at(i, j);
                        sq[j] += m.at(i, j) * m.at(i, j);
                    }
                rows += m.rows();
            }
            for (int j = 0; j < d; ++j) {
                mean[j] = sum[j] / rows;
                double var = sq[j] / rows - mean[j] * mean[j];
                sd[j] = var > 0.0 ? std::sqrt(var) : 0.0;
            }
        };
        accumulate(true, stats.emitter.mean, stats.emitter.std_dev);
        accumulate(false, stats.receiver.mean, stats.receiver.std_dev);
    }
    if (cfg.normalize_targets) {
        for (int d = 0; d < 2; ++d) {
            double s = 0.0, sq = 0.0;
            for (int idx : train_idx) {
                s += windows[idx].target[d];
                sq += windows[idx].target[d] * windows[idx].target[d];
            }
            double m = s / train_idx.size();
            double var = sq / train_idx.size() - m * m;
            stats.target_mean[d] = m;
            stats.target_std[d] = var > 0.0 ? std::sqrt(var) : 1.0;
        }
    }
    return stats;
}

TrainingWindow normalized_window(const TrainingWindow& w, const DataStats& stats) {
    TrainingWindow out = w;
    if (stats.features_normalized) {
        apply_stats(out.emitter, stats.emitter);
        apply_stats(out.receiver, stats.receiver);
    }
    if (stats.targets_normalized)
        for (int d = 0; d < 2; ++d)
            out.target[d] = (w.target[d] - stats.target_mean[d]) / stats.target_std[d];
    return out;
}

double denormalize_pred(double p, const DataStats& stats, int dim) {
    return stats.targets_normalized ? p * stats.target_std[dim] + stats.target_mean[dim]
                                    : p;
}

Split split_by_session(const std::vector<int>& session_of, int num_sessions,
                       std::uint64_t seed, const std::array<double, 3>& fractions) {
    std::vector<int> order(num_sessions);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::for_stream(seed, 0x5e55ULL);
    for (int i = num_sessions - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    int n = static_cast<int>(session_of.size());
    std::vector<int> bucket(num_sessions, 2);
    double acc = 0.0;
    for (int s : order) {
        int count = static_cast<int>(std::count(session_of.begin(), session_of.end(), s));
        double frac = acc / n;
        bucket[s] = frac < fractions[0] ? 0 : (frac < fractions[0] + fractions[1] ? 1 : 2);
        acc += count;
    }
    Split split;
    for (int i = 0; i < n; ++i) {
        int b = bucket[session_of[i]];
        (b == 0 ? split.train : b == 1 ? split.val : split.test).push_back(i);
    }
    if (split.train.empty() || split.val.empty() || split.test.empty())
        throw DataError("split_by_session: a split ended up empty; need more sessions");
    return split;
}

}  // namespace

std::array<double, 2> evaluate(const ParamSet& params, const ModelConfig& model,
                               const DataStats& stats,
                               const std::vector<TrainingWindow>& windows) {
    if (windows.empty()) throw std::invalid_argument("evaluate: empty window set");
    std::vector<double> pc, pw, lc, lw;
    for (const auto& raw : windows) {
        TrainingWindow w = normalized_window(raw, stats);
        Tape tape;
        TapedParams tp(tape, params, false);
        auto cache = forward(tape, tp, w.emitter, w.receiver, model, Mode::Eval);
        pc.push_back(denormalize_pred(tape.value(cache.pred_c).data[0], stats, 0));
        pw.push_back(denormalize_pred(tape.value(cache.pred_w).data[0], stats, 1));
        lc.push_back(raw.target[0]);
        lw.push_back(raw.target[1]);
    }
    return {ccc(pc, lc), ccc(pw, lw)};
}

TrainResult train(const TrainConfig& cfg, const std::vector<SessionBundle>& sessions,
                  RunReport* partial) {
    cfg.validate();
    auto t_start = std::chrono::steady_clock::now();

    std::vector<int> session_of;
    auto windows = collect_windows(sessions, cfg, &session_of);
    Split split = cfg.split_by_session
                      ? split_by_session(session_of, static_cast<int>(sessions.size()),
                                         cfg.seed, cfg.split)
                      : split_data(static_cast<int>(windows.size()), cfg.seed, cfg.split);

    DataStats stats = compute_stats(windows, split.train, cfg);
    std::vector<TrainingWindow> norm_train;
    norm_train.reserve(split.train.size());
    for (int idx : split.train) norm_train.push_back(normalized_window(windows[idx], stats));

    auto pick = [&](const std::vector<int>& idx) {
        std::vector<TrainingWindow> out;
        out.reserve(idx.size());
        for (int i : idx) out.push_back(windows[i]);
        return out;
    };
    auto val_windows = pick(split.val);
    auto test_windows = pick(split.test);

    ParamSet params = init_params(cfg.model);
    AdamState adam;
    Rng dropout_rng = Rng::for_stream(cfg.seed, 0xd20ULL);

    TrainResult result;
    result.model = cfg.model;
    result.stats = stats;
    RunReport& report = result.report;

    ParamSet best_params = params;
    double best_val = -2.0;
    int n_train = static_cast<int>(norm_train.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = lr_schedule(cfg.lr0, cfg.halve_every, epoch);
        std::vector<int> order(n_train);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = Rng::for_stream(cfg.seed, 0xe000ULL + epoch);
        for (int i = n_train - 1; i > 0; --i) {
            int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }

        double sum_task = 0.0, sum_kd = 0.0, sum_se = 0.0, sum_total = 0.0;
        std::vector<double> pc, pw, lc, lw;

        for (int start = 0; start < n_train; start += cfg.batch_size) {
            int bsize = std::min(cfg.batch_size, n_train - start);
            Tape tape;
            tape.reserve(static_cast<size_t>(bsize) * 2600 + params.size());
            TapedParams tp(tape, params, true);
            std::vector<ForwardCache> caches;
            std::vector<std::array<double, 2>> targets;
            for (int k = 0; k < bsize; ++k) {
                const TrainingWindow& w = norm_train[order[start + k]];
                caches.push_back(forward(tape, tp, w.emitter, w.receiver, cfg.model,
                                         Mode::Train, &dropout_rng));
                targets.push_back(w.target);
            }
            BatchLoss bl = batch_loss(tape, caches, targets, cfg);
            if (!std::isfinite(bl.breakdown.total))
                throw DivergenceError("training loss diverged at epoch " +
                                      std::to_string(epoch));
            tape.backward(bl.total);
            std::vector<Tensor> grads;
            grads.reserve(params.size());
            for (const auto& leaf : tp.leaves()) grads.push_back(tape.grad(leaf));
            adam_step(params, params.names(), grads, adam, lr, cfg);

            sum_task += bl.breakdown.task * bsize;
            sum_kd += bl.breakdown.kd * bsize;
            sum_se += bl.breakdown.se * bsize;
            sum_total += bl.breakdown.total * bsize;
            for (int k = 0; k < bsize; ++k) {
                const TrainingWindow& raw = windows[split.train[order[start + k]]];
                pc.push_back(denormalize_pred(tape.value(caches[k].pred_c).data[0], stats, 0));
                pw.push_back(denormalize_pred(tape.value(caches[k].pred_w).data[0], stats, 1));
                lc.push_back(raw.target[0]);
                lw.push_back(raw.target[1]);
            }
        }

        auto val_ccc = evaluate(params, cfg.model, stats, val_windows);
        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.task = sum_task / n_train;
        row.kd = sum_kd / n_train;
        row.se = sum_se / n_train;
        row.total = sum_total / n_train;
        row.ccc_c_train = ccc(pc, lc);
        row.ccc_w_train = ccc(pw, lw);
        row.ccc_c_val = val_ccc[0];
        row.ccc_w_val = val_ccc[1];
        report.rows.push_back(row);
        if (partial) partial->rows.push_back(row);

        double mean_val = 0.5 * (val_ccc[0] + val_ccc[1]);
        if (mean_val > best_val) {
            best_val = mean_val;
            best_params = params;
            report.best_epoch = epoch;
        }
    }

    auto test_ccc = evaluate(best_params, cfg.model, stats, test_windows);
    report.test_ccc_c = test_ccc[0];
    report.test_ccc_w = test_ccc[1];
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.params = std::move(best_params);
    if (partial) {
        partial->test_ccc_c = report.test_ccc_c;
        partial->test_ccc_w = report.test_ccc_w;
        partial->best_epoch = report.best_epoch;
        partial->wall_seconds = report.wall_seconds;
    }
    return result;
}

std::vector<SessionBundle> zero_modality(std::vector<SessionBundle> sessions,
                                         Source source, Modality modality) {
    std::string prefix = to_string(modality) + ":";
    for (auto& s : sessions) {
        AlignedFeatureMatrix& m = (source == Source::Emitter) ? s.emitter : s.receiver;
        if (m.column_map.empty())
            throw DataError("zero_modality: session " + s.session_id + " has no column map");
        bool any = false;
        for (const auto& [name, col] : m.column_map) {
            if (name.rfind(prefix, 0) != 0) continue;
            any = true;
            for (int i = 0; i < m.features.rows(); ++i) m.features.at(i, col) = 0.0;
        }
        if (!any)
            throw DataError("zero_modality: no " + prefix + "* columns in session " +
                            s.session_id);
    }
    return sessions;
}

std::vector<std::string> default_ablation_runs() {
    return {"Full",          "(-) inter-attn.", "(-) intra-attn.", "(-) KD loss",
            "(-) SE loss",   "(-) facial (E)",  "(-) audio (E)",   "(-) eye (E)",
            "(-) facial (R)", "(-) physio (R)",  "(-) eye (R)"};
}

std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                      const std::vector<SessionBundle>& sessions,
                                      const std::vector<std::string>& runs) {
    std::vector<AblationRow> table;
    double full_c = 0.0, full_w = 0.0;
    bool have_full = false;

    auto run_one = [&](const std::string& name) {
        TrainConfig cfg = base;  // every run re-seeds identically to Full
        std::vector<SessionBundle> data = sessions;
        if (name == "Full") {
        } else if (name == "(-) inter-attn.") {
            cfg.model.use_inter = false;
        } else if (name == "(-) intra-attn.") {
            cfg.model.use_intra = false;
        } else if (name == "(-) KD loss") {
            cfg.kd_on = false;
        } else if (name == "(-) SE loss") {
            cfg.se_on = false;
        } else if (name.size() > 8 && name.rfind("(-) ", 0) == 0 &&
                   (name.back() == ')')) {
            auto open = name.rfind('(');
            std::string src = name.substr(open + 1, name.size() - open - 2);
            std::string mod = name.substr(4, open - 5);
            Source source = (src == "E") ? Source::Emitter : Source::Receiver;
            data = zero_modality(std::move(data), source, modality_from_string(mod));
        } else {
            throw ConfigError("run_ablation: unknown run name '" + name + "'");
        }
        auto result = train(cfg, data);
        return std::array<double, 2>{result.report.test_ccc_c, result.report.test_ccc_w};
    };

    for (const auto& name : runs) {
        auto [c, w] = run_one(name);
        if (name == "Full") {
            full_c = c;
            full_w = w;
            have_full = true;
        }
        table.push_back(AblationRow{name, c, w, 0.0, 0.0});
    }
    if (!have_full) {
        auto [c, w] = run_one("Full");
        full_c = c;
        full_w = w;
        table.insert(table.begin(), AblationRow{"Full", c, w, 0.0, 0.0});
    }
    for (auto& row : table) {
        row.delta_c = full_c - row.ccc_c;
        row.delta_w = full_w - row.ccc_w;
    }
    return table;
}

namespace {

void write_or_throw(std::ofstream& out, const std::string& path) {
    if (!out) throw DataError("cannot open " + path + " for writing");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_report_csv(const RunReport& report, const std::string& path) {
    std::ofstream out(path);
    write_or_throw(out, path);
    out << "epoch,lr,task,kd,se,total,ccc_c_train,ccc_w_train,ccc_c_val,ccc_w_val\n";
    for (const auto& r : report.rows)
        out << r.epoch << ',' << fmt(r.lr) << ',' << fmt(r.task) << ',' << fmt(r.kd)
            << ',' << fmt(r.se) << ',' << fmt(r.total) << ',' << fmt(r.ccc_c_train)
            << ',' << fmt(r.ccc_w_train) << ',' << fmt(r.ccc_c_val) << ','
            << fmt(r.ccc_w_val) << '\n';
    out << "# test_ccc_competence=" << fmt(report.test_ccc_c)
        << " test_ccc_warmth=" << fmt(report.test_ccc_w)
        << " best_epoch=" << report.best_epoch << '\n';
}

void write_ablation_csv(const std::vector<AblationRow>& table, const std::string& path) {
    std::ofstream out(path);
    write_or_throw(out, path);
    out << "model,ccc_competence,ccc_warmth,delta_competence,delta_warmth\n";
    for (const auto& r : table)
        out << '"' << r.name << "\"," << fmt(r.ccc_c) << ',' << fmt(r.ccc_w) << ','
            << fmt(r.delta_c) << ',' << fmt(r.delta_w) << '\n';
}

void write_losses_svg(const RunReport& report, const std::string& path) {
    std::ofstream out(path);
    write_or_throw(out, path);
    const int w = 640, h = 320, margin = 40;
    double max_v = 1e-12;
    for (const auto& r : report.rows) max_v = std::max({max_v, r.kd, r.se, r.task});
    int n = static_cast<int>(report.rows.size());
    auto px = [&](int i) {
        return margin + (n > 1 ? (w - 2.0 * margin) * i / (n - 1) : 0.0);
    };
    auto py = [&](double v) { return h - margin - (h - 2.0 * margin) * v / max_v; };
    auto polyline = [&](double EpochRow::* field, const char* color) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (int i = 0; i < n; ++i)
            out << px(i) << ',' << py(report.rows[i].*field) << ' ';
        out << "\"/>\n";
    };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
        << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    polyline(&EpochRow::task, "#333333");
    polyline(&EpochRow::kd, "#d62728");
    polyline(&EpochRow::se, "#1f77b4");
    out << "<text x=\"" << w - margin - 140 << "\" y=\"" << margin
        << "\" font-size=\"12\">task (gray) kd (red) se (blue)</text>\n";
    out << "</svg>\n";
}

}  // namespace dyad
