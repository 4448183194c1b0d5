#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "dyad/checkpoint.hpp"
#include "dyad/config_json.hpp"
#include "dyad/dyadgen.hpp"
#include "dyad/gradcheck.hpp"
#include "dyad/session_io.hpp"
#include "dyad/signalprep.hpp"
#include "dyad/trainer.hpp"

namespace fs = std::filesystem;
using namespace dyad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

int cmd_gen(const GenConfig& cfg, const std::string& out_dir) {
    for (int i = 0; i < cfg.num_sessions; ++i) {
        auto bundle = generate_session(cfg, i);
        auto path = write_session(bundle, out_dir);
        std::cout << "wrote " << path.string() << " (T=" << bundle.timeline_length()
                  << ")\n";
    }
    return kExitOk;
}

int cmd_prep(const std::string& input_dir, const std::string& output_dir,
             bool normalize_on) {
    std::vector<fs::path> session_dirs;
    for (const auto& entry : fs::directory_iterator(input_dir))
        if (entry.is_directory()) session_dirs.push_back(entry.path());
    std::sort(session_dirs.begin(), session_dirs.end());
    if (session_dirs.empty()) throw DataError("no session directories in " + input_dir);
    for (const auto& dir : session_dirs) {
        SessionBundle bundle = ingest_session_dir(dir);
        if (normalize_on) bundle = normalize(bundle);
        auto path = write_session(bundle, output_dir);
        std::cout << "prepared " << path.string() << " (T=" << bundle.timeline_length()
                  << ")\n";
    }
    return kExitOk;
}

int cmd_train(TrainConfig cfg, const std::string& data_dir, const std::string& out_dir) {
    auto sessions = load_sessions(data_dir);
    fs::create_directories(out_dir);
    RunReport partial;
    try {
        auto result = train(cfg, sessions, &partial);
        write_report_csv(result.report, (fs::path(out_dir) / "report.csv").string());
        write_losses_svg(result.report, (fs::path(out_dir) / "losses.svg").string());
        save_checkpoint(fs::path(out_dir) / "checkpoint.bin", result.model,
                        result.params, result.stats);
        std::ofstream cfg_out(fs::path(out_dir) / "config.json");
        cfg_out << train_config_to_json_text(cfg) << "\n";
        std::cout << "test CCC: competence=" << result.report.test_ccc_c
                  << " warmth=" << result.report.test_ccc_w
                  << " (best epoch " << result.report.best_epoch << ", "
                  << result.report.wall_seconds << "s)\n";
    } catch (const DivergenceError& e) {
        write_report_csv(partial, (fs::path(out_dir) / "report.csv").string());
        std::cerr << "error: " << e.what() << " (last finite report written)\n";
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             int window_width, int stride) {
    auto ckpt = load_checkpoint(checkpoint_path);
    auto sessions = load_sessions(data_dir);
    TrainConfig wcfg;
    wcfg.window_width = window_width;
    wcfg.stride = stride;
    auto windows = collect_windows(sessions, wcfg);
    auto result = evaluate(ckpt.params, ckpt.model, ckpt.stats, windows);
    std::cout << "ccc_competence=" << result[0] << "\n"
              << "ccc_warmth=" << result[1] << "\n";
    return kExitOk;
}

int cmd_ablate(const TrainConfig& cfg, const std::string& data_dir,
               const std::string& out_dir) {
    auto sessions = load_sessions(data_dir);
    fs::create_directories(out_dir);
    auto table = run_ablation(cfg, sessions, default_ablation_runs());
    auto path = (fs::path(out_dir) / "ablation.csv").string();
    write_ablation_csv(table, path);
    for (const auto& row : table)
        std::printf("%-18s  %+.4f  %+.4f\n", row.name.c_str(), row.ccc_c, row.ccc_w);
    std::cout << "wrote " << path << "\n";
    return kExitOk;
}

int cmd_gradcheck(int trials, std::uint64_t seed);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-domain dyadic impression recognition toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate synthetic dyadic sessions");
    GenConfig gen_cfg;
    std::string gen_out = "data";
    gen->add_option("--seed", gen_cfg.seed);
    gen->add_option("--sessions", gen_cfg.num_sessions);
    gen->add_option("--timeline", gen_cfg.timeline_length);
    gen->add_option("--relatedness", gen_cfg.relatedness);
    gen->add_option("--lag", gen_cfg.receiver_lag);
    gen->add_option("--noise-std", gen_cfg.noise_std);
    gen->add_option("--step-prob", gen_cfg.label_step_prob);
    gen->add_option("--step-scale", gen_cfg.label_step_scale);
    gen->add_option("--out-dir", gen_out)->required();

    // prep
    auto* prep = app.add_subcommand("prep", "Ingest raw CSV sessions and align to labels");
    std::string prep_in, prep_out, prep_norm = "off";
    prep->add_option("--input-dir", prep_in)->required();
    prep->add_option("--output-dir", prep_out)->required();
    prep->add_option("--normalize", prep_norm)->check(CLI::IsMember({"on", "off"}));

    // train
    auto* tr = app.add_subcommand("train", "Train the cross-domain model");
    std::string tr_data, tr_out = "run", tr_config;
    TrainConfig tr_cfg;
    bool no_kd = false, no_se = false, no_inter = false, no_intra = false;
    std::uint64_t tr_seed = 0;
    bool tr_seed_set = false;
    int tr_epochs = 0, tr_batch = 0;
    double tr_lr = 0.0;
    tr->add_option("--data-dir", tr_data)->required();
    tr->add_option("--config", tr_config);
    tr->add_option("--seed", tr_seed)->each([&](const std::string&) { tr_seed_set = true; });
    tr->add_option("--epochs", tr_epochs)->check(CLI::PositiveNumber);
    tr->add_option("--lr", tr_lr)->check(CLI::PositiveNumber);
    tr->add_option("--batch-size", tr_batch)->check(CLI::PositiveNumber);
    tr->add_flag("--no-kd", no_kd);
    tr->add_flag("--no-se", no_se);
    tr->add_flag("--no-inter", no_inter);
    tr->add_flag("--no-intra", no_intra);
    tr->add_option("--out", tr_out);

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (CCC per dimension)");
    std::string ev_ckpt, ev_data;
    int ev_width = 20, ev_stride = 10;
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--data-dir", ev_data)->required();
    ev->add_option("--window-width", ev_width);
    ev->add_option("--stride", ev_stride);

    // ablate
    auto* ab = app.add_subcommand("ablate", "Run the ablation campaign");
    std::string ab_data, ab_out = "ablation", ab_config;
    std::uint64_t ab_seed = 0;
    bool ab_seed_set = false;
    int ab_epochs = 0;
    ab->add_option("--data-dir", ab_data)->required();
    ab->add_option("--config", ab_config);
    ab->add_option("--seed", ab_seed)->each([&](const std::string&) { ab_seed_set = true; });
    ab->add_option("--epochs", ab_epochs)->check(CLI::PositiveNumber);
    ab->add_option("--out", ab_out);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    int gc_trials = 20;
    std::uint64_t gc_seed = 1;
    gc->add_option("--trials", gc_trials)->check(CLI::PositiveNumber);
    gc->add_option("--seed", gc_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*gen) return cmd_gen(gen_cfg, gen_out);
        if (*prep) return cmd_prep(prep_in, prep_out, prep_norm == "on");
        if (*tr) {
            TrainConfig cfg = tr_config.empty() ? TrainConfig{}
                                                : train_config_from_file(tr_config);
            if (tr_seed_set) {
                cfg.seed = tr_seed;
                cfg.model.seed = tr_seed;
            }
            if (tr_epochs > 0) cfg.epochs = tr_epochs;
            if (tr_lr > 0.0) cfg.lr0 = tr_lr;
            if (tr_batch > 0) cfg.batch_size = tr_batch;
            if (no_kd) cfg.kd_on = false;
            if (no_se) cfg.se_on = false;
            if (no_inter) cfg.model.use_inter = false;
            if (no_intra) cfg.model.use_intra = false;
            cfg.validate();
            return cmd_train(cfg, tr_data, tr_out);
        }
        if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_width, ev_stride);
        if (*ab) {
            TrainConfig cfg = ab_config.empty() ? TrainConfig{}
                                                : train_config_from_file(ab_config);
            if (ab_seed_set) {
                cfg.seed = ab_seed;
                cfg.model.seed = ab_seed;
            }
            if (ab_epochs > 0) cfg.epochs = ab_epochs;
            cfg.validate();
            return cmd_ablate(cfg, ab_data, ab_out);
        }
        if (*gc) return cmd_gradcheck(gc_trials, gc_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

namespace {

int cmd_gradcheck(int trials, std::uint64_t seed) {
    Rng rng = Rng::for_stream(seed, 0x6cULL);
    auto rand_tensor = [&](std::vector<int> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (auto& v : t.data) v = rng.uniform(-2.0, 2.0);
        return t;
    };
    double worst = 0.0;
    std::string worst_op = "none";

    auto check = [&](const std::string& name, auto&& build, std::vector<Tensor> params) {
        Tape tape;
        std::vector<Value> leaves;
        for (const auto& p : params) leaves.push_back(tape.leaf(p, true));
        Value loss = build(tape, leaves);
        tape.backward(loss);
        std::vector<Tensor> analytic;
        for (auto l : leaves) analytic.push_back(tape.grad(l));
        auto fn = [&](const std::vector<Tensor>& ps) {
            Tape t2;
            std::vector<Value> ls;
            for (const auto& p : ps) ls.push_back(t2.leaf(p, true));
            return t2.value(build(t2, ls)).data[0];
        };
        double err = grad_check(fn, params, analytic);
        std::printf("  %-24s max rel err %.3e\n", name.c_str(), err);
        if (err > worst) {
            worst = err;
            worst_op = name;
        }
    };

    for (int t = 0; t < trials; ++t) {
        int m = 2 + static_cast<int>(rng.below(5));
        int k = 2 + static_cast<int>(rng.below(5));
        int n = 2 + static_cast<int>(rng.below(5));
        check("matmul", [](Tape& tp, const std::vector<Value>& ls) {
            return sum(matmul(ls[0], ls[1]));
        }, {rand_tensor({m, k}), rand_tensor({k, n})});
        check("softmax", [](Tape& tp, const std::vector<Value>& ls) {
            return sum(mul(softmax(ls[0], 1), ls[1]));
        }, {rand_tensor({m, n}), rand_tensor({m, n})});
        check("tanh/sigmoid/relu", [](Tape& tp, const std::vector<Value>& ls) {
            return sum(mul(tanh_op(ls[0]), sigmoid(relu(ls[0]))));
        }, {rand_tensor({m, n})});
        check("mean_pool/concat", [](Tape& tp, const std::vector<Value>& ls) {
            return sum(mul(concat({mean_pool(ls[0], 0), mean_pool(ls[1], 0)}, 1), ls[2]));
        }, {rand_tensor({m, n}), rand_tensor({k, n}), rand_tensor({1, 2 * n})});
    }

    // Tiny full model through the total objective.
    ModelConfig mc;
    mc.d_model = 6;
    mc.d_lstm = 3;
    mc.n_heads = 2;
    mc.d_attn = 4;
    mc.fc_hidden = 4;
    mc.dropout_rate = 0.0;
    mc.seed = seed;
    ParamSet params = init_params(mc);
    Tensor ew = rand_tensor({3, kEmitterDim});
    Tensor rw = rand_tensor({3, kReceiverDim});
    TrainConfig tc;
    tc.model = mc;

    auto model_loss = [&](const std::vector<Tensor>& ps) {
        ParamSet local = params;
        local.tensors() = ps;
        Tape tape;
        TapedParams tp(tape, local, true);
        auto cache = forward(tape, tp, ew, rw, mc, Mode::Eval);
        std::vector<ForwardCache> caches = {cache};
        std::vector<std::array<double, 2>> targets = {{0.3, -0.4}};
        return batch_loss(tape, caches, targets, tc);
    };
    {
        Tape tape;
        TapedParams tp(tape, params, true);
        auto cache = forward(tape, tp, ew, rw, mc, Mode::Eval);
        std::vector<ForwardCache> caches = {cache};
        std::vector<std::array<double, 2>> targets = {{0.3, -0.4}};
        auto bl = batch_loss(tape, caches, targets, tc);
        tape.backward(bl.total);
        std::vector<Tensor> analytic;
        for (auto l : tp.leaves()) analytic.push_back(tape.grad(l));
        auto fn = [&](const std::vector<Tensor>& ps) {
            return model_loss(ps).breakdown.total;
        };
        double err = grad_check(fn, params.tensors(), analytic);
        std::printf("  %-24s max rel err %.3e\n", "full model objective", err);
        if (err > worst) {
            worst = err;
            worst_op = "full model";
        }
    }

    std::printf("worst: %s (%.3e), threshold 1e-4: %s\n", worst_op.c_str(), worst,
                worst < 1e-4 ? "PASS" : "FAIL");
    return worst < 1e-4 ? kExitOk : 1;
}

}  // namespace
