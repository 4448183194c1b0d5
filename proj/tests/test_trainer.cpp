#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dyad/checkpoint.hpp"
#include "dyad/config_json.hpp"
#include "dyad/dyadgen.hpp"
#include "dyad/trainer.hpp"
#include "test_util.hpp"

using namespace dyad;
using dyad::test::rand_tensor;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model() {
    ModelConfig mc;
    mc.d_model = 6;
    mc.d_lstm = 3;
    mc.n_heads = 2;
    mc.d_attn = 4;
    mc.fc_hidden = 4;
    mc.dropout_rate = 0.0;
    mc.seed = 2;
    return mc;
}

TrainConfig tiny_train_config() {
    TrainConfig tc;
    tc.model = tiny_model();
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.window_width = 20;
    tc.stride = 10;
    return tc;
}

std::vector<SessionBundle> tiny_sessions(int n = 2, int t = 200) {
    GenConfig gc;
    gc.num_sessions = n;
    gc.timeline_length = t;
    std::vector<SessionBundle> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_session(gc, i));
    return out;
}

}  // namespace

TEST_CASE("split_data: sizes, determinism, partition") {
    auto s = split_data(100, 7, {0.8, 0.1, 0.1});
    CHECK(s.train.size() == 80);
    CHECK(s.val.size() == 10);
    CHECK(s.test.size() == 10);

    auto again = split_data(100, 7, {0.8, 0.1, 0.1});
    CHECK(s.train == again.train);
    CHECK(s.val == again.val);
    CHECK(s.test == again.test);
    auto other = split_data(100, 8, {0.8, 0.1, 0.1});
    CHECK(s.train != other.train);

    std::set<int> all;
    for (auto* part : {&s.train, &s.val, &s.test})
        for (int i : *part) all.insert(i);
    CHECK(all.size() == 100);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 99);

    CHECK_THROWS_AS(split_data(9, 7, {0.8, 0.1, 0.1}), std::invalid_argument);
}

TEST_CASE("learning-rate schedule halves every 20 epochs") {
    CHECK(lr_schedule(1e-3, 20, 0) == 1e-3);
    CHECK(lr_schedule(1e-3, 20, 19) == 1e-3);
    CHECK(lr_schedule(1e-3, 20, 20) == 5e-4);
    CHECK(lr_schedule(1e-3, 20, 39) == 5e-4);
    CHECK(lr_schedule(1e-3, 20, 40) == 2.5e-4);
    CHECK_THROWS_AS(lr_schedule(1e-3, 20, -1), std::invalid_argument);
}

TEST_CASE("adam: no-op on zero gradients, quadratic convergence, guards") {
    TrainConfig tc = tiny_train_config();

    ParamSet p;
    p.add("x", Tensor({1}, {1.0}));
    AdamState state;
    adam_step(p, p.names(), {Tensor({1}, {0.0})}, state, 1e-2, tc);
    CHECK(p.at("x").data[0] == 1.0);

    // minimize x^2 from x=1
    ParamSet q;
    q.add("x", Tensor({1}, {1.0}));
    AdamState qs;
    for (int step = 0; step < 500; ++step) {
        Tensor g({1}, {2.0 * q.at("x").data[0]});
        adam_step(q, q.names(), {g}, qs, 1e-2, tc);
    }
    CHECK(std::abs(q.at("x").data[0]) < 1e-3);

    // with a constant gradient the step size settles at about lr
    ParamSet r;
    r.add("x", Tensor({1}, {0.0}));
    AdamState rs;
    double prev = 0.0;
    for (int step = 0; step < 200; ++step) {
        prev = r.at("x").data[0];
        adam_step(r, r.names(), {Tensor({1}, {3.0})}, rs, 1e-2, tc);
    }
    CHECK(prev - r.at("x").data[0] == doctest::Approx(1e-2).epsilon(0.01));

    AdamState bad;
    ParamSet b;
    b.add("x", Tensor({1}, {0.0}));
    CHECK_THROWS_AS(
        adam_step(b, b.names(), {Tensor({1}, {std::nan("")})}, bad, 1e-2, tc),
        DivergenceError);
}

TEST_CASE("batch objective: breakdown sums and component switches") {
    TrainConfig tc = tiny_train_config();
    ParamSet params = init_params(tc.model);
    Rng rng(41);
    Tensor ew = rand_tensor(rng, {4, kEmitterDim});
    Tensor rw = rand_tensor(rng, {4, kReceiverDim});
    std::vector<std::array<double, 2>> targets = {{0.2, -0.1}};

    auto grads_for = [&](bool kd_on, bool se_on, LossBreakdown* bd = nullptr) {
        TrainConfig cfg = tc;
        cfg.kd_on = kd_on;
        cfg.se_on = se_on;
        Tape tape;
        TapedParams tp(tape, params, true);
        std::vector<ForwardCache> caches = {
            forward(tape, tp, ew, rw, cfg.model, Mode::Eval)};
        BatchLoss bl = batch_loss(tape, caches, targets, cfg);
        if (bd) *bd = bl.breakdown;
        tape.backward(bl.total);
        std::vector<Tensor> g;
        for (Value v : tp.leaves()) g.push_back(tape.grad(v));
        return g;
    };

    LossBreakdown full;
    grads_for(true, true, &full);
    CHECK(full.total ==
          doctest::Approx(full.task + full.kd + full.se).epsilon(1e-12));
    CHECK(full.kd > 0.0);
    CHECK(full.se > 0.0);

    // disabled terms are still reported but leave the objective
    LossBreakdown off;
    auto g_off = grads_for(false, false, &off);
    CHECK(off.kd == doctest::Approx(full.kd).epsilon(1e-12));
    CHECK(off.se == doctest::Approx(full.se).epsilon(1e-12));
    CHECK(off.total == doctest::Approx(off.task).epsilon(1e-12));

    // gradients are additive across the three terms:
    // grad(task+kd+se) == grad(task+kd) + grad(task+se) - grad(task)
    auto g_no_kd = grads_for(false, true);
    auto g_no_se = grads_for(true, false);
    auto g_task = grads_for(false, false);
    auto g_all = grads_for(true, true);
    double worst = 0.0;
    for (size_t i = 0; i < g_all.size(); ++i)
        for (size_t j = 0; j < g_all[i].data.size(); ++j) {
            double want = g_no_kd[i].data[j] + g_no_se[i].data[j] - g_task[i].data[j];
            worst = std::max(worst, std::abs(g_all[i].data[j] - want));
        }
    CHECK(worst < 1e-10);

    Tape t;
    CHECK_THROWS_AS(batch_loss(t, {}, {}, tc), std::invalid_argument);
}

TEST_CASE("disabled components draw zero gradient") {
    // inter attention off everywhere it could leak: fused path switched off,
    // KD/SE do not touch the inter weights when se is off
    TrainConfig tc = tiny_train_config();
    tc.model.use_inter = false;
    tc.se_on = false;
    ParamSet params = init_params(tc.model);
    Rng rng(42);
    Tensor ew = rand_tensor(rng, {4, kEmitterDim});
    Tensor rw = rand_tensor(rng, {4, kReceiverDim});

    Tape tape;
    TapedParams tp(tape, params, true);
    std::vector<ForwardCache> caches = {forward(tape, tp, ew, rw, tc.model, Mode::Eval)};
    BatchLoss bl = batch_loss(tape, caches, {{0.1, 0.2}}, tc);
    tape.backward(bl.total);
    for (size_t i = 0; i < params.size(); ++i) {
        if (params.names()[i].rfind("attn.inter_", 0) != 0) continue;
        for (double g : tape.grad(tp.leaves()[i]).data) CHECK(g == 0.0);
    }
    // and an enabled block does receive gradient
    double intra_norm = 0.0;
    for (size_t i = 0; i < params.size(); ++i)
        if (params.names()[i].rfind("attn.intra_", 0) == 0)
            for (double g : tape.grad(tp.leaves()[i]).data) intra_norm += g * g;
    CHECK(intra_norm > 0.0);
}

TEST_CASE("training smoke run: report shape, schedule column, determinism") {
    auto sessions = tiny_sessions();
    TrainConfig tc = tiny_train_config();
    tc.epochs = 4;
    tc.halve_every = 2;

    auto result = train(tc, sessions);
    REQUIRE(static_cast<int>(result.report.rows.size()) == tc.epochs);
    for (int e = 0; e < tc.epochs; ++e) {
        CHECK(result.report.rows[e].epoch == e);
        CHECK(result.report.rows[e].lr == lr_schedule(tc.lr0, tc.halve_every, e));
        CHECK(std::isfinite(result.report.rows[e].total));
    }
    CHECK(result.report.best_epoch >= 0);
    CHECK(result.report.best_epoch < tc.epochs);
    CHECK(result.stats.features_normalized);
    CHECK(result.stats.targets_normalized);

    auto rerun = train(tc, sessions);
    for (int e = 0; e < tc.epochs; ++e) {
        CHECK(result.report.rows[e].total == rerun.report.rows[e].total);
        CHECK(result.report.rows[e].ccc_c_val == rerun.report.rows[e].ccc_c_val);
    }
    for (size_t i = 0; i < result.params.size(); ++i)
        CHECK(result.params.tensors()[i].data == rerun.params.tensors()[i].data);
}

TEST_CASE("training reduces the task loss on learnable data") {
    auto sessions = tiny_sessions(2, 400);
    TrainConfig tc = tiny_train_config();
    tc.epochs = 8;
    auto result = train(tc, sessions);
    double first = result.report.rows.front().task;
    double last = result.report.rows.back().task;
    CHECK(last < first);
}

TEST_CASE("zero_modality blanks exactly the addressed columns") {
    auto sessions = tiny_sessions(1, 60);
    auto zeroed = zero_modality(sessions, Source::Receiver, Modality::Physio);
    const auto& cm = zeroed[0].receiver.column_map;
    int zero_cols = 0;
    for (const auto& [name, col] : cm) {
        bool is_physio = name.rfind("physio:", 0) == 0;
        bool all_zero = true;
        for (int i = 0; i < zeroed[0].timeline_length(); ++i)
            if (zeroed[0].receiver.features.at(i, col) != 0.0) all_zero = false;
        if (is_physio) {
            CHECK(all_zero);
            ++zero_cols;
        } else {
            CHECK_FALSE(all_zero);
        }
    }
    CHECK(zero_cols == 18);
    // emitter side untouched
    CHECK(zeroed[0].emitter.features.data == sessions[0].emitter.features.data);

    CHECK_THROWS_AS(zero_modality(sessions, Source::Emitter, Modality::Physio),
                    DataError);
}

TEST_CASE("ablation campaign: run list, unknown names, determinism") {
    auto runs = default_ablation_runs();
    REQUIRE(runs.size() == 11);
    CHECK(runs[0] == "Full");
    CHECK(std::count(runs.begin(), runs.end(), "(-) KD loss") == 1);
    CHECK(std::count(runs.begin(), runs.end(), "(-) physio (R)") == 1);

    auto sessions = tiny_sessions();
    TrainConfig tc = tiny_train_config();
    tc.epochs = 2;
    CHECK_THROWS_AS(run_ablation(tc, sessions, {"Full", "(-) nonsense"}), ConfigError);

    auto table = run_ablation(tc, sessions, {"Full", "(-) KD loss"});
    REQUIRE(table.size() == 2);
    CHECK(table[0].name == "Full");
    CHECK(table[0].delta_c == 0.0);
    CHECK(table[1].delta_c ==
          doctest::Approx(table[0].ccc_c - table[1].ccc_c).epsilon(1e-12));

    // a run list without Full still gets the baseline prepended
    auto table2 = run_ablation(tc, sessions, {"(-) SE loss"});
    REQUIRE(table2.size() == 2);
    CHECK(table2[0].name == "Full");
    CHECK(table2[0].ccc_c == table[0].ccc_c);  // same seed, bit-identical
}

TEST_CASE("report files: csv headers and svg plot") {
    auto sessions = tiny_sessions();
    TrainConfig tc = tiny_train_config();
    tc.epochs = 2;
    auto result = train(tc, sessions);

    auto dir = fs::temp_directory_path() / "trainer_test_reports";
    fs::create_directories(dir);
    auto report_path = (dir / "report.csv").string();
    auto svg_path = (dir / "losses.svg").string();
    write_report_csv(result.report, report_path);
    write_losses_svg(result.report, svg_path);

    std::ifstream rep(report_path);
    std::string header;
    std::getline(rep, header);
    CHECK(header == "epoch,lr,task,kd,se,total,ccc_c_train,ccc_w_train,ccc_c_val,ccc_w_val");
    int lines = 0;
    std::string line;
    while (std::getline(rep, line))
        if (!line.empty() && line[0] != '#') ++lines;
    CHECK(lines == tc.epochs);

    std::ifstream svg(svg_path);
    std::string all((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(all.find("<svg") != std::string::npos);
    CHECK(std::count(all.begin(), all.end(), '\n') > 3);
    CHECK(all.find("polyline") != std::string::npos);

    std::vector<AblationRow> rows = {{"Full", 0.5, 0.6, 0.0, 0.0}};
    auto ab_path = (dir / "ablation.csv").string();
    write_ablation_csv(rows, ab_path);
    std::ifstream ab(ab_path);
    std::getline(ab, header);
    CHECK(header == "model,ccc_competence,ccc_warmth,delta_competence,delta_warmth");
    fs::remove_all(dir);
}

TEST_CASE("json config: round trip and unknown-key rejection") {
    TrainConfig tc = tiny_train_config();
    tc.lr0 = 2.5e-4;
    tc.kd_on = false;
    tc.model.n_heads = 2;
    std::string text = train_config_to_json_text(tc);
    TrainConfig back = train_config_from_json_text(text);
    CHECK(back.lr0 == tc.lr0);
    CHECK(back.kd_on == tc.kd_on);
    CHECK(back.model.n_heads == tc.model.n_heads);
    CHECK(back.window_width == tc.window_width);

    CHECK_THROWS_AS(train_config_from_json_text("{\"learning_rate\": 0.1}"), ConfigError);
    CHECK_THROWS_AS(train_config_from_json_text("{\"model\": {\"bogus\": 1}}"), ConfigError);
    CHECK_THROWS_AS(train_config_from_json_text("not json"), ConfigError);
}

TEST_CASE("checkpoint: bit-exact round trip") {
    ModelConfig mc = tiny_model();
    ParamSet params = init_params(mc);
    DataStats stats;
    stats.emitter.mean.assign(kEmitterDim, 0.25);
    stats.emitter.std_dev.assign(kEmitterDim, 2.0);
    stats.receiver.mean.assign(kReceiverDim, -0.5);
    stats.receiver.std_dev.assign(kReceiverDim, 0.75);
    stats.target_mean = {0.1, -0.2};
    stats.target_std = {1.5, 2.5};
    stats.features_normalized = true;
    stats.targets_normalized = true;

    auto dir = fs::temp_directory_path() / "trainer_test_ckpt";
    fs::create_directories(dir);
    auto path = dir / "checkpoint.bin";
    save_checkpoint(path, mc, params, stats);
    auto back = load_checkpoint(path);

    CHECK(back.model.d_model == mc.d_model);
    CHECK(back.model.n_heads == mc.n_heads);
    REQUIRE(back.params.size() == params.size());
    CHECK(back.params.names() == params.names());
    for (size_t i = 0; i < params.size(); ++i) {
        CHECK(back.params.tensors()[i].shape == params.tensors()[i].shape);
        CHECK(back.params.tensors()[i].data == params.tensors()[i].data);
    }
    CHECK(back.stats.emitter.mean == stats.emitter.mean);
    CHECK(back.stats.target_std == stats.target_std);
    CHECK(back.stats.targets_normalized);

    // truncation is caught
    fs::resize_file(path, fs::file_size(path) / 3);
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("evaluate matches the training-report validation metric machinery") {
    auto sessions = tiny_sessions();
    TrainConfig tc = tiny_train_config();
    tc.epochs = 2;
    auto result = train(tc, sessions);
    auto windows = collect_windows(sessions, tc);
    auto scores = evaluate(result.params, result.model, result.stats, windows);
    CHECK(std::isfinite(scores[0]));
    CHECK(std::isfinite(scores[1]));
    CHECK(scores[0] >= -1.0);
    CHECK(scores[0] <= 1.0);
    CHECK_THROWS_AS(evaluate(result.params, result.model, result.stats, {}),
                    std::invalid_argument);
}
