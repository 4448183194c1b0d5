#include <benchmark/benchmark.h>

#include "dyad/dyadgen.hpp"
#include "dyad/model.hpp"
#include "dyad/signalprep.hpp"
#include "dyad/trainer.hpp"

using namespace dyad;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

void bm_matmul(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
    for (auto _ : state) {
        Tape t;
        benchmark::DoNotOptimize(t.value(matmul(t.leaf(a), t.leaf(b))).data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * n * n);
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_attention(benchmark::State& state) {
    ModelConfig mc;
    ParamSet params = init_params(mc);
    Rng rng(2);
    Tensor h = random_tensor(rng, {20, 2 * mc.d_lstm});
    for (auto _ : state) {
        Tape t;
        TapedParams tp(t, params, false);
        Value v = multi_head_attention(t, t.leaf(h), t.leaf(h), tp, "attn.intra_e",
                                       mc.n_heads);
        benchmark::DoNotOptimize(t.value(v).data.data());
    }
}
BENCHMARK(bm_attention);

void bm_window_forward(benchmark::State& state) {
    ModelConfig mc;
    ParamSet params = init_params(mc);
    Rng rng(3);
    Tensor ew = random_tensor(rng, {20, kEmitterDim});
    Tensor rw = random_tensor(rng, {20, kReceiverDim});
    for (auto _ : state) {
        Tape t;
        t.reserve(4000);
        TapedParams tp(t, params, false);
        auto cache = forward(t, tp, ew, rw, mc, Mode::Eval);
        benchmark::DoNotOptimize(t.value(cache.pred_c).data[0]);
    }
}
BENCHMARK(bm_window_forward);

void bm_window_backward(benchmark::State& state) {
    ModelConfig mc;
    ParamSet params = init_params(mc);
    TrainConfig tc;
    tc.model = mc;
    Rng rng(4);
    Tensor ew = random_tensor(rng, {20, kEmitterDim});
    Tensor rw = random_tensor(rng, {20, kReceiverDim});
    for (auto _ : state) {
        Tape t;
        t.reserve(4000);
        TapedParams tp(t, params, true);
        std::vector<ForwardCache> caches = {forward(t, tp, ew, rw, mc, Mode::Eval)};
        BatchLoss bl = batch_loss(t, caches, {{0.1, -0.2}}, tc);
        t.backward(bl.total);
        benchmark::DoNotOptimize(t.grad(tp.leaves()[0]).data.data());
    }
}
BENCHMARK(bm_window_backward);

void bm_decimate(benchmark::State& state) {
    Rng rng(5);
    RawStream s{Source::Receiver, Modality::Eye, {}, random_tensor(rng, {6000, 20})};
    for (int i = 0; i < 20; ++i) s.channel_names.push_back("c" + std::to_string(i));
    for (auto _ : state) {
        auto out = decimate(s, 3);
        benchmark::DoNotOptimize(out.samples.data.data());
    }
}
BENCHMARK(bm_decimate);

void bm_generate_session(benchmark::State& state) {
    GenConfig gc;
    gc.num_sessions = 1;
    gc.timeline_length = 500;
    for (auto _ : state) {
        auto s = generate_session(gc, 0);
        benchmark::DoNotOptimize(s.labels.data.data());
    }
}
BENCHMARK(bm_generate_session);

}  // namespace

BENCHMARK_MAIN();
