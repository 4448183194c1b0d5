#include "doctest.h"

#include <cmath>

#include "dyad/gradcheck.hpp"
#include "dyad/losses.hpp"
#include "test_util.hpp"

using namespace dyad;
using dyad::test::rand_tensor;

TEST_CASE("mse matches a triple-checked loop oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        int r = 1 + static_cast<int>(rng.below(6));
        int c = 1 + static_cast<int>(rng.below(6));
        Tensor a = rand_tensor(rng, {r, c}), b = rand_tensor(rng, {r, c});
        double want = 0.0;
        for (size_t i = 0; i < a.data.size(); ++i) {
            double d = a.data[i] - b.data[i];
            want += d * d;
        }
        want /= a.data.size();
        Tape t;
        double got = t.value(mse(t.leaf(a), t.leaf(b))).data[0];
        CHECK(std::abs(got - want) < 1e-12);
    }
}

TEST_CASE("representation-matching loss equals twice the mse and is symmetric") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor a = rand_tensor(rng, {1, 8}), b = rand_tensor(rng, {1, 8});
        Tape t;
        Value va = t.leaf(a), vb = t.leaf(b);
        double kd = t.value(kd_loss(va, vb)).data[0];
        double m = t.value(mse(va, vb)).data[0];
        CHECK(kd == doctest::Approx(2.0 * m).epsilon(1e-12));
        double kd_swapped = t.value(kd_loss(vb, va)).data[0];
        CHECK(kd == kd_swapped);
    }
}

TEST_CASE("softened probabilities: rows sum to one and match softmax") {
    Rng rng(13);
    Tape t;
    // a row vector is one distribution
    Value row = t.leaf(rand_tensor(rng, {1, 7}));
    Tensor p = t.value(seq_softmax_prob(row));
    double s = 0.0;
    for (double v : p.data) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    Tensor direct = t.value(softmax(row, 1));
    for (size_t i = 0; i < p.data.size(); ++i) CHECK(p.data[i] == direct.data[i]);

    // uniform input softens to uniform
    Value flat = t.leaf(Tensor::full({1, 4}, 3.0));
    for (double v : t.value(seq_softmax_prob(flat)).data)
        CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    // a matrix softens each channel along time
    Value seq = t.leaf(rand_tensor(rng, {5, 3}));
    const Tensor& q = t.value(seq_softmax_prob(seq));
    for (int j = 0; j < 3; ++j) {
        double col = 0.0;
        for (int i = 0; i < 5; ++i) col += q.at(i, j);
        CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("kl divergence: hand value, positivity, normalization guard") {
    Tape t;
    Value pa = t.leaf(Tensor({1, 2}, {0.5, 0.5}));
    Value pb = t.leaf(Tensor({1, 2}, {0.25, 0.75}));
    double want = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(t.value(kl_div(pa, pb)).data[0] == doctest::Approx(want).epsilon(1e-12));
    CHECK(want == doctest::Approx(0.14384103622589045).epsilon(1e-12));

    // KL(p || p) = 0 and KL >= 0 for random softened pairs
    Rng rng(14);
    for (int trial = 0; trial < 1000; ++trial) {
        Tape tt;
        Value a = seq_softmax_prob(tt.leaf(rand_tensor(rng, {1, 6})));
        Value b = seq_softmax_prob(tt.leaf(rand_tensor(rng, {1, 6})));
        CHECK(tt.value(kl_div(a, a)).data[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(tt.value(kl_div(a, b)).data[0] >= -1e-12);
    }

    Value not_norm = t.leaf(Tensor({1, 2}, {0.5, 0.8}));
    CHECK_THROWS_AS(kl_div(not_norm, pb), std::invalid_argument);
}

TEST_CASE("similarity loss is zero when cross and self representations agree") {
    Rng rng(15);
    Tensor he = rand_tensor(rng, {1, 10}), hr = rand_tensor(rng, {1, 10});
    Tape t;
    Value e = t.leaf(he), r = t.leaf(hr);
    CHECK(t.value(se_loss(e, e, r, r)).data[0] == doctest::Approx(0.0).epsilon(1e-12));
    // and positive, asymmetric in general otherwise
    double fwd = t.value(se_loss(e, r, r, e)).data[0];
    CHECK(fwd > 0.0);
    Tensor hx = rand_tensor(rng, {1, 10});
    Value x = t.leaf(hx);
    double ab = t.value(kl_div(seq_softmax_prob(e), seq_softmax_prob(x))).data[0];
    double ba = t.value(kl_div(seq_softmax_prob(x), seq_softmax_prob(e))).data[0];
    CHECK(ab != doctest::Approx(ba).epsilon(1e-9));
}

TEST_CASE("task loss sums the two head errors") {
    Rng rng(16);
    int n = 9;
    Tensor pc = rand_tensor(rng, {n, 1}), pw = rand_tensor(rng, {n, 1});
    Tensor lc = rand_tensor(rng, {n, 1}), lw = rand_tensor(rng, {n, 1});
    double want = 0.0;
    for (int i = 0; i < n; ++i) {
        want += (pc.at(i, 0) - lc.at(i, 0)) * (pc.at(i, 0) - lc.at(i, 0)) / n;
        want += (pw.at(i, 0) - lw.at(i, 0)) * (pw.at(i, 0) - lw.at(i, 0)) / n;
    }
    Tape t;
    double got = t.value(task_loss(t.leaf(pc), t.leaf(pw), t.leaf(lc), t.leaf(lw))).data[0];
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("concordance correlation: identities and closed forms") {
    Rng rng(17);
    std::vector<double> x(50);
    for (auto& v : x) v = rng.normal();
    CHECK(ccc(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    // unit-variance series against itself shifted by 1: 2v / (2v + 1) = 2/3
    std::vector<double> u(2000), shifted(2000);
    for (size_t i = 0; i < u.size(); ++i) u[i] = (i % 2 == 0) ? 1.0 : -1.0;
    for (size_t i = 0; i < u.size(); ++i) shifted[i] = u[i] + 1.0;
    CHECK(ccc(u, shifted) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

    // shift both by the same constant: invariant
    std::vector<double> y(50);
    for (auto& v : y) v = rng.normal();
    double base = ccc(x, y);
    std::vector<double> xs = x, ys = y;
    for (auto& v : xs) v += 5.0;
    for (auto& v : ys) v += 5.0;
    CHECK(ccc(xs, ys) == doctest::Approx(base).epsilon(1e-9));

    // degenerate conventions
    std::vector<double> c1(10, 2.0), c2(10, 2.0), c3(10, 3.0);
    CHECK(ccc(c1, c2) == 1.0);
    CHECK(ccc(c1, c3) == 0.0);
    CHECK(ccc(c1, std::vector<double>(y.begin(), y.begin() + 10)) == 0.0);
    CHECK_THROWS_AS(ccc(x, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("loss gradients agree with finite differences") {
    Rng rng(18);
    Tensor he = rand_tensor(rng, {1, 12}), hr = rand_tensor(rng, {1, 12});
    Tensor her = rand_tensor(rng, {1, 12}), hre = rand_tensor(rng, {1, 12});

    auto check_loss = [&](auto&& build, const std::vector<Tensor>& params) {
        ScalarFn f = [&](const std::vector<Tensor>& p) {
            Tape t;
            std::vector<Value> vs;
            for (const auto& tensor : p) vs.push_back(t.leaf(tensor, true));
            return t.value(build(t, vs)).data[0];
        };
        Tape t;
        std::vector<Value> vs;
        for (const auto& tensor : params) vs.push_back(t.leaf(tensor, true));
        Value loss = build(t, vs);
        t.backward(loss);
        std::vector<Tensor> analytic;
        for (auto v : vs) analytic.push_back(t.grad(v));
        CHECK(grad_check(f, params, analytic) < 1e-4);
    };

    check_loss([](Tape&, std::vector<Value>& v) { return mse(v[0], v[1]); }, {he, hr});
    check_loss([](Tape&, std::vector<Value>& v) { return kd_loss(v[0], v[1]); }, {he, hr});
    check_loss(
        [](Tape&, std::vector<Value>& v) { return se_loss(v[0], v[1], v[2], v[3]); },
        {her, he, hre, hr});
    check_loss(
        [](Tape&, std::vector<Value>& v) {
            return task_loss(v[0], v[1], v[2], v[3]);
        },
        {rand_tensor(rng, {6, 1}), rand_tensor(rng, {6, 1}), rand_tensor(rng, {6, 1}),
         rand_tensor(rng, {6, 1})});
}
