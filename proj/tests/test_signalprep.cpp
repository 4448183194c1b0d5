#include "doctest.h"

#include <cmath>

#include "dyad/signalprep.hpp"
#include "test_util.hpp"

using namespace dyad;
using dyad::test::rand_tensor;

namespace {

RawStream sine_stream(int samples, double freq_hz, double rate_hz,
                      Source src = Source::Receiver, Modality mod = Modality::Eye) {
    RawStream s{src, mod, {"ch0"}, Tensor::zeros({samples, 1})};
    for (int i = 0; i < samples; ++i)
        s.samples.at(i, 0) = std::sin(2.0 * M_PI * freq_hz * i / rate_hz);
    return s;
}

RawStream random_stream(Rng& rng, int samples, int channels, Source src,
                        Modality mod) {
    RawStream s{src, mod, {}, rand_tensor(rng, {samples, channels})};
    for (int c = 0; c < channels; ++c) s.channel_names.push_back("c" + std::to_string(c));
    return s;
}

}  // namespace

TEST_CASE("decimate length contract and argument checks") {
    Rng rng(1);
    auto s = random_stream(rng, 100, 3, Source::Receiver, Modality::Eye);
    CHECK(decimate(s, 1).length() == 100);
    CHECK(decimate(s, 3).length() == 33);
    CHECK_THROWS_AS(decimate(s, 0), std::invalid_argument);
}

TEST_CASE("decimate by three keeps a 1 Hz tone dominant") {
    // 1 Hz sinusoid sampled at 30 Hz for 10 s: bin 10 of 300 samples.
    auto s = sine_stream(300, 1.0, 30.0);
    CHECK(dyad::test::dominant_bin(
              std::vector<double>(s.samples.data.begin(), s.samples.data.end())) == 10);
    auto out = decimate(s, 3);
    REQUIRE(out.length() == 100);
    // still 10 cycles over the (now 10 Hz) record
    std::vector<double> y(out.samples.data.begin(), out.samples.data.end());
    CHECK(dyad::test::dominant_bin(y) == 10);
}

TEST_CASE("fft_downsample identity, DC preservation, exact lengths") {
    Rng rng(2);
    auto s = random_stream(rng, 57, 2, Source::Emitter, Modality::Audio);
    auto same = fft_downsample(s, 57);
    for (size_t i = 0; i < s.samples.data.size(); ++i)
        CHECK(std::abs(same.samples.data[i] - s.samples.data[i]) < 1e-9);

    RawStream flat{Source::Receiver, Modality::Physio, {"bvp"}, Tensor::full({83, 1}, 4.5)};
    auto flat_out = fft_downsample(flat, 31);
    REQUIRE(flat_out.length() == 31);
    for (double v : flat_out.samples.data) CHECK(v == doctest::Approx(4.5).epsilon(1e-12));

    auto big = random_stream(rng, 1000, 1, Source::Emitter, Modality::Audio);
    CHECK(fft_downsample(big, 448).length() == 448);
    CHECK_THROWS_AS(fft_downsample(big, 1001), std::invalid_argument);
}

TEST_CASE("align_to_labels picks the documented paths and hits T exactly") {
    Rng rng(3);
    int t = 120;
    // S = 2T: pure decimation path
    auto eye = random_stream(rng, 2 * t, 4, Source::Receiver, Modality::Eye);
    auto m = align_to_labels({eye}, t);
    CHECK(m.timeline_length() == t);
    // S ~ 3.01T: decimate by 3 then spectral resample
    auto audio = random_stream(rng, 3 * t + 4, 2, Source::Emitter, Modality::Audio);
    auto m2 = align_to_labels({audio}, t);
    CHECK(m2.timeline_length() == t);

    auto tiny = random_stream(rng, t - 1, 1, Source::Receiver, Modality::Eye);
    CHECK_THROWS_AS(align_to_labels({tiny}, t), DataError);
}

TEST_CASE("align_to_labels property: exact T rows for random (S, T)") {
    Rng rng(4);
    for (int trial = 0; trial < 60; ++trial) {
        int t = 10 + static_cast<int>(rng.below(200));
        int s = t + static_cast<int>(rng.below(5 * static_cast<std::uint64_t>(t)));
        auto stream = random_stream(rng, s, 1, Source::Receiver, Modality::Facial);
        auto m = align_to_labels({stream}, t);
        CHECK(m.timeline_length() == t);
    }
}

TEST_CASE("decimate then fft_downsample keeps a band-limited tone dominant") {
    // 2 Hz tone sampled at 120 Hz; resample to 25 Hz output (below 0.4x).
    auto s = sine_stream(1200, 2.0, 120.0);
    auto half = decimate(s, 2);
    auto out = fft_downsample(half, 250);
    std::vector<double> y(out.samples.data.begin(), out.samples.data.end());
    CHECK(dyad::test::dominant_bin(y) == 20);  // 2 Hz over a 10 s record
}

TEST_CASE("concat_features totals and duplicate detection") {
    Rng rng(5);
    int t = 50;
    // the feature-selection table's cells
    std::vector<RawStream> emitter = {
        random_stream(rng, t, 162, Source::Emitter, Modality::Audio),
        random_stream(rng, t, 70, Source::Emitter, Modality::Eye),
        random_stream(rng, t, 180, Source::Emitter, Modality::Facial)};
    std::vector<RawStream> receiver = {
        random_stream(rng, t, 20, Source::Receiver, Modality::Eye),
        random_stream(rng, t, 30, Source::Receiver, Modality::Facial),
        random_stream(rng, t, 18, Source::Receiver, Modality::Physio)};
    CHECK(align_to_labels(emitter, t).dim() == kEmitterDim);
    CHECK(align_to_labels(receiver, t).dim() == kReceiverDim);

    AlignedFeatureMatrix a;
    a.features = rand_tensor(rng, {t, 2});
    a.column_map = {{"x", 0}, {"y", 1}};
    auto single = concat_features({a});
    CHECK(single.features.data == a.features.data);
    CHECK_THROWS_AS(concat_features({a, a}), DataError);
}

TEST_CASE("invalid source/modality pairs are rejected") {
    Rng rng(6);
    auto bad = random_stream(rng, 40, 2, Source::Emitter, Modality::Physio);
    CHECK_THROWS_AS(bad.validate(), DataError);
    auto bad2 = random_stream(rng, 40, 2, Source::Receiver, Modality::Audio);
    CHECK_THROWS_AS(align_to_labels({bad2}, 20), DataError);
}

TEST_CASE("normalize: z-scores, constant columns, affine application") {
    Rng rng(7);
    int t = 200;
    SessionBundle b;
    b.session_id = "norm";
    b.emitter.features = rand_tensor(rng, {t, kEmitterDim});
    b.receiver.features = rand_tensor(rng, {t, kReceiverDim});
    for (int i = 0; i < t; ++i) b.receiver.features.at(i, 5) = 3.0;  // constant column
    b.labels = rand_tensor(rng, {t, 2});

    auto n = normalize(b);
    for (int j = 0; j < 10; ++j) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < t; ++i) mean += n.emitter.features.at(i, j);
        mean /= t;
        for (int i = 0; i < t; ++i) {
            double d = n.emitter.features.at(i, j) - mean;
            var += d * d;
        }
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var / t) - 1.0) < 1e-6);
    }
    for (int i = 0; i < t; ++i) CHECK(n.receiver.features.at(i, 5) == 0.0);

    // train stats applied to other data is a pure affine map
    SessionBundle val = b;
    val.labels = b.labels;
    auto applied = normalize(val, n.emitter_stats, n.receiver_stats);
    for (int j = 0; j < 5; ++j) {
        double mu = n.emitter_stats->mean[j], sd = n.emitter_stats->std_dev[j];
        for (int i = 0; i < 20; ++i) {
            double direct = (b.emitter.features.at(i, j) - mu) / sd;
            CHECK(applied.emitter.features.at(i, j) == doctest::Approx(direct).epsilon(1e-12));
        }
    }
}

TEST_CASE("windowing counts and targets") {
    Rng rng(8);
    int t = 100;
    SessionBundle b;
    b.session_id = "win";
    b.emitter.features = rand_tensor(rng, {t, kEmitterDim});
    b.receiver.features = rand_tensor(rng, {t, kReceiverDim});
    b.labels = Tensor::full({t, 2}, 1.5);
    auto w = make_windows(b, 20, 20);
    CHECK(w.size() == 5);
    for (const auto& win : w) {
        CHECK(win.target[0] == 1.5);
        CHECK(win.target[1] == 1.5);
    }
    CHECK_THROWS_AS(make_windows(b, 101, 1), std::invalid_argument);

    // counting oracle over random triples
    for (int trial = 0; trial < 50; ++trial) {
        int tt = 20 + static_cast<int>(rng.below(300));
        int width = 1 + static_cast<int>(rng.below(tt));
        int stride = 1 + static_cast<int>(rng.below(30));
        SessionBundle s;
        s.session_id = "c";
        s.emitter.features = Tensor::zeros({tt, kEmitterDim});
        s.receiver.features = Tensor::zeros({tt, kReceiverDim});
        s.labels = Tensor::zeros({tt, 2});
        CHECK(static_cast<int>(make_windows(s, width, stride).size()) ==
              (tt - width) / stride + 1);
    }
}
