#include "dyad/signalprep.hpp"

#include <algorithm>
#include <cmath>

namespace dyad {

namespace {

constexpr int kFirTaps = 31;

// Hamming-windowed sinc low-pass, normalized to unit DC gain.
std::vector<double> lowpass_taps(double cutoff) {
    std::vector<double> h(kFirTaps);
    const double pi = 3.141592653589793238462643383279502884;
    int mid = kFirTaps / 2;
    double s = 0.0;
    for (int n = 0; n < kFirTaps; ++n) {
        double t = n - mid;
        double sinc = (t == 0.0) ? 2.0 * cutoff
                                 : std::sin(2.0 * pi * cutoff * t) / (pi * t);
        double window = 0.54 - 0.46 * std::cos(2.0 * pi * n / (kFirTaps - 1));
        h[n] = sinc * window;
        s += h[n];
    }
    for (auto& v : h) v /= s;
    return h;
}

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
        if (n == 1) return 0;
    }
    return i;
}

}  // namespace

RawStream decimate(const RawStream& stream, int factor) {
    if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
    int s = stream.length(), c = stream.channels();
    if (s < factor) throw std::invalid_argument("decimate: stream shorter than factor");
    // Cutoff at 0.8x the output Nyquist, in cycles per input sample.
    auto taps = lowpass_taps(0.4 / factor);
    int mid = kFirTaps / 2;
    Tensor filtered = Tensor::zeros({s, c});
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < s; ++i) {
            double acc = 0.0;
            for (int n = 0; n < kFirTaps; ++n)
                acc += taps[n] * stream.samples.at(reflect_index(i + n - mid, s), ch);
            filtered.at(i, ch) = acc;
        }
    }
    int out_len = s / factor;
    RawStream out{stream.source, stream.modality, stream.channel_names,
                  Tensor::zeros({out_len, c})};
    for (int k = 0; k < out_len; ++k)
        for (int ch = 0; ch < c; ++ch) out.samples.at(k, ch) = filtered.at(k * factor, ch);
    return out;
}

RawStream fft_downsample(const RawStream& stream, int target_len) {
    int s = stream.length(), c = stream.channels();
    if (target_len < 1) throw std::invalid_argument("fft_downsample: target_len must be >= 1");
    if (target_len > s)
        throw std::invalid_argument("fft_downsample: target_len exceeds stream length");
    double step = static_cast<double>(s) / target_len;
    int width = static_cast<int>(std::ceil(step));
    RawStream out{stream.source, stream.modality, stream.channel_names,
                  Tensor::zeros({target_len, c})};
    for (int k = 0; k < target_len; ++k) {
        int start = static_cast<int>(std::floor(k * step));
        if (start + width > s) start = s - width;
        // Only the DC bin of the window survives the output-Nyquist cut,
        // so the reconstruction collapses to the window mean.
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int n = 0; n < width; ++n) acc += stream.samples.at(start + n, ch);
            out.samples.at(k, ch) = acc / width;
        }
    }
    return out;
}

AlignedFeatureMatrix align_to_labels(const std::vector<RawStream>& streams,
                                     int label_count) {
    if (streams.empty()) throw DataError("align_to_labels: no streams");
    if (label_count < 1) throw std::invalid_argument("align_to_labels: label_count must be >= 1");
    std::vector<AlignedFeatureMatrix> per_stream;
    for (const auto& stream : streams) {
        stream.validate();
        int s = stream.length();
        if (s < label_count)
            throw DataError("align_to_labels: stream " + to_string(stream.modality) +
                            " has " + std::to_string(s) + " samples, fewer than " +
                            std::to_string(label_count) + " labels");
        RawStream aligned = stream;
        if (s != label_count) {
            if (s % label_count == 0) {
                aligned = decimate(stream, s / label_count);
            } else {
                int factor = s / label_count;
                if (factor >= 2) aligned = decimate(stream, factor);
                if (aligned.length() != label_count)
                    aligned = fft_downsample(aligned, label_count);
            }
        }
        AlignedFeatureMatrix m;
        m.features = std::move(aligned.samples);
        std::string prefix = to_string(stream.modality) + ":";
        for (size_t i = 0; i < stream.channel_names.size(); ++i)
            m.column_map[prefix + stream.channel_names[i]] = static_cast<int>(i);
        per_stream.push_back(std::move(m));
    }
    return concat_features(per_stream);
}

AlignedFeatureMatrix concat_features(const std::vector<AlignedFeatureMatrix>& matrices) {
    if (matrices.empty()) throw DataError("concat_features: no matrices");
    int t = matrices[0].timeline_length();
    int total = 0;
    for (const auto& m : matrices) {
        if (m.timeline_length() != t)
            throw DataError("concat_features: timeline mismatch");
        total += m.dim();
    }
    AlignedFeatureMatrix out;
    out.features = Tensor::zeros({t, total});
    int off = 0;
    for (const auto& m : matrices) {
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < m.dim(); ++j) out.features.at(i, off + j) = m.features.at(i, j);
        for (const auto& [name, col] : m.column_map) {
            if (out.column_map.count(name))
                throw DataError("concat_features: duplicate column " + name);
            out.column_map[name] = off + col;
        }
        off += m.dim();
    }
    return out;
}

NormStats column_stats(const Tensor& matrix) {
    int t = matrix.rows(), d = matrix.cols();
    NormStats stats;
    stats.mean.assign(d, 0.0);
    stats.std_dev.assign(d, 0.0);
    for (int j = 0; j < d; ++j) {
        double m = 0.0;
        for (int i = 0; i < t; ++i) m += matrix.at(i, j);
        m /= t;
        double var = 0.0;
        for (int i = 0; i < t; ++i) {
            double dlt = matrix.at(i, j) - m;
            var += dlt * dlt;
        }
        stats.mean[j] = m;
        stats.std_dev[j] = std::sqrt(var / t);
    }
    return stats;
}

void apply_stats(Tensor& matrix, const NormStats& stats) {
    int t = matrix.rows(), d = matrix.cols();
    if (static_cast<int>(stats.mean.size()) != d)
        throw DataError("apply_stats: dimension mismatch");
    for (int j = 0; j < d; ++j) {
        double m = stats.mean[j], sd = stats.std_dev[j];
        for (int i = 0; i < t; ++i)
            matrix.at(i, j) = (sd > 0.0) ? (matrix.at(i, j) - m) / sd : 0.0;
    }
}

SessionBundle normalize(const SessionBundle& bundle,
                        const std::optional<NormStats>& emitter_stats,
                        const std::optional<NormStats>& receiver_stats) {
    SessionBundle out = bundle;
    NormStats es = emitter_stats ? *emitter_stats : column_stats(bundle.emitter.features);
    NormStats rs = receiver_stats ? *receiver_stats : column_stats(bundle.receiver.features);
    apply_stats(out.emitter.features, es);
    apply_stats(out.receiver.features, rs);
    out.emitter_stats = std::move(es);
    out.receiver_stats = std::move(rs);
    return out;
}

std::vector<TrainingWindow> make_windows(const SessionBundle& bundle, int width,
                                         int stride) {
    int t = bundle.timeline_length();
    if (width < 1 || width > t)
        throw std::invalid_argument("make_windows: width must be in [1, T]");
    if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
    int count = (t - width) / stride + 1;
    std::vector<TrainingWindow> windows;
    windows.reserve(count);
    int de = bundle.emitter.dim(), dr = bundle.receiver.dim();
    for (int w = 0; w < count; ++w) {
        int start = w * stride;
        TrainingWindow win;
        win.emitter = Tensor::zeros({width, de});
        win.receiver = Tensor::zeros({width, dr});
        double c = 0.0, wm = 0.0;
        for (int i = 0; i < width; ++i) {
            for (int j = 0; j < de; ++j)
                win.emitter.at(i, j) = bundle.emitter.features.at(start + i, j);
            for (int j = 0; j < dr; ++j)
                win.receiver.at(i, j) = bundle.receiver.features.at(start + i, j);
            c += bundle.labels.at(start + i, 0);
            wm += bundle.labels.at(start + i, 1);
        }
        win.target = {c / width, wm / width};
        windows.push_back(std::move(win));
    }
    return windows;
}

}  // namespace dyad
