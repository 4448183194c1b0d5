#pragma once

#include <vector>

#include "dyad/session.hpp"

namespace dyad {

// Anti-aliased decimation: linear-phase FIR low-pass (31 taps, cutoff
// 0.8x the output Nyquist, reflect padding), then keep every factor-th
// sample. factor 1 applies the filter only.
RawStream decimate(const RawStream& stream, int factor);

// Spectral resampler: a window of width ceil(S/target_len) advances by the
// fractional step S/target_len; per window, spectral content above the
// output Nyquist is discarded (for this window width that leaves the DC
// bin) and the reconstruction is sampled once. Doubles as a denoiser.
RawStream fft_downsample(const RawStream& stream, int target_len);

// Resample every stream onto the label timeline: integer decimation when
// S is an exact multiple of T, otherwise decimate to near T followed by
// fft_downsample to exactly T. Column names are prefixed with the
// modality so ablations can address them later.
AlignedFeatureMatrix align_to_labels(const std::vector<RawStream>& streams,
                                     int label_count);

// Column-wise concatenation of aligned matrices from one source.
AlignedFeatureMatrix concat_features(const std::vector<AlignedFeatureMatrix>& matrices);

// Per-column z-score. When stats are passed they must come from the
// training split; otherwise stats are computed from the bundle itself.
// Zero-variance columns map to zero.
SessionBundle normalize(const SessionBundle& bundle,
                        const std::optional<NormStats>& emitter_stats = std::nullopt,
                        const std::optional<NormStats>& receiver_stats = std::nullopt);

NormStats column_stats(const Tensor& matrix);
void apply_stats(Tensor& matrix, const NormStats& stats);

// Slice a session into fixed-width windows with the given stride; the
// target is the mean label over the window.
std::vector<TrainingWindow> make_windows(const SessionBundle& bundle, int width,
                                         int stride);

}  // namespace dyad
