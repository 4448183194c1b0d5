#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyad/errors.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

enum class Source { Emitter, Receiver };
enum class Modality { Audio, Eye, Facial, Physio };

std::string to_string(Source s);
std::string to_string(Modality m);
Source source_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);

// Which (source, modality) cells exist in the feature-selection table:
// the emitter contributes audio/eye/facial, the receiver eye/facial/physio.
bool modality_allowed(Source source, Modality modality);

constexpr int kEmitterDim = 412;
constexpr int kReceiverDim = 68;

// One raw per-modality recording before resampling. samples is S x c.
struct RawStream {
    Source source;
    Modality modality;
    std::vector<std::string> channel_names;
    Tensor samples;

    int length() const { return samples.rows(); }
    int channels() const { return samples.cols(); }
    void validate() const;
};

// Features resampled onto the label timeline.
struct AlignedFeatureMatrix {
    Tensor features;  // T x D
    std::map<std::string, int> column_map;

    int timeline_length() const { return features.rows(); }
    int dim() const { return features.cols(); }
};

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

struct SessionBundle {
    std::string session_id;
    AlignedFeatureMatrix emitter;   // T x 412
    AlignedFeatureMatrix receiver;  // T x 68
    Tensor labels;                  // T x 2: competence, warmth
    std::optional<NormStats> emitter_stats;
    std::optional<NormStats> receiver_stats;

    int timeline_length() const { return labels.rows(); }
    void validate() const;
};

// One training example: a fixed-width slice of a session plus the
// window-mean label target.
struct TrainingWindow {
    Tensor emitter;   // W x 412
    Tensor receiver;  // W x 68
    std::array<double, 2> target;  // competence, warmth
};

}  // namespace dyad
