#pragma once

#include <cstdint>

#include "dyad/session.hpp"

namespace dyad {

// Synthetic dyadic-session generator. Labels are stepwise-constant random
// walks; receiver features are linear mixtures of the (lagged) labels at
// weight `relatedness`, emitter features at the deliberately weaker weight
// 0.3 * relatedness, both plus noise. Same config -> bit-identical output.
struct GenConfig {
    std::uint64_t seed = 7;
    int num_sessions = 8;
    int timeline_length = 2000;
    double label_step_prob = 0.05;
    double label_step_scale = 1.0;
    double relatedness = 0.8;  // rho in [0, 1]
    int receiver_lag = 2;
    double noise_std = 0.1;

    void validate() const;
};

SessionBundle generate_session(const GenConfig& cfg, int index);

}  // namespace dyad
