#pragma once

#include <filesystem>

#include "dyad/trainer.hpp"

namespace dyad {

// Checkpoint file: u64 header length, JSON header (format version, model
// config, parameter shape table, normalization stats), then all parameter
// tensors as contiguous 64-bit floats in registry order.
struct Checkpoint {
    ModelConfig model;
    ParamSet params;
    DataStats stats;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& model,
                     const ParamSet& params, const DataStats& stats);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dyad
