#pragma once

#include <string>

#include "dyad/trainer.hpp"

namespace dyad {

// JSON mirror of TrainConfig (with a nested "model" object). Unknown keys
// are rejected with a ConfigError.
TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig train_config_from_file(const std::string& path);
std::string train_config_to_json_text(const TrainConfig& cfg);

}  // namespace dyad
