#pragma once

#include <filesystem>
#include <string>

#include "phasor/model.hpp"
#include "phasor/train.hpp"

namespace phasor {

// Flat key = value config covering every ModelConfig and training-state
// field. '#' starts a comment; unknown keys are rejected by name.
// d_head may be omitted when d_model divides evenly by n_heads.
struct RunConfig {
  ModelConfig model;
  TrainHyper train;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

}  // namespace phasor
