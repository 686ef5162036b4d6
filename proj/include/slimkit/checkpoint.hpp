#pragma once

#include <string>

#include <json.hpp>

#include "slimkit/model.hpp"

namespace slimkit {

// Checkpoint format version written by model_to_json.
inline constexpr int kCheckpointVersion = 1;

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);  // ConfigError on bad format

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace slimkit
