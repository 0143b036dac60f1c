#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "listenlab/model.hpp"

namespace listenlab {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// A checkpoint is a directory: checkpoint.json (config + parameter names and
// shapes) plus one .mtns tensor file per parameter. source_manifest, when
// given, records which manifest the checkpoint was trained from so tools can
// resolve clip ids later.
void save_checkpoint(const std::string& dir, ModelParams<float>& params,
                     const std::string& source_manifest = "");
ModelParams<float> load_checkpoint(const std::string& dir);

// The recorded training manifest path, or "" when absent.
std::string checkpoint_source_manifest(const std::string& dir);

}  // namespace listenlab
