#pragma once

#include <map>
#include <string>

#include "sgta/model.hpp"
#include "sgta/train.hpp"

namespace sgta {

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& json_text);

/// Checkpoint: JSON with a mandatory version field, the full config and
/// every tensor under its registration name.
void save_checkpoint(const std::string& path, SgtaModel& model);
SgtaModel load_checkpoint(const std::string& path);

/// Flat key=value config file. '#' starts a comment; blank lines ignored;
/// unknown keys are an error.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Apply string key/values onto the model and training configs. Returns
/// the list of recognized keys; throws ConfigError on unknown keys or
/// unparsable values.
void apply_config(const std::map<std::string, std::string>& kv,
                  ModelConfig& mcfg, TrainConfig& tcfg);

}  // namespace sgta
