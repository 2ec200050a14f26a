#pragma once
#include <string>

#include "json.hpp"
#include "rws/model.hpp"
#include "rws/training.hpp"

namespace rws {

using nlohmann::json;

json train_config_to_json(const TrainConfig& cfg);
// reject_unknown: unknown keys raise ConfigError instead of being ignored.
TrainConfig train_config_from_json(const json& j, bool reject_unknown = true);

json layer_to_json(const Layer& l);
std::unique_ptr<Layer> layer_from_json(const json& j);

// Throws ConfigError if j (an object) holds keys outside `allowed`.
void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& context);

}  // namespace rws
