#pragma once

#include <string>

#include <json.hpp>

#include "dro/orchestrator.hpp"

namespace dro {

/// Invalid configuration document; the message names the offending key path.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// Missing keys keep their defaults; unknown keys and wrongly typed values
/// throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

/// Every configurable value, in the layout parse_run_config accepts.
nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace dro
