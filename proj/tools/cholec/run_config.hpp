#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "cholec/env/config.hpp"
#include "cholec/ppo/config.hpp"

namespace cholec::cli {

// Contents of a --config file: {"env": {...}, "ppo": {...}}, both sections optional.
struct RunConfig {
  env::EnvConfig env;
  ppo::PpoConfig ppo;
};

nlohmann::json to_json(const RunConfig& c);

// Applies CHOLEC_ENV_<KEY> and CHOLEC_PPO_<KEY> overrides from `environ` to the matching
// (lower-cased) keys of the env and ppo sections. Values are parsed as JSON when possible and
// taken as strings otherwise. Nested keys use a double underscore:
// CHOLEC_ENV_REWARD_WEIGHTS__SUCCESS. With `known` given, keys missing from it are rejected.
void apply_env_overrides(nlohmann::json& sections, const std::map<std::string, std::string>& environ,
                         const nlohmann::json* known = nullptr);

// Reads the file (empty path: defaults), then applies the environment overrides.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::map<std::string, std::string>& environ);

std::map<std::string, std::string> process_environment();

}  // namespace cholec::cli
