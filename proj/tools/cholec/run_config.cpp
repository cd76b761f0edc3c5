#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "cholec/common/errors.hpp"

extern char** environ;

namespace cholec::cli {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

nlohmann::json parse_value(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return text;
  }
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  return {{"env", env::to_json(c.env)}, {"ppo", ppo::to_json(c.ppo)}};
}

void apply_env_overrides(nlohmann::json& sections, const std::map<std::string, std::string>& vars,
                         const nlohmann::json* known) {
  for (const auto& [name, value] : vars) {
    std::string section;
    std::string rest;
    for (const char* s : {"env", "ppo"}) {
      const std::string prefix = "CHOLEC_" + std::string(s == std::string("env") ? "ENV_" : "PPO_");
      if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size()) {
        section = s;
        rest = name.substr(prefix.size());
      }
    }
    if (section.empty()) continue;
    nlohmann::json* node = &sections[section];
    const nlohmann::json* reference = known ? &known->at(section) : nullptr;
    std::size_t start = 0;
    for (;;) {
      const auto sep = rest.find("__", start);
      const std::string key = lower(rest.substr(start, sep == std::string::npos ? sep : sep - start));
      if (reference) {
        if (!reference->is_object() || !reference->contains(key)) {
          throw ConfigError(name + " does not name a " + section + " config key");
        }
        reference = &reference->at(key);
      }
      if (sep == std::string::npos) {
        (*node)[key] = parse_value(value);
        break;
      }
      node = &(*node)[key];
      start = sep + 2;
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::map<std::string, std::string>& vars) {
  nlohmann::json sections = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    try {
      sections = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!sections.is_object()) throw ConfigError("config file " + path.string() + " must hold an object");
    for (const auto& [key, _] : sections.items()) {
      if (key != "env" && key != "ppo") {
        throw ConfigError("config file " + path.string() + ": unknown section '" + key +
                          "' (expected env, ppo)");
      }
    }
  }
  const nlohmann::json known = to_json(RunConfig{});
  apply_env_overrides(sections, vars, &known);
  RunConfig c;
  if (sections.contains("env")) c.env = env::env_config_from_json(sections["env"]);
  if (sections.contains("ppo")) c.ppo = ppo::ppo_config_from_json(sections["ppo"]);
  c.env.validate();
  c.ppo.validate();
  return c;
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> vars;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos && entry.rfind("CHOLEC_", 0) == 0) {
      vars[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
  }
  return vars;
}

}  // namespace cholec::cli
