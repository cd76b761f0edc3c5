#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "cholec/common/errors.hpp"

namespace cholec {

// Throws ConfigError for any object key in `j` that `reference` does not have. Nested objects
// are checked recursively; arrays and scalars are not inspected.
inline void reject_unknown_keys(const nlohmann::json& j, const nlohmann::json& reference,
                                const std::string& where) {
  if (!j.is_object() || !reference.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    const auto it = reference.find(key);
    if (it == reference.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    reject_unknown_keys(value, *it, where + "." + key);
  }
}

}  // namespace cholec
