#pragma once

// Internal JSON helpers shared by io.cpp and experiments.cpp.  Not installed.

#include <string>
#include <vector>

#include <json.hpp>

#include "fairsim/common.hpp"
#include "fairsim/model.hpp"
#include "fairsim/scm.hpp"

namespace fairsim::io {

using ordered_json = nlohmann::ordered_json;

void require_keys(const ordered_json& object, const std::vector<std::string>& allowed,
                  const std::string& where);
ordered_json parse_json(const std::string& text, const std::string& where);

template <typename T>
T get_field(const ordered_json& object, const std::string& key, const std::string& where) {
  if (!object.contains(key)) throw InputError(where + ": missing key '" + key + "'");
  try {
    return object.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T get_field_or(const ordered_json& object, const std::string& key, const std::string& where,
               T fallback) {
  if (!object.contains(key)) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(where + ": bad value for '" + key + "': " + e.what());
  }
}

ordered_json scm_config_to_json(const scm::ScmConfig& config);
scm::ScmConfig scm_config_from_json(const ordered_json& doc);
ordered_json model_spec_to_json(const model::ModelSpec& spec);
model::ModelSpec model_spec_from_json(const ordered_json& doc);
ordered_json frl_penalty_to_json(const model::FrlPenaltySpec& penalty);
model::FrlPenaltySpec frl_penalty_from_json(const ordered_json& doc);

}  // namespace fairsim::io
