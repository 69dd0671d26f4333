#pragma once

#include "toolforge/common.hpp"
#include "toolforge/registry.hpp"

#include <regex>
#include <string>
#include <vector>

namespace toolforge {

// Schema-level argument validation against a ToolSpec. Returns a list of
// violation messages; empty means the arguments conform.
inline std::vector<std::string> check_arguments(const ToolSpec& spec,
                                                const json& arguments) {
  std::vector<std::string> problems;
  if (!arguments.is_object()) {
    problems.push_back("arguments must be an object");
    return problems;
  }

  for (const auto& param : spec.parameters) {
    if (!arguments.contains(param.name)) {
      if (param.required)
        problems.push_back("missing required parameter: " + param.name);
      continue;
    }
    const json& value = arguments[param.name];
    bool type_ok = true;
    switch (param.kind) {
      case ParamKind::String: type_ok = value.is_string(); break;
      case ParamKind::Integer: type_ok = value.is_number_integer(); break;
      case ParamKind::Number: type_ok = value.is_number(); break;
      case ParamKind::Boolean: type_ok = value.is_boolean(); break;
      case ParamKind::Array: type_ok = value.is_array(); break;
      case ParamKind::Object: type_ok = value.is_object(); break;
      case ParamKind::Union: type_ok = true; break;
    }
    if (!type_ok) {
      problems.push_back("parameter " + param.name + ": expected " +
                         to_string(param.kind));
      continue;
    }
    if (value.is_number()) {
      double number = value.get<double>();
      if (param.min_value && number < *param.min_value)
        problems.push_back("parameter " + param.name + ": below minimum");
      if (param.max_value && number > *param.max_value)
        problems.push_back("parameter " + param.name + ": above maximum");
    }
    if (param.pattern && value.is_string()) {
      std::regex re(*param.pattern);
      if (!std::regex_search(value.get<std::string>(), re))
        problems.push_back("parameter " + param.name + ": pattern mismatch");
    }
    if (!param.enum_values.empty()) {
      bool found = false;
      for (const auto& allowed : param.enum_values)
        if (allowed == value) { found = true; break; }
      if (!found)
        problems.push_back("parameter " + param.name + ": value not in enum");
    }
  }

  for (auto it = arguments.begin(); it != arguments.end(); ++it)
    if (!spec.find_parameter(it.key()))
      problems.push_back("unknown parameter: " + it.key());

  return problems;
}

}  // namespace toolforge
