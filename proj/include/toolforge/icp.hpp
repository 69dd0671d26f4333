#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/request_synthesis.hpp"
#include "toolforge/trajectory.hpp"

#include <set>
#include <string>
#include <vector>

namespace toolforge {

struct IcpAssignment {
  int step = 0;
  std::string parameter;
  json value;
  int key_element_index = 0;
  std::string evidence;

  json to_json() const {
    return json{{"step", step}, {"parameter", parameter}, {"value", value},
                {"key_element_index", key_element_index}, {"evidence", evidence}};
  }
  static IcpAssignment from_json(const json& v) {
    return {v.at("step").get<int>(), v.at("parameter").get<std::string>(),
            v.at("value"), v.value("key_element_index", 0),
            v.value("evidence", std::string())};
  }
};

using IctSet = std::set<int>;

// Fast path: verbatim (case-insensitive, trimmed) match of the value against
// the key value implies derivation.
inline bool verbatim_match(const json& value, const std::string& key_value) {
  std::string v = normalize_for_match(trim(value_to_text(value)));
  std::string k = normalize_for_match(trim(key_value));
  if (v.empty()) return false;
  return v == k || k.find(v) != std::string::npos;
}

// Indicator over one (parameter value, key element) pair. Mechanical fast
// paths bracket the judge: data_flow-fed values were pre-screened to 0 by the
// caller; verbatim matches short-circuit to 1; the judge decides the rest.
inline int indicator_icp(const json& value, const KeyElement& element,
                         LlmGateway& gateway) {
  if (verbatim_match(value, element.key_value)) return 1;
  ChatRequest chat;
  chat.template_name = "icp_judge";
  chat.variables = {{"parameter_value", value_to_text(value)},
                    {"sub_intention", element.sub_intention},
                    {"key_value", element.key_value}};
  std::string text = trim(gateway.complete(chat).text);
  std::string head = text.substr(0, text.find('\n'));
  head = trim(head);
  if (head == "1") return 1;
  if (head == "0") return 0;
  throw StageError("icp_judge output is neither 0 nor 1: " + head);
}

// Four-step semantic mapping: constraints come from the request's key
// elements, all trajectory parameter values are enumerated, each value is
// verified against the key elements of its step, and values without direct
// evidence are dropped. Values reachable only through data_flow are never
// ICPs.
inline std::vector<IcpAssignment> identify_icps(const Sample& sample,
                                                LlmGateway& gateway,
                                                const PrimitiveStore& store) {
  if (sample.label != Label::Positive)
    throw InvalidArgumentError("identify_icps requires a positive sample");

  std::vector<IcpAssignment> assignments;
  for (const auto& step : sample.trajectory.steps) {
    json args = effective_arguments(sample.trajectory, step.index, store);
    auto fed = sample.trajectory.fed_parameters(step.index);
    for (const auto& [name, value] : args.items()) {
      if (fed.count(name)) continue;  // internal propagation, pre-screened to 0
      for (const auto& element : sample.request.key_elements) {
        if (element.mapped_step != step.index) continue;
        if (indicator_icp(value, element, gateway) == 1) {
          IcpAssignment assignment;
          assignment.step = step.index;
          assignment.parameter = name;
          assignment.value = value;
          assignment.key_element_index = element.index;
          assignment.evidence = verbatim_match(value, element.key_value)
                                    ? "verbatim match against key value"
                                    : "judge: derived from key value";
          assignments.push_back(std::move(assignment));
          break;
        }
      }
    }
  }
  return assignments;
}

inline IctSet compute_ict(const std::vector<IcpAssignment>& assignments,
                          const Trajectory& trajectory) {
  IctSet ict;
  for (const auto& assignment : assignments)
    for (const auto& step : trajectory.steps)
      if (step.index == assignment.step) ict.insert(step.index);
  return ict;
}

}  // namespace toolforge
