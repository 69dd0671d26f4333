#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/primitive.hpp"
#include "toolforge/registry.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

enum class Pattern { Sequential, Parallel, Conditional };

inline std::string to_string(Pattern pattern) {
  switch (pattern) {
    case Pattern::Sequential: return "sequential";
    case Pattern::Parallel: return "parallel";
    case Pattern::Conditional: return "conditional";
  }
  return "sequential";
}

inline Pattern pattern_from_string(const std::string& text) {
  if (text == "sequential") return Pattern::Sequential;
  if (text == "parallel") return Pattern::Parallel;
  if (text == "conditional") return Pattern::Conditional;
  throw ParseError("unknown pattern: " + text);
}

struct TrajectoryStep {
  int index = 0;  // 1-based, contiguous
  std::string primitive_id;
  json overrides = json::object();  // argument overrides on top of the primitive

  json to_json() const {
    return json{{"index", index}, {"primitive_id", primitive_id}, {"overrides", overrides}};
  }
  static TrajectoryStep from_json(const json& value) {
    return {value.at("index").get<int>(), value.at("primitive_id").get<std::string>(),
            value.value("overrides", json::object())};
  }
};

struct FlowEdge {
  int producer_step = 0;
  std::string payload_path;  // $.field.sub[0] into the producer's payload
  int consumer_step = 0;
  std::string parameter;

  json to_json() const {
    return json{{"producer_step", producer_step}, {"payload_path", payload_path},
                {"consumer_step", consumer_step}, {"parameter", parameter}};
  }
  static FlowEdge from_json(const json& value) {
    return {value.at("producer_step").get<int>(),
            value.at("payload_path").get<std::string>(),
            value.at("consumer_step").get<int>(),
            value.at("parameter").get<std::string>()};
  }
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Pattern pattern = Pattern::Sequential;
  std::vector<FlowEdge> data_flow;
  // Parallel only: partition of step indices into independent branches.
  std::vector<std::vector<int>> branches;

  // Parameter names of `step` fed by some data_flow edge.
  std::set<std::string> fed_parameters(int step) const {
    std::set<std::string> fed;
    for (const auto& edge : data_flow)
      if (edge.consumer_step == step) fed.insert(edge.parameter);
    return fed;
  }

  json to_json() const {
    json step_list = json::array();
    for (const auto& s : steps) step_list.push_back(s.to_json());
    json edge_list = json::array();
    for (const auto& e : data_flow) edge_list.push_back(e.to_json());
    json out{{"steps", step_list}, {"pattern", to_string(pattern)}, {"data_flow", edge_list}};
    if (!branches.empty()) out["branches"] = branches;
    return out;
  }

  static Trajectory from_json(const json& value) {
    Trajectory t;
    for (const auto& s : value.value("steps", json::array()))
      t.steps.push_back(TrajectoryStep::from_json(s));
    t.pattern = pattern_from_string(value.value("pattern", std::string("sequential")));
    for (const auto& e : value.value("data_flow", json::array()))
      t.data_flow.push_back(FlowEdge::from_json(e));
    if (value.contains("branches"))
      t.branches = value["branches"].get<std::vector<std::vector<int>>>();
    return t;
  }
};

// Effective arguments of a step = primitive arguments + overrides.
inline json effective_arguments(const Trajectory& trajectory, int step_index,
                                const PrimitiveStore& store) {
  const auto& step = trajectory.steps.at(static_cast<size_t>(step_index - 1));
  json args = store.get(step.primitive_id).arguments;
  for (const auto& [key, value] : step.overrides.items()) args[key] = value;
  return args;
}

inline std::vector<std::string> verify_primitive_ids(const Trajectory& trajectory,
                                                     const PrimitiveStore& store) {
  std::vector<std::string> unknown;
  for (const auto& step : trajectory.steps)
    if (!store.contains(step.primitive_id)) unknown.push_back(step.primitive_id);
  return unknown;
}

// Structural invariants shared by all patterns plus per-pattern rules.
inline std::vector<std::string> validate_structure(const Trajectory& trajectory,
                                                   const PrimitiveStore& store,
                                                   const ToolRegistry& registry) {
  std::vector<std::string> problems;
  for (size_t i = 0; i < trajectory.steps.size(); ++i)
    if (trajectory.steps[i].index != static_cast<int>(i) + 1)
      problems.push_back("step indices not contiguous from 1");

  const int n = static_cast<int>(trajectory.steps.size());
  for (const auto& edge : trajectory.data_flow) {
    if (edge.producer_step < 1 || edge.producer_step > n ||
        edge.consumer_step < 1 || edge.consumer_step > n) {
      problems.push_back("data_flow edge references a missing step");
      continue;
    }
    if (edge.consumer_step <= edge.producer_step)
      problems.push_back("data_flow edge not forward: " +
                         std::to_string(edge.producer_step) + " -> " +
                         std::to_string(edge.consumer_step));
    const auto& consumer = trajectory.steps[static_cast<size_t>(edge.consumer_step - 1)];
    if (store.contains(consumer.primitive_id)) {
      const auto& primitive = store.get(consumer.primitive_id);
      const ToolSpec* spec = registry.find_tool(primitive.tool_id);
      if (spec && !spec->find_parameter(edge.parameter))
        problems.push_back("data_flow targets unknown parameter " + edge.parameter);
    }
  }

  if (trajectory.pattern == Pattern::Conditional && trajectory.data_flow.empty())
    problems.push_back("conditional trajectory requires at least one data_flow edge");

  if (trajectory.pattern == Pattern::Parallel) {
    if (trajectory.branches.empty())
      problems.push_back("parallel trajectory requires a branch partition");
    std::vector<int> branch_of(static_cast<size_t>(n) + 1, -1);
    std::set<int> seen;
    for (size_t b = 0; b < trajectory.branches.size(); ++b)
      for (int step : trajectory.branches[b]) {
        if (step < 1 || step > n || !seen.insert(step).second) {
          problems.push_back("branch partition malformed");
          continue;
        }
        branch_of[static_cast<size_t>(step)] = static_cast<int>(b);
      }
    if (static_cast<int>(seen.size()) != n)
      problems.push_back("branch partition does not cover all steps");
    for (const auto& edge : trajectory.data_flow)
      if (edge.producer_step >= 1 && edge.producer_step <= n &&
          edge.consumer_step >= 1 && edge.consumer_step <= n &&
          branch_of[static_cast<size_t>(edge.producer_step)] !=
              branch_of[static_cast<size_t>(edge.consumer_step)])
        problems.push_back("data_flow edge crosses parallel branches");
  }

  return problems;
}

// LLM-guided composition, then structural validation and the primitive-ID
// check before anything is returned.
inline Trajectory compose(const std::vector<ToolPrimitive>& pool, Pattern pattern,
                          int length, LlmGateway& gateway, const PrimitiveStore& store,
                          const ToolRegistry& registry) {
  if (pool.empty()) throw InvalidArgumentError("primitive pool is empty");
  if (length < 1) throw InvalidArgumentError("trajectory length must be >= 1");
  if (pattern == Pattern::Conditional && length < 2)
    throw InvalidArgumentError("conditional pattern needs length >= 2");

  json pool_json = json::array();
  for (const auto& p : pool)
    pool_json.push_back(json{{"primitive_id", p.primitive_id},
                             {"tool_id", p.tool_id},
                             {"instruction", p.instruction},
                             {"arguments", p.arguments},
                             {"result_digest", p.result_digest}});

  ChatRequest request;
  request.template_name = "compose_trajectory";
  request.variables = {
      {"pattern", to_string(pattern)},
      {"length", std::to_string(length)},
      {"primitives", canonical_dump(pool_json)},
  };

  std::string failure;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (!failure.empty()) request.variables["_reprompt"] = failure;
    json raw = gateway.complete_json(request);
    Trajectory trajectory;
    try {
      trajectory = Trajectory::from_json(raw);
    } catch (const std::exception& e) {
      failure = std::string("trajectory did not parse: ") + e.what();
      continue;
    }
    trajectory.pattern = pattern;
    auto unknown = verify_primitive_ids(trajectory, store);
    if (!unknown.empty()) {
      failure = "unknown primitive ids: " + unknown.front();
      continue;
    }
    auto problems = validate_structure(trajectory, store, registry);
    if (!problems.empty()) {
      failure = problems.front();
      continue;
    }
    // Wire intermediate results: a fed parameter takes the concrete value
    // addressed by its edge, recorded as an override.
    for (const auto& edge : trajectory.data_flow) {
      const auto& producer = trajectory.steps[static_cast<size_t>(edge.producer_step - 1)];
      json produced = eval_json_path(store.get(producer.primitive_id).result_digest,
                                     edge.payload_path);
      if (!produced.is_null())
        trajectory.steps[static_cast<size_t>(edge.consumer_step - 1)]
            .overrides[edge.parameter] = produced;
    }
    return trajectory;
  }
  throw StageError("trajectory composition failed structural validation: " + failure);
}

}  // namespace toolforge
