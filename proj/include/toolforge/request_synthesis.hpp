#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/trajectory.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

struct KeyElement {
  int index = 0;
  std::string sub_intention;
  std::string key_value;
  int mapped_step = 0;

  json to_json() const {
    return json{{"index", index}, {"sub_intention", sub_intention},
                {"key_value", key_value}, {"mapped_step", mapped_step}};
  }
  static KeyElement from_json(const json& value) {
    return {value.at("index").get<int>(), value.at("sub_intention").get<std::string>(),
            value.at("key_value").get<std::string>(), value.at("mapped_step").get<int>()};
  }
};

struct UserRequest {
  std::string text;
  std::vector<KeyElement> key_elements;
  std::vector<std::pair<std::string, std::string>> ambiguity_applied;

  json to_json() const {
    json elements = json::array();
    for (const auto& k : key_elements) elements.push_back(k.to_json());
    json replacements = json::array();
    for (const auto& [from, to] : ambiguity_applied)
      replacements.push_back(json{{"original", from}, {"replacement", to}});
    return json{{"text", text}, {"key_elements", elements},
                {"ambiguity_applied", replacements}};
  }
  static UserRequest from_json(const json& value) {
    UserRequest request;
    request.text = value.at("text").get<std::string>();
    for (const auto& k : value.value("key_elements", json::array()))
      request.key_elements.push_back(KeyElement::from_json(k));
    for (const auto& r : value.value("ambiguity_applied", json::array()))
      request.ambiguity_applied.emplace_back(r.at("original").get<std::string>(),
                                             r.at("replacement").get<std::string>());
    return request;
  }
};

enum class Label { Positive, Negative };

struct Sample {
  std::string sample_id;
  UserRequest request;
  Trajectory trajectory;
  Label label = Label::Positive;
  std::string response_note;
  json mutation_meta;  // negatives only

  json to_json() const {
    json out{{"sample_id", sample_id},
             {"request", request.to_json()},
             {"trajectory", trajectory.to_json()},
             {"label", label == Label::Positive ? "positive" : "negative"},
             {"response_note", response_note}};
    if (!mutation_meta.is_null()) out["mutation_meta"] = mutation_meta;
    return out;
  }
  static Sample from_json(const json& value) {
    Sample sample;
    sample.sample_id = value.at("sample_id").get<std::string>();
    sample.request = UserRequest::from_json(value.at("request"));
    sample.trajectory = Trajectory::from_json(value.at("trajectory"));
    sample.label = value.value("label", std::string("positive")) == "negative"
                       ? Label::Negative
                       : Label::Positive;
    sample.response_note = value.value("response_note", std::string());
    sample.mutation_meta = value.value("mutation_meta", json());
    return sample;
  }
};

// Steps that must be triggered by the request text: everything not fully
// explained by incoming data_flow edges.
inline std::set<int> steps_needing_trigger(const Trajectory& trajectory,
                                           const PrimitiveStore& store) {
  std::set<int> needing;
  for (const auto& step : trajectory.steps) {
    json args = effective_arguments(trajectory, step.index, store);
    auto fed = trajectory.fed_parameters(step.index);
    bool has_unfed_argument = false;
    for (const auto& [name, value] : args.items())
      if (!fed.count(name)) { has_unfed_argument = true; break; }
    bool fed_at_all = !fed.empty();
    if (has_unfed_argument || !fed_at_all) needing.insert(step.index);
  }
  return needing;
}

// Machine check of the coverage invariant: every step is mapped by a key
// element or justified by an incoming data_flow edge.
inline std::vector<int> coverage_gaps(const UserRequest& request,
                                      const Trajectory& trajectory) {
  std::set<int> mapped;
  for (const auto& element : request.key_elements) mapped.insert(element.mapped_step);
  std::set<int> fed;
  for (const auto& edge : trajectory.data_flow) fed.insert(edge.consumer_step);
  std::vector<int> gaps;
  for (const auto& step : trajectory.steps)
    if (!mapped.count(step.index) && !fed.count(step.index)) gaps.push_back(step.index);
  return gaps;
}

inline UserRequest synthesize_request(const Trajectory& trajectory, LlmGateway& gateway,
                                      const PrimitiveStore& store) {
  json steps = json::array();
  for (const auto& step : trajectory.steps) {
    const auto& primitive = store.get(step.primitive_id);
    json fed = json::array();
    for (const auto& name : trajectory.fed_parameters(step.index)) fed.push_back(name);
    steps.push_back(json{{"index", step.index},
                         {"tool_id", primitive.tool_id},
                         {"instruction", primitive.instruction},
                         {"arguments", effective_arguments(trajectory, step.index, store)},
                         {"fed_parameters", fed}});
  }

  ChatRequest chat;
  chat.template_name = "request_synth";
  chat.variables = {{"trajectory", canonical_dump(steps)}};

  std::string failure;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (!failure.empty()) chat.variables["_reprompt"] = failure;
    json raw = gateway.complete_json(chat);
    UserRequest request;
    try {
      request = UserRequest::from_json(raw);
    } catch (const std::exception& e) {
      failure = std::string("request did not parse: ") + e.what();
      continue;
    }
    auto gaps = coverage_gaps(request, trajectory);
    if (!gaps.empty()) {
      failure = "steps without a trigger: " + std::to_string(gaps.front());
      continue;
    }
    return request;
  }
  throw StageError("request synthesis left uncovered steps: " + failure);
}

// Fixed, model-free replacement lexicon keyed by rough semantic category.
inline std::string demonstrative_for(const std::string& parameter) {
  std::string name = to_lower(parameter);
  auto contains = [&](const char* needle) {
    return name.find(needle) != std::string::npos;
  };
  if (contains("order")) return "that order";
  if (contains("item") || contains("product")) return "that item";
  if (contains("city") || contains("place") || contains("location")) return "there";
  if (contains("person") || contains("user") || contains("name")) return "them";
  return "that one";
}

// Replaces every key value that duplicates a data_flow-produced intermediate
// with a demonstrative reference. Non-intermediate values are untouched.
inline UserRequest apply_referential_ambiguity(UserRequest request,
                                               const Trajectory& trajectory,
                                               const PrimitiveStore& store) {
  // Collect intermediate value texts addressed by data_flow edges.
  std::map<std::string, std::string> intermediates;  // trimmed value -> parameter
  for (const auto& edge : trajectory.data_flow) {
    const auto& producer = trajectory.steps.at(static_cast<size_t>(edge.producer_step - 1));
    json produced = eval_json_path(store.get(producer.primitive_id).result_digest,
                                   edge.payload_path);
    if (produced.is_null()) continue;
    intermediates[trim(value_to_text(produced))] = edge.parameter;
  }

  for (auto& element : request.key_elements) {
    auto it = intermediates.find(trim(element.key_value));
    if (it == intermediates.end()) continue;
    std::string replacement = demonstrative_for(it->second);
    size_t pos = request.text.find(element.key_value);
    if (pos != std::string::npos)
      request.text.replace(pos, element.key_value.size(), replacement);
    request.ambiguity_applied.emplace_back(element.key_value, replacement);
    element.key_value = replacement;
  }
  return request;
}

struct ConsistencyVerdict {
  bool pass = false;
  std::string rationale;
};

// Judge verdict format: PASS or FAIL on the first line, rationale after.
inline ConsistencyVerdict parse_pass_fail(const std::string& text) {
  size_t newline = text.find('\n');
  std::string head = trim(text.substr(0, newline));
  std::string rest = newline == std::string::npos ? "" : trim(text.substr(newline + 1));
  if (head == "PASS") return {true, rest};
  if (head == "FAIL") return {false, rest};
  throw StageError("judge output is neither PASS nor FAIL: " + head);
}

inline std::optional<Sample> validate_sample(const UserRequest& request,
                                             const Trajectory& trajectory,
                                             LlmGateway& gateway,
                                             const std::string& sample_id,
                                             std::string* rejection = nullptr) {
  ChatRequest chat;
  chat.template_name = "consistency_check";
  chat.variables = {{"request", canonical_dump(request.to_json())},
                    {"trajectory", canonical_dump(trajectory.to_json())}};
  ConsistencyVerdict verdict = parse_pass_fail(gateway.complete(chat).text);
  if (!verdict.pass) {
    if (rejection) *rejection = verdict.rationale;
    return std::nullopt;
  }
  Sample sample;
  sample.sample_id = sample_id;
  sample.request = request;
  sample.trajectory = trajectory;
  sample.label = Label::Positive;
  sample.response_note = verdict.rationale.empty() ? "task completed" : verdict.rationale;
  return sample;
}

}  // namespace toolforge
