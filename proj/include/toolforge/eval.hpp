#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/param_check.hpp"
#include "toolforge/registry.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

struct EvalCall {
  std::string tool_id;
  json arguments = json::object();

  json to_json() const { return json{{"tool_id", tool_id}, {"arguments", arguments}}; }
  static EvalCall from_json(const json& v) {
    return {v.at("tool_id").get<std::string>(), v.value("arguments", json::object())};
  }
};

struct GoldIcp {
  int step = 0;  // 1-based into the gold call list
  std::string parameter;
  json value;

  json to_json() const {
    return json{{"step", step}, {"parameter", parameter}, {"value", value}};
  }
  static GoldIcp from_json(const json& v) {
    return {v.at("step").get<int>(), v.at("parameter").get<std::string>(), v.at("value")};
  }
};

struct EvalRecord {
  std::string request;
  std::vector<EvalCall> predicted;
  std::vector<EvalCall> gold;
  std::vector<GoldIcp> gold_icps;
  std::string predicted_response;

  json to_json() const {
    json pred = json::array(), gld = json::array(), icps = json::array();
    for (const auto& c : predicted) pred.push_back(c.to_json());
    for (const auto& c : gold) gld.push_back(c.to_json());
    for (const auto& i : gold_icps) icps.push_back(i.to_json());
    return json{{"request", request}, {"predicted", pred}, {"gold", gld},
                {"gold_icps", icps}, {"predicted_response", predicted_response}};
  }
  static EvalRecord from_json(const json& v) {
    EvalRecord record;
    record.request = v.value("request", std::string());
    for (const auto& c : v.value("predicted", json::array()))
      record.predicted.push_back(EvalCall::from_json(c));
    for (const auto& c : v.value("gold", json::array()))
      record.gold.push_back(EvalCall::from_json(c));
    for (const auto& i : v.value("gold_icps", json::array()))
      record.gold_icps.push_back(GoldIcp::from_json(i));
    record.predicted_response = v.value("predicted_response", std::string());
    return record;
  }
};

// precision = |pred cap gold| / |pred|, recall = |pred cap gold| / |gold|.
// pred is a multiset, gold a set; duplicate predictions beyond the first
// count as redundant. Conventions: empty pred gives precision 0 unless gold
// is also empty (then 1); empty gold gives recall 1.
inline std::pair<double, double> precision_recall_tool(
    const std::vector<std::string>& predicted, const std::set<std::string>& gold) {
  std::map<std::string, size_t> pred_counts;
  for (const auto& tool : predicted) ++pred_counts[tool];
  size_t hits = 0;
  for (const auto& tool : gold)
    if (pred_counts.count(tool)) ++hits;

  double precision;
  if (predicted.empty())
    precision = gold.empty() ? 1.0 : 0.0;
  else
    precision = static_cast<double>(hits) / static_cast<double>(predicted.size());
  double recall = gold.empty()
                      ? 1.0
                      : static_cast<double>(hits) / static_cast<double>(gold.size());
  return {precision, recall};
}

// Exact matching with lowercase + all whitespace removed.
inline bool icp_values_match(const json& predicted, const json& gold) {
  return normalize_for_match(value_to_text(predicted)) ==
         normalize_for_match(value_to_text(gold));
}

// Predicted value for a gold ICP: the first predicted call of the same tool
// that carries the parameter.
inline std::optional<json> predicted_icp_value(const EvalRecord& record,
                                               const GoldIcp& icp) {
  if (icp.step < 1 || icp.step > static_cast<int>(record.gold.size())) return std::nullopt;
  const std::string& tool = record.gold[static_cast<size_t>(icp.step - 1)].tool_id;
  for (const auto& call : record.predicted) {
    if (call.tool_id != tool) continue;
    if (call.arguments.contains(icp.parameter))
      return std::optional<json>(call.arguments.at(icp.parameter));
  }
  return std::nullopt;
}

struct IcpTally {
  size_t matched = 0;
  size_t considered = 0;  // gold ICPs on correctly-selected tools
};

// Denominator restricted to gold ICPs whose tool was correctly selected.
inline IcpTally tally_icp(const EvalRecord& record) {
  std::set<std::string> predicted_tools;
  for (const auto& call : record.predicted) predicted_tools.insert(call.tool_id);

  IcpTally tally;
  for (const auto& icp : record.gold_icps) {
    if (icp.step < 1 || icp.step > static_cast<int>(record.gold.size())) continue;
    const std::string& tool = record.gold[static_cast<size_t>(icp.step - 1)].tool_id;
    if (!predicted_tools.count(tool)) continue;  // wrong selection: excluded
    ++tally.considered;
    auto predicted = predicted_icp_value(record, icp);
    if (predicted && icp_values_match(*predicted, icp.value)) ++tally.matched;
  }
  return tally;
}

inline bool calling_valid(const EvalRecord& record, const ToolRegistry& registry) {
  for (const auto& call : record.predicted) {
    const ToolSpec* spec = registry.find_tool(call.tool_id);
    if (!spec) return false;
    if (!check_arguments(*spec, call.arguments).empty()) return false;
  }
  return true;
}

// Mechanical task completion on synthetic-native data: full tool recall and
// every predicted call schema-valid.
inline bool task_completed(const EvalRecord& record, const ToolRegistry& registry) {
  std::vector<std::string> predicted;
  std::set<std::string> gold;
  for (const auto& call : record.predicted) predicted.push_back(call.tool_id);
  for (const auto& call : record.gold) gold.insert(call.tool_id);
  auto [precision, recall] = precision_recall_tool(predicted, gold);
  return recall == 1.0 && calling_valid(record, registry);
}

// Intent alignment: completed task, perfect tool precision and recall, and
// every gold ICP on its tools exact-matching.
inline bool intent_aligned(const EvalRecord& record, const ToolRegistry& registry) {
  std::vector<std::string> predicted;
  std::set<std::string> gold;
  for (const auto& call : record.predicted) predicted.push_back(call.tool_id);
  for (const auto& call : record.gold) gold.insert(call.tool_id);
  auto [precision, recall] = precision_recall_tool(predicted, gold);
  if (!(task_completed(record, registry) && precision == 1.0 && recall == 1.0))
    return false;
  for (const auto& icp : record.gold_icps) {
    auto value = predicted_icp_value(record, icp);
    if (!value || !icp_values_match(*value, icp.value)) return false;
  }
  return true;
}

// Proportion of non-redundant predicted calls: multiset matching of canonical
// call serializations against the gold trajectory. Empty prediction scores 1.
inline double call_conciseness(const std::vector<EvalCall>& predicted,
                               const std::vector<EvalCall>& gold) {
  if (predicted.empty()) return 1.0;
  std::map<std::string, size_t> gold_counts;
  for (const auto& call : gold) ++gold_counts[canonical_dump(call.to_json())];
  size_t matched = 0;
  for (const auto& call : predicted) {
    auto key = canonical_dump(call.to_json());
    auto it = gold_counts.find(key);
    if (it != gold_counts.end() && it->second > 0) {
      ++matched;
      --it->second;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(predicted.size());
}

struct MetricsReport {
  double acc_task = 0, acc_calling = 0;
  double precision_tool = 0, recall_tool = 0;
  double acc_icp = 0, acc_intent = 0;
  double conciseness = 0;
  std::map<std::string, size_t> denominators;
  std::map<std::string, double> quality_dimensions;  // normalized [0,1]

  json to_json() const {
    return json{{"acc_task", acc_task},
                {"acc_calling", acc_calling},
                {"precision_tool", precision_tool},
                {"recall_tool", recall_tool},
                {"acc_icp", acc_icp},
                {"acc_intent", acc_intent},
                {"call_conciseness", conciseness},
                {"denominators", denominators},
                {"quality_dimensions", quality_dimensions}};
  }
};

inline MetricsReport compute_metrics(const std::vector<EvalRecord>& records,
                                     const ToolRegistry& registry) {
  MetricsReport report;
  size_t n = records.size();
  report.denominators["records"] = n;
  if (n == 0) {
    report.denominators["icp"] = 0;
    return report;
  }

  size_t completed = 0, valid = 0, aligned = 0;
  double precision_sum = 0, recall_sum = 0, conciseness_sum = 0;
  IcpTally icp_total;
  for (const auto& record : records) {
    std::vector<std::string> predicted;
    std::set<std::string> gold;
    for (const auto& call : record.predicted) predicted.push_back(call.tool_id);
    for (const auto& call : record.gold) gold.insert(call.tool_id);
    auto [precision, recall] = precision_recall_tool(predicted, gold);
    precision_sum += precision;
    recall_sum += recall;
    conciseness_sum += call_conciseness(record.predicted, record.gold);
    if (task_completed(record, registry)) ++completed;
    if (calling_valid(record, registry)) ++valid;
    if (intent_aligned(record, registry)) ++aligned;
    auto tally = tally_icp(record);
    icp_total.matched += tally.matched;
    icp_total.considered += tally.considered;
  }

  report.acc_task = static_cast<double>(completed) / static_cast<double>(n);
  report.acc_calling = static_cast<double>(valid) / static_cast<double>(n);
  report.precision_tool = precision_sum / static_cast<double>(n);
  report.recall_tool = recall_sum / static_cast<double>(n);
  report.acc_intent = static_cast<double>(aligned) / static_cast<double>(n);
  report.conciseness = conciseness_sum / static_cast<double>(n);
  report.denominators["icp"] = icp_total.considered;
  report.acc_icp = icp_total.considered == 0
                       ? 0.0
                       : static_cast<double>(icp_total.matched) /
                             static_cast<double>(icp_total.considered);
  return report;
}

constexpr std::array<const char*, 7> kJudgedDimensions = {
    "Naturalness",     "ToolRelevance", "ChainCoherence",    "NameValidity",
    "ValueValidity",   "ValueConsistency", "ResponseCorrectness"};

// Mechanical schema conformance in [0,1] used to cap judged Name/Value
// Validity scores.
inline double mechanical_validity(const EvalRecord& record, const ToolRegistry& registry,
                                  bool names_only) {
  size_t checks = 0, passes = 0;
  for (const auto& call : record.predicted) {
    const ToolSpec* spec = registry.find_tool(call.tool_id);
    for (const auto& [name, value] : call.arguments.items()) {
      ++checks;
      if (!spec) continue;
      const ParameterSpec* param = spec->find_parameter(name);
      if (!param) continue;  // unknown name fails both checks
      if (names_only) {
        ++passes;
        continue;
      }
      json single = json{{name, value}};
      // isolate this parameter's type/range/enum checks
      ToolSpec narrowed;
      narrowed.tool_id = spec->tool_id;
      narrowed.parameters.push_back(*param);
      if (check_arguments(narrowed, single).empty()) ++passes;
    }
  }
  if (checks == 0) return 1.0;
  return static_cast<double>(passes) / static_cast<double>(checks);
}

// 5-point Likert from the judge, normalized to [0,1]. Name/Value Validity
// are capped by the mechanical schema check.
inline std::optional<double> judge_dimension(const std::string& dimension,
                                             const EvalRecord& record, LlmGateway& gateway,
                                             const ToolRegistry& registry) {
  bool known = false;
  for (const char* name : kJudgedDimensions)
    if (dimension == name) known = true;
  if (!known) throw InvalidArgumentError("unknown quality dimension: " + dimension);

  ChatRequest chat;
  chat.template_name = "likert_judge";
  chat.variables = {{"dimension", dimension},
                    {"record", canonical_dump(record.to_json())}};
  int score = 0;
  bool parsed = false;
  for (int attempt = 0; attempt <= 2 && !parsed; ++attempt) {
    ChatRequest attempt_chat = chat;
    if (attempt > 0) attempt_chat.variables["_reprompt"] = "reply with one integer 1-5";
    std::string text = trim(gateway.complete(attempt_chat).text);
    std::string head = trim(text.substr(0, text.find('\n')));
    if (head.size() == 1 && head[0] >= '1' && head[0] <= '5') {
      score = head[0] - '0';
      parsed = true;
    }
  }
  if (!parsed) return std::nullopt;  // record skipped and counted by the caller

  double normalized = (static_cast<double>(score) - 1.0) / 4.0;
  if (dimension == "NameValidity")
    normalized = std::min(normalized, mechanical_validity(record, registry, true));
  else if (dimension == "ValueValidity")
    normalized = std::min(normalized, mechanical_validity(record, registry, false));
  return normalized;
}

}  // namespace toolforge
