#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/mcp.hpp"
#include "toolforge/registry.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

enum class Coverage { RequiredOnly, FullyPopulated };

inline std::string to_string(Coverage coverage) {
  return coverage == Coverage::RequiredOnly ? "required_only" : "fully_populated";
}

inline Coverage coverage_from_string(const std::string& text) {
  if (text == "required_only") return Coverage::RequiredOnly;
  if (text == "fully_populated") return Coverage::FullyPopulated;
  throw ParseError("unknown coverage mode: " + text);
}

// One concrete, executability-verified tool call.
struct ToolPrimitive {
  std::string primitive_id;
  std::string tool_id;
  std::string instruction;
  json arguments = json::object();
  Coverage coverage = Coverage::RequiredOnly;
  ValidityVerdict verdict{Verdict::InvalidParams, "unvalidated"};
  json result_digest;  // first 1 KiB of the canonical payload, parsed back

  json to_json() const {
    return json{{"primitive_id", primitive_id},
                {"tool_id", tool_id},
                {"instruction", instruction},
                {"arguments", arguments},
                {"coverage", to_string(coverage)},
                {"verdict", to_string(verdict.variant)},
                {"verdict_detail", verdict.detail},
                {"result_digest", result_digest}};
  }

  static ToolPrimitive from_json(const json& value) {
    ToolPrimitive p;
    p.primitive_id = value.at("primitive_id").get<std::string>();
    p.tool_id = value.at("tool_id").get<std::string>();
    p.instruction = value.value("instruction", std::string());
    p.arguments = value.value("arguments", json::object());
    p.coverage = coverage_from_string(value.value("coverage", std::string("required_only")));
    p.verdict.variant = verdict_from_string(value.value("verdict", std::string("Valid")));
    p.verdict.detail = value.value("verdict_detail", std::string());
    p.result_digest = value.value("result_digest", json());
    return p;
  }
};

// Append-only store; only Valid primitives may be admitted.
class PrimitiveStore {
 public:
  void admit(ToolPrimitive primitive) {
    if (!primitive.verdict.valid())
      throw IntegrityError("only Valid primitives may enter the store: " +
                           primitive.primitive_id);
    if (!ids_.insert(primitive.primitive_id).second)
      throw IntegrityError("duplicate primitive_id: " + primitive.primitive_id);
    primitives_.push_back(std::move(primitive));
  }

  bool contains(const std::string& primitive_id) const {
    return ids_.count(primitive_id) > 0;
  }

  const ToolPrimitive& get(const std::string& primitive_id) const {
    for (const auto& p : primitives_)
      if (p.primitive_id == primitive_id) return p;
    throw InvalidArgumentError("unknown primitive_id: " + primitive_id);
  }

  const std::vector<ToolPrimitive>& all() const { return primitives_; }
  size_t size() const { return primitives_.size(); }

  void save(const std::string& path) const {
    std::vector<json> records;
    for (const auto& p : primitives_) records.push_back(p.to_json());
    write_jsonl(path, records);
  }

  static PrimitiveStore load(const std::string& path) {
    PrimitiveStore store;
    for (const auto& record : read_jsonl(path))
      store.admit(ToolPrimitive::from_json(record));
    return store;
  }

 private:
  std::vector<ToolPrimitive> primitives_;
  std::set<std::string> ids_;
};

inline std::string make_primitive_id(const std::string& tool_id, const json& arguments,
                                     const std::string& instruction) {
  return "prim_" + hex64(fnv1a64(tool_id + "\x1f" + canonical_dump(arguments) +
                                 "\x1f" + instruction));
}

// LLM-generated candidates under an explicit coverage mode. Candidates are
// schema-checked later by validation; here we only shape and dedup them.
inline std::vector<ToolPrimitive> generate_candidates(const ToolSpec& spec,
                                                      Coverage coverage, int n,
                                                      LlmGateway& gateway) {
  if (n < 1) throw InvalidArgumentError("candidate count must be >= 1");
  ChatRequest request;
  request.template_name = "primitive_gen";
  request.variables = {
      {"tool_spec", canonical_dump(spec.to_json())},
      {"coverage", to_string(coverage)},
      {"count", std::to_string(n)},
  };
  json generated = gateway.complete_json(request);
  if (!generated.is_array())
    throw StageError("primitive_gen output is not an array for tool " + spec.tool_id);

  std::vector<ToolPrimitive> candidates;
  std::set<std::string> seen;  // collapse duplicate (tool, arguments)
  for (const auto& item : generated) {
    ToolPrimitive candidate;
    candidate.tool_id = spec.tool_id;
    candidate.instruction = item.value("instruction", "call " + spec.name);
    candidate.arguments = item.value("arguments", json::object());
    candidate.coverage = coverage;
    candidate.primitive_id =
        make_primitive_id(candidate.tool_id, candidate.arguments, candidate.instruction);
    if (!seen.insert(canonical_dump(candidate.arguments)).second) continue;
    candidates.push_back(std::move(candidate));
    if (static_cast<int>(candidates.size()) >= n) break;
  }
  return candidates;
}

inline json digest_payload(const json& payload, size_t limit = 1024) {
  std::string text = canonical_dump(payload);
  if (text.size() <= limit) return payload;
  // Truncated payloads are kept as a text stub.
  return json{{"_truncated", text.substr(0, limit)}};
}

template <typename CallFn>
ToolPrimitive validate_primitive(ToolPrimitive candidate, const ToolSpec& spec,
                                 CallFn&& call_tool,
                                 const ErrorMarkerConfig& markers = {},
                                 std::chrono::milliseconds timeout = std::chrono::milliseconds(30000)) {
  ToolCall call{candidate.tool_id, candidate.arguments, timeout};
  // Schema violations never reach the wire.
  auto problems = check_arguments(spec, call.arguments);
  ToolResult result;
  if (problems.empty()) {
    result = call_tool(call);
  } else {
    result.transport_status = TransportStatus::Ok;
    result.raw_payload = json::object();
  }
  candidate.verdict = classify_result(spec, call, result, markers);
  if (candidate.verdict.valid() && result.raw_payload)
    candidate.result_digest = digest_payload(*result.raw_payload);
  return candidate;
}

}  // namespace toolforge
