#pragma once

#include "toolforge/common.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/registry.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

// Deterministic rule-based stand-in for the generative model. It switches on
// the template name and synthesizes schema-plausible output from the request
// variables, so record/replay and the hermetic demo never need a network.
class ScriptedBackend : public ChatBackend {
 public:
  std::string id() const override { return "scripted"; }

  std::string complete(const ChatRequest& request, const std::string&) override {
    const auto& name = request.template_name;
    if (name == "primitive_gen") return primitive_gen(request);
    if (name == "compose_trajectory") return compose_trajectory(request);
    if (name == "request_synth") return request_synth(request);
    if (name == "consistency_check") return consistency_check(request);
    if (name == "icp_judge") return icp_judge(request);
    if (name == "mutation_gen") return mutation_gen(request);
    if (name == "pos_check") return "PASS\nsame part of speech";
    if (name == "likert_judge") return likert_judge(request);
    throw BackendError("scripted backend has no rule for template " + name);
  }

 private:
  static std::string fenced(const json& value) {
    return "```json\n" + canonical_dump(value) + "\n```";
  }

  static std::string var(const ChatRequest& request, const std::string& key) {
    auto it = request.variables.find(key);
    if (it == request.variables.end())
      throw BackendError("scripted backend: missing variable " + key);
    return it->second;
  }

  // Small value lexicon keyed by parameter-name hints.
  static json sample_value(const json& param, int ordinal) {
    std::string pname = to_lower(param.value("name", std::string()));
    std::string kind = param.value("kind", std::string("string"));
    auto contains = [&](const char* needle) {
      return pname.find(needle) != std::string::npos;
    };
    if (param.contains("enum")) {
      const auto& options = param["enum"];
      return options[static_cast<size_t>(ordinal) % options.size()];
    }
    if (kind == "integer" || kind == "number") {
      double lo = param.value("min", 1.0);
      double hi = param.value("max", lo + 9);
      double value = lo + static_cast<double>(ordinal % 3);
      if (value > hi) value = hi;
      if (kind == "integer") return static_cast<long>(value);
      return value;
    }
    if (kind == "boolean") return ordinal % 2 == 0;
    if (kind == "array") return json::array({"item_a", "item_b"});
    if (kind == "object") return json::object();
    if (contains("city")) return ordinal % 2 == 0 ? "Denver" : "Boston";
    if (contains("state")) return ordinal % 2 == 0 ? "CO" : "MA";
    if (contains("type")) return ordinal % 2 == 0 ? "micro" : "regional";
    if (contains("path") || contains("file")) return "/data/input.txt";
    if (contains("query") || contains("search")) return "coffee roasters";
    if (contains("id")) return "id_" + std::to_string(100 + ordinal);
    return pname + "_value_" + std::to_string(ordinal);
  }

  std::string primitive_gen(const ChatRequest& request) {
    json spec = json::parse(var(request, "tool_spec"));
    bool full = var(request, "coverage") == "fully_populated";
    int count = std::stoi(var(request, "count"));
    json out = json::array();
    for (int i = 0; i < count; ++i) {
      json arguments = json::object();
      for (const auto& param : spec.value("parameters", json::array())) {
        if (!full && !param.value("required", false)) continue;
        arguments[param.at("name").get<std::string>()] = sample_value(param, i);
      }
      out.push_back(json{
          {"instruction", "use " + spec.value("name", std::string("tool")) +
                              " to " + spec.value("description", std::string("act"))},
          {"arguments", arguments}});
    }
    return fenced(out);
  }

  std::string compose_trajectory(const ChatRequest& request) {
    json pool = json::parse(var(request, "primitives"));
    std::string pattern = var(request, "pattern");
    size_t length = static_cast<size_t>(std::stoul(var(request, "length")));
    length = std::min(length, pool.size());

    // For conditional plans, put a producer whose payload exposes an id in
    // front of a consumer with an id-like parameter, when the pool has one.
    std::vector<size_t> order(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) order[i] = i;
    if (pattern == "conditional" && length >= 2) {
      auto id_param = [&](size_t idx) -> std::string {
        const json arguments = pool[idx].value("arguments", json::object());
        for (const auto& [key, value] : arguments.items())
          if (to_lower(key).find("id") != std::string::npos) return key;
        return {};
      };
      auto produces_id = [&](size_t idx) {
        const json& digest = pool[idx].value("result_digest", json());
        return digest.is_object() && digest.contains("id");
      };
      for (size_t c = 0; c < pool.size(); ++c) {
        if (id_param(c).empty()) continue;
        for (size_t p = 0; p < pool.size(); ++p) {
          if (p == c || !produces_id(p)) continue;
          std::vector<size_t> rest;
          for (size_t i = 0; i < pool.size(); ++i)
            if (i != p && i != c) rest.push_back(i);
          order = {p, c};
          order.insert(order.end(), rest.begin(), rest.end());
          goto ordered;
        }
      }
    ordered:;
    }

    json steps = json::array();
    for (size_t i = 0; i < length; ++i)
      steps.push_back(json{{"index", static_cast<int>(i) + 1},
                           {"primitive_id", pool[order[i]].at("primitive_id")},
                           {"overrides", json::object()}});

    json edges = json::array();
    if (pattern == "conditional" && length >= 2) {
      const json& producer = pool[order[0]];
      const json& consumer = pool[order[1]];
      std::string parameter;
      const json consumer_args = consumer.value("arguments", json::object());
      for (const auto& [key, value] : consumer_args.items()) {
        if (to_lower(key).find("id") != std::string::npos) { parameter = key; break; }
        if (parameter.empty()) parameter = key;
      }
      std::string path = "$.id";
      const json& digest = producer.value("result_digest", json());
      if (digest.is_object() && !digest.contains("id") && !digest.empty())
        path = "$." + digest.begin().key();
      if (!parameter.empty())
        edges.push_back(json{{"producer_step", 1}, {"payload_path", path},
                             {"consumer_step", 2}, {"parameter", parameter}});
    }

    json out{{"steps", steps}, {"pattern", pattern}, {"data_flow", edges}};
    if (pattern == "parallel") {
      json branches = json::array();
      json first = json::array(), second = json::array();
      for (size_t i = 0; i < length; ++i)
        (i % 2 == 0 ? first : second).push_back(static_cast<int>(i) + 1);
      branches.push_back(first);
      if (!second.empty()) branches.push_back(second);
      out["branches"] = branches;
    }
    return fenced(out);
  }

  std::string request_synth(const ChatRequest& request) {
    json steps = json::parse(var(request, "trajectory"));
    json elements = json::array();
    std::string text = "Please";
    int element_index = 0;
    bool first_clause = true;
    for (const auto& step : steps) {
      std::set<std::string> fed;
      for (const auto& name : step.value("fed_parameters", json::array()))
        fed.insert(name.get<std::string>());
      std::string clause;
      const json step_args = step.value("arguments", json::object());
      for (const auto& [name, value] : step_args.items()) {
        if (fed.count(name)) continue;
        std::string rendered = value_to_text(value);
        elements.push_back(json{{"index", ++element_index},
                                {"sub_intention", "set " + name + " for " +
                                                      step.value("tool_id", std::string())},
                                {"key_value", rendered},
                                {"mapped_step", step.at("index")}});
        clause += (clause.empty() ? "" : ", ") + name + " " + rendered;
      }
      std::string action = step.value("instruction", std::string());
      if (action.empty()) action = "run " + step.value("tool_id", std::string());
      text += (first_clause ? " " : "; then ") + action;
      if (!clause.empty()) text += " with " + clause;
      first_clause = false;
    }
    text += ".";
    return fenced(json{{"text", text}, {"key_elements", elements}});
  }

  std::string consistency_check(const ChatRequest& request) {
    json req = json::parse(var(request, "request"));
    std::string haystack = normalize_for_match(req.value("text", std::string()));
    for (const auto& element : req.value("key_elements", json::array())) {
      std::string value = normalize_for_match(element.value("key_value", std::string()));
      if (!value.empty() && haystack.find(value) == std::string::npos)
        return "FAIL\nkey value not grounded in the request: " +
               element.value("key_value", std::string());
    }
    return "PASS\ntask completed: every key value is grounded in the request";
  }

  std::string icp_judge(const ChatRequest& request) {
    std::string value = normalize_for_match(var(request, "parameter_value"));
    std::string key = normalize_for_match(var(request, "key_value"));
    if (!value.empty() && (key.find(value) != std::string::npos ||
                           value.find(key) != std::string::npos))
      return "1\nvalue is derived from the key value";
    return "0\nno evidence in the key value";
  }

  std::string mutation_gen(const ChatRequest& request) {
    std::string strategy = var(request, "strategy");
    json original = json::parse(var(request, "value"));
    int count = std::stoi(var(request, "count"));
    json out = json::array();
    if (original.is_number()) {
      double v = original.get<double>();
      bool integral = original.is_number_integer();
      for (int i = 0; i < count; ++i) {
        double mutated = numeric_mutation(strategy, v, i);
        if (integral)
          out.push_back(static_cast<long>(mutated));
        else
          out.push_back(mutated);
      }
    } else if (original.is_string()) {
      std::string v = original.get<std::string>();
      for (int i = 0; i < count; ++i) {
        std::string mutated = text_mutation(strategy, v, i);
        if (mutated != v) out.push_back(mutated);
      }
    } else if (original.is_boolean()) {
      out.push_back(!original.get<bool>());
    }
    return fenced(out);
  }

  static double numeric_mutation(const std::string& strategy, double v, int i) {
    if (strategy == "antonym") return -v - i;
    if (strategy == "hypernym_hyponym") return v * 10 + i;
    if (strategy == "co_hyponym") return v + i + 1;
    if (strategy == "irrelevance") return v * 100 + 7 + i;
    return v + 2 * (i + 1);  // lexical_similarity
  }

  static std::string text_mutation(const std::string& strategy, const std::string& v,
                                   int i) {
    static const std::map<std::string, std::map<std::string, std::string>> lexicon = {
        {"antonym",
         {{"cheapest", "most expensive"}, {"micro", "macro"}, {"open", "closed"},
          {"first", "last"}, {"newest", "oldest"}}},
        {"co_hyponym",
         {{"flight", "train"}, {"Denver", "Boston"}, {"CO", "MA"},
          {"micro", "regional"}, {"coffee roasters", "tea houses"}}},
        {"hypernym_hyponym",
         {{"iPhone", "phone"}, {"Denver", "city"}, {"micro", "brewery type"},
          {"coffee roasters", "beverage businesses"}}},
        {"lexical_similarity",
         {{"audiobook", "book review"}, {"Denver", "Denton"}, {"micro", "microbe"},
          {"CO", "CT"}}},
    };
    if (strategy == "irrelevance") {
      static const std::vector<std::string> unrelated = {"banana", "umbrella",
                                                         "trombone"};
      return unrelated[(fnv1a64(v) + static_cast<size_t>(i)) % unrelated.size()];
    }
    auto table = lexicon.find(strategy);
    if (table != lexicon.end()) {
      auto hit = table->second.find(v);
      if (hit != table->second.end())
        return i == 0 ? hit->second : hit->second + " " + std::to_string(i);
    }
    // Fallback transforms keep the value a plausible noun phrase.
    if (strategy == "antonym") return "non-" + v;
    if (strategy == "co_hyponym") return v + " alternative";
    if (strategy == "hypernym_hyponym") return "general " + v;
    return v + " variant " + std::to_string(i);
  }

  std::string likert_judge(const ChatRequest& request) {
    json record = json::parse(var(request, "record"));
    // Near-optimal unless the record is visibly defective.
    if (record.value("predicted", json::array()).empty()) return "2\nempty prediction";
    if (record.value("request", std::string()).empty()) return "1\nno request";
    return "5\nno defects found";
  }
};

}  // namespace toolforge
