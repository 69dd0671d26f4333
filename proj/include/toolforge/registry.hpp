#pragma once

#include "toolforge/common.hpp"
#include "toolforge/embedding.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

enum class ParamKind { String, Integer, Number, Boolean, Array, Object, Union };

inline std::string to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::String: return "string";
    case ParamKind::Integer: return "integer";
    case ParamKind::Number: return "number";
    case ParamKind::Boolean: return "boolean";
    case ParamKind::Array: return "array";
    case ParamKind::Object: return "object";
    case ParamKind::Union: return "union";
  }
  return "string";
}

inline ParamKind param_kind_from_string(const std::string& text) {
  if (text == "string") return ParamKind::String;
  if (text == "integer") return ParamKind::Integer;
  if (text == "number") return ParamKind::Number;
  if (text == "boolean") return ParamKind::Boolean;
  if (text == "array") return ParamKind::Array;
  if (text == "object") return ParamKind::Object;
  if (text == "union") return ParamKind::Union;
  throw ParseError("unknown parameter kind: " + text);
}

struct ParameterSpec {
  std::string name;
  ParamKind kind = ParamKind::String;
  bool required = false;
  std::optional<double> min_value;
  std::optional<double> max_value;
  std::optional<std::string> pattern;
  std::vector<json> enum_values;  // empty = unconstrained

  json to_json() const {
    json out{{"name", name}, {"kind", to_string(kind)}, {"required", required}};
    if (min_value) out["min"] = *min_value;
    if (max_value) out["max"] = *max_value;
    if (pattern) out["pattern"] = *pattern;
    if (!enum_values.empty()) out["enum"] = enum_values;
    return out;
  }

  static ParameterSpec from_json(const json& value) {
    ParameterSpec spec;
    spec.name = value.at("name").get<std::string>();
    spec.kind = param_kind_from_string(value.value("kind", std::string("string")));
    spec.required = value.value("required", false);
    if (value.contains("min")) spec.min_value = value["min"].get<double>();
    if (value.contains("max")) spec.max_value = value["max"].get<double>();
    if (value.contains("pattern")) spec.pattern = value["pattern"].get<std::string>();
    if (value.contains("enum")) {
      spec.enum_values = value["enum"].get<std::vector<json>>();
      if (spec.enum_values.empty())
        throw ParseError("parameter " + spec.name + ": enum present but empty");
    }
    if (spec.min_value && spec.max_value && *spec.min_value > *spec.max_value)
      throw ParseError("parameter " + spec.name + ": min > max");
    return spec;
  }
};

struct ToolSpec {
  std::string tool_id;
  std::string name;
  std::string description;
  std::vector<ParameterSpec> parameters;

  const ParameterSpec* find_parameter(const std::string& param) const {
    for (const auto& p : parameters)
      if (p.name == param) return &p;
    return nullptr;
  }

  json to_json() const {
    json params = json::array();
    for (const auto& p : parameters) params.push_back(p.to_json());
    return json{{"tool_id", tool_id},
                {"name", name},
                {"description", description},
                {"parameters", params}};
  }

  static ToolSpec from_json(const json& value) {
    ToolSpec spec;
    spec.tool_id = value.at("tool_id").get<std::string>();
    spec.name = value.at("name").get<std::string>();
    spec.description = value.value("description", std::string());
    std::set<std::string> seen;
    for (const auto& p : value.value("parameters", json::array())) {
      auto parsed = ParameterSpec::from_json(p);
      if (!seen.insert(parsed.name).second)
        throw ParseError("tool " + spec.tool_id + ": duplicate parameter " + parsed.name);
      spec.parameters.push_back(std::move(parsed));
    }
    return spec;
  }
};

struct ServerEntry {
  std::string id;
  std::string name;
  std::vector<std::string> domain_tags;
  long stars = 0;
  bool accessible = false;
  bool has_docs = false;
  std::vector<ToolSpec> tools;

  json to_json() const {
    json tool_list = json::array();
    for (const auto& t : tools) tool_list.push_back(t.to_json());
    return json{{"id", id},           {"name", name},
                {"domain_tags", domain_tags}, {"stars", stars},
                {"accessible", accessible},   {"has_docs", has_docs},
                {"tools", tool_list}};
  }

  static ServerEntry from_json(const json& value) {
    ServerEntry entry;
    entry.id = value.at("id").get<std::string>();
    entry.name = value.at("name").get<std::string>();
    entry.domain_tags = value.value("domain_tags", std::vector<std::string>{});
    entry.stars = value.value("stars", 0L);
    if (entry.stars < 0) throw ParseError("server " + entry.id + ": negative stars");
    entry.accessible = value.value("accessible", false);
    entry.has_docs = value.value("has_docs", false);
    for (const auto& t : value.value("tools", json::array()))
      entry.tools.push_back(ToolSpec::from_json(t));
    return entry;
  }
};

// Catalog: line-delimited server records.
inline std::vector<ServerEntry> ingest_catalog(const std::string& path) {
  auto records = read_jsonl(path);
  std::vector<ServerEntry> entries;
  std::set<std::string> ids;
  for (size_t i = 0; i < records.size(); ++i) {
    ServerEntry entry;
    try {
      entry = ServerEntry::from_json(records[i]);
    } catch (const json::exception& e) {
      throw ParseError("catalog entry " + std::to_string(i) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("catalog entry " + std::to_string(i) + ": " + e.what());
    }
    if (!ids.insert(entry.id).second)
      throw ParseError("catalog entry " + std::to_string(i) + ": duplicate id " + entry.id);
    entries.push_back(std::move(entry));
  }
  return entries;
}

inline std::vector<ServerEntry> filter_servers(const std::vector<ServerEntry>& entries,
                                               long min_stars) {
  std::vector<ServerEntry> kept;
  for (const auto& entry : entries)
    if (entry.has_docs && entry.accessible && entry.stars >= min_stars &&
        !entry.tools.empty())
      kept.push_back(entry);
  return kept;
}

// Single-linkage grouping over pairwise name-embedding similarity >= threshold;
// within each group only the max-stars entry survives, ties to the smaller id.
inline std::vector<ServerEntry> dedup_servers(const std::vector<ServerEntry>& entries,
                                              double threshold,
                                              EmbeddingProvider& embed) {
  if (threshold < 0.0 || threshold > 1.0)
    throw InvalidArgumentError("dedup threshold must be in [0,1]");
  const size_t n = entries.size();
  std::vector<std::vector<double>> vectors;
  vectors.reserve(n);
  for (const auto& entry : entries) {
    try {
      vectors.push_back(embed.embed(entry.name));
    } catch (const std::exception& e) {
      throw BackendError("embedding failed for server " + entry.name + ": " + e.what());
    }
  }

  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (cosine_similarity(vectors[i], vectors[j]) >= threshold)
        parent[find(i)] = find(j);

  std::map<size_t, size_t> winner;  // root -> entry index
  for (size_t i = 0; i < n; ++i) {
    size_t root = find(i);
    auto it = winner.find(root);
    if (it == winner.end()) {
      winner[root] = i;
      continue;
    }
    const auto& best = entries[it->second];
    const auto& cand = entries[i];
    if (cand.stars > best.stars ||
        (cand.stars == best.stars && cand.id < best.id))
      it->second = i;
  }

  std::vector<bool> keep(n, false);
  for (const auto& [root, idx] : winner) keep[idx] = true;
  std::vector<ServerEntry> result;
  for (size_t i = 0; i < n; ++i)
    if (keep[i]) result.push_back(entries[i]);
  return result;
}

// Per-domain-tag quotas proportional to tag frequency (largest remainder,
// ties to the lexicographically smaller tag), every represented tag gets at
// least one slot. An entry counts toward its first tag; untagged entries
// fall into an implicit "" stratum.
inline std::vector<ServerEntry> stratified_sample_servers(
    const std::vector<ServerEntry>& entries, size_t total, std::uint64_t rng_seed) {
  if (total > entries.size())
    throw InvalidArgumentError("sample size " + std::to_string(total) +
                               " exceeds population " + std::to_string(entries.size()));
  if (total == entries.size()) return entries;

  std::map<std::string, std::vector<size_t>> strata;
  for (size_t i = 0; i < entries.size(); ++i) {
    std::string tag = entries[i].domain_tags.empty() ? "" : entries[i].domain_tags.front();
    strata[tag].push_back(i);
  }

  const double population = static_cast<double>(entries.size());
  struct Stratum {
    std::string tag;
    std::vector<size_t> members;
    size_t quota = 0;
    double remainder = 0;
  };
  std::vector<Stratum> strata_vec;
  size_t allocated = 0;
  for (auto& [tag, members] : strata) {
    Stratum s;
    s.tag = tag;
    double exact = static_cast<double>(total) * static_cast<double>(members.size()) / population;
    s.quota = std::max<size_t>(1, static_cast<size_t>(exact));
    s.quota = std::min(s.quota, members.size());
    s.remainder = exact - std::floor(exact);
    s.members = std::move(members);
    allocated += s.quota;
    strata_vec.push_back(std::move(s));
  }
  // Budget correction by largest remainder (or smallest, when over-allocated).
  while (allocated < total) {
    size_t best = strata_vec.size();
    for (size_t i = 0; i < strata_vec.size(); ++i) {
      if (strata_vec[i].quota >= strata_vec[i].members.size()) continue;
      if (best == strata_vec.size() ||
          strata_vec[i].remainder > strata_vec[best].remainder)
        best = i;
    }
    if (best == strata_vec.size()) break;
    ++strata_vec[best].quota;
    strata_vec[best].remainder -= 1.0;
    ++allocated;
  }
  while (allocated > total) {
    size_t worst = strata_vec.size();
    for (size_t i = 0; i < strata_vec.size(); ++i) {
      if (strata_vec[i].quota <= 1) continue;
      if (worst == strata_vec.size() ||
          strata_vec[i].remainder < strata_vec[worst].remainder)
        worst = i;
    }
    if (worst == strata_vec.size()) {
      // all quotas are at the floor of 1; drop strata from the end
      for (size_t i = strata_vec.size(); i-- > 0 && allocated > total;) {
        if (strata_vec[i].quota > 0) {
          --strata_vec[i].quota;
          --allocated;
        }
      }
      break;
    }
    --strata_vec[worst].quota;
    strata_vec[worst].remainder += 1.0;
    --allocated;
  }

  auto rng = substream(rng_seed, "stratified_sample_servers");
  std::vector<size_t> chosen;
  for (auto& s : strata_vec) {
    std::shuffle(s.members.begin(), s.members.end(), rng);
    for (size_t i = 0; i < s.quota; ++i) chosen.push_back(s.members[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<ServerEntry> result;
  for (size_t idx : chosen) result.push_back(entries[idx]);
  return result;
}

// Immutable after construction; tool_id lookup is total over retained tools.
class ToolRegistry {
 public:
  explicit ToolRegistry(std::vector<ServerEntry> servers)
      : servers_(std::move(servers)) {
    for (size_t si = 0; si < servers_.size(); ++si) {
      for (const auto& tool : servers_[si].tools) {
        if (!tools_.emplace(tool.tool_id, &tool).second)
          throw IntegrityError("duplicate tool_id across servers: " + tool.tool_id);
      }
    }
  }

  const std::vector<ServerEntry>& servers() const { return servers_; }

  const ToolSpec* find_tool(const std::string& tool_id) const {
    auto it = tools_.find(tool_id);
    return it == tools_.end() ? nullptr : it->second;
  }

  const ToolSpec& tool(const std::string& tool_id) const {
    const ToolSpec* spec = find_tool(tool_id);
    if (!spec) throw InvalidArgumentError("unknown tool_id: " + tool_id);
    return *spec;
  }

  std::vector<std::string> tool_ids() const {
    std::vector<std::string> ids;
    ids.reserve(tools_.size());
    for (const auto& [id, spec] : tools_) ids.push_back(id);
    return ids;
  }

  void export_snapshot(const std::string& path) const {
    std::vector<json> records;
    for (const auto& server : servers_) records.push_back(server.to_json());
    write_jsonl(path, records);
  }

  static ToolRegistry import_snapshot(const std::string& path) {
    std::vector<ServerEntry> servers;
    for (const auto& record : read_jsonl(path))
      servers.push_back(ServerEntry::from_json(record));
    return ToolRegistry(std::move(servers));
  }

 private:
  std::vector<ServerEntry> servers_;
  std::map<std::string, const ToolSpec*> tools_;
};

}  // namespace toolforge
