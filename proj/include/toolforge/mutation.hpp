#pragma once

#include "toolforge/common.hpp"
#include "toolforge/embedding.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/icp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace toolforge {

enum class MutationStrategy {
  HypernymHyponym,
  CoHyponym,
  Irrelevance,
  Antonym,
  LexicalSimilarity,
  Combination,
  Original,
  Deletion,
};

inline std::string to_string(MutationStrategy strategy) {
  switch (strategy) {
    case MutationStrategy::HypernymHyponym: return "hypernym_hyponym";
    case MutationStrategy::CoHyponym: return "co_hyponym";
    case MutationStrategy::Irrelevance: return "irrelevance";
    case MutationStrategy::Antonym: return "antonym";
    case MutationStrategy::LexicalSimilarity: return "lexical_similarity";
    case MutationStrategy::Combination: return "combination";
    case MutationStrategy::Original: return "original";
    case MutationStrategy::Deletion: return "deletion";
  }
  return "original";
}

inline MutationStrategy mutation_strategy_from_string(const std::string& text) {
  for (auto s : {MutationStrategy::HypernymHyponym, MutationStrategy::CoHyponym,
                 MutationStrategy::Irrelevance, MutationStrategy::Antonym,
                 MutationStrategy::LexicalSimilarity, MutationStrategy::Combination,
                 MutationStrategy::Original, MutationStrategy::Deletion})
    if (to_string(s) == text) return s;
  throw ParseError("unknown mutation strategy: " + text);
}

constexpr std::array<MutationStrategy, 5> kSubstitutionStrategies = {
    MutationStrategy::HypernymHyponym, MutationStrategy::CoHyponym,
    MutationStrategy::Irrelevance, MutationStrategy::Antonym,
    MutationStrategy::LexicalSimilarity};

struct MutationRecord {
  MutationStrategy strategy = MutationStrategy::Original;
  json mutated_value;  // unset for Deletion
  bool is_deletion = false;
  double complexity = 0.0;

  static MutationRecord original(const json& value) {
    return {MutationStrategy::Original, value, false, 0.0};
  }
  static MutationRecord deletion() {
    return {MutationStrategy::Deletion, json(), true, 1.0};
  }

  json to_json() const {
    json out{{"strategy", to_string(strategy)}, {"complexity", complexity}};
    if (is_deletion)
      out["deleted"] = true;
    else
      out["value"] = mutated_value;
    return out;
  }
  static MutationRecord from_json(const json& v) {
    MutationRecord record;
    record.strategy = mutation_strategy_from_string(v.at("strategy").get<std::string>());
    record.is_deletion = v.value("deleted", false);
    if (!record.is_deletion) record.mutated_value = v.value("value", json());
    record.complexity = v.value("complexity", 0.0);
    return record;
  }
};

struct MutationPool {
  std::string sample_id;
  int step = 0;
  std::string parameter;
  json original_value;
  std::vector<MutationRecord> records;  // includes Original and Deletion
  double theta = 0.0;

  json to_json() const {
    json recs = json::array();
    for (const auto& r : records) recs.push_back(r.to_json());
    return json{{"sample_id", sample_id}, {"step", step}, {"parameter", parameter},
                {"original_value", original_value}, {"records", recs}, {"theta", theta}};
  }
  static MutationPool from_json(const json& v) {
    MutationPool pool;
    pool.sample_id = v.at("sample_id").get<std::string>();
    pool.step = v.at("step").get<int>();
    pool.parameter = v.at("parameter").get<std::string>();
    pool.original_value = v.value("original_value", json());
    for (const auto& r : v.value("records", json::array()))
      pool.records.push_back(MutationRecord::from_json(r));
    pool.theta = v.value("theta", 0.0);
    return pool;
  }
};

// Mechanical data-type preservation: numeric stays numeric, string stays
// string, and so on.
inline bool same_data_type(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

constexpr double kNumericEpsilon = 1e-9;

// Numeric: relative difference |v' - v| / max(|v|, eps); an original of 0
// falls back to the absolute difference. Text: 1 - cosine similarity of the
// embeddings. Deletion: 1.
inline double score_complexity(const json& original, const MutationRecord& record,
                               EmbeddingProvider& embed) {
  if (record.is_deletion) return 1.0;
  if (record.strategy == MutationStrategy::Original) return 0.0;
  const json& mutated = record.mutated_value;
  if (original.is_number() && mutated.is_number()) {
    double v = original.get<double>();
    double m = mutated.get<double>();
    if (std::abs(v) < kNumericEpsilon) return std::abs(m - v);
    return std::abs(m - v) / std::max(std::abs(v), kNumericEpsilon);
  }
  std::string a = value_to_text(original);
  std::string b = value_to_text(mutated);
  return 1.0 - cosine_similarity(embed.embed(a), embed.embed(b));
}

// One-or-more unique candidate values per requested strategy via the
// "mutation_gen" template, mechanically checked for data-type preservation
// and judged for part-of-speech preservation via "pos_check".
inline std::vector<MutationRecord> generate_substitutions(
    const IcpAssignment& assignment, const std::vector<MutationStrategy>& strategies,
    LlmGateway& gateway, EmbeddingProvider& embed, int per_strategy = 3) {
  std::vector<MutationRecord> records;
  std::set<std::string> seen{canonical_dump(assignment.value)};

  for (MutationStrategy strategy : strategies) {
    if (strategy == MutationStrategy::Original || strategy == MutationStrategy::Deletion ||
        strategy == MutationStrategy::Combination)
      continue;
    ChatRequest chat;
    chat.template_name = "mutation_gen";
    chat.variables = {{"strategy", to_string(strategy)},
                      {"parameter", assignment.parameter},
                      {"value", canonical_dump(assignment.value)},
                      {"count", std::to_string(per_strategy)}};
    json values;
    try {
      values = gateway.complete_json(chat);
    } catch (const StageError&) {
      continue;  // strategy yielded nothing; logged by the caller's report
    }
    if (!values.is_array()) continue;
    for (const auto& value : values) {
      if (!same_data_type(assignment.value, value)) continue;
      if (!seen.insert(canonical_dump(value)).second) continue;
      if (value.is_string()) {
        ChatRequest pos;
        pos.template_name = "pos_check";
        pos.variables = {{"original", value_to_text(assignment.value)},
                         {"candidate", value_to_text(value)}};
        if (!parse_pass_fail(gateway.complete(pos).text).pass) continue;
      }
      MutationRecord record;
      record.strategy = strategy;
      record.mutated_value = value;
      record.complexity = score_complexity(assignment.value, record, embed);
      records.push_back(std::move(record));
    }
  }
  return records;
}

inline MutationPool build_pool(const IcpAssignment& assignment,
                               const std::string& sample_id,
                               std::vector<MutationRecord> substitutions) {
  MutationPool pool;
  pool.sample_id = sample_id;
  pool.step = assignment.step;
  pool.parameter = assignment.parameter;
  pool.original_value = assignment.value;
  pool.records = std::move(substitutions);
  pool.records.push_back(MutationRecord::original(assignment.value));
  pool.records.push_back(MutationRecord::deletion());
  return pool;
}

// Substitution records with score < theta are removed; Original and Deletion
// are always retained.
inline MutationPool filter_pool(MutationPool pool, double theta) {
  if (theta < 0) throw InvalidArgumentError("theta must be >= 0");
  pool.theta = theta;
  std::vector<MutationRecord> kept;
  for (auto& record : pool.records) {
    if (record.strategy == MutationStrategy::Original || record.is_deletion ||
        record.complexity >= theta)
      kept.push_back(std::move(record));
  }
  pool.records = std::move(kept);
  return pool;
}

// One coordinate of a multi-parameter variant.
struct VariantCoordinate {
  std::string sample_id;
  int step = 0;
  std::string parameter;
  MutationRecord choice;

  json to_json() const {
    return json{{"sample_id", sample_id}, {"step", step}, {"parameter", parameter},
                {"choice", choice.to_json()}};
  }
  static VariantCoordinate from_json(const json& v) {
    return {v.at("sample_id").get<std::string>(), v.at("step").get<int>(),
            v.at("parameter").get<std::string>(),
            MutationRecord::from_json(v.at("choice"))};
  }
};

struct MutationVariant {
  std::string variant_id;
  std::vector<VariantCoordinate> coordinates;
  double score = 0.0;

  std::vector<int> mask() const {
    std::vector<int> bits;
    bits.reserve(coordinates.size());
    for (const auto& coord : coordinates)
      bits.push_back(coord.choice.strategy == MutationStrategy::Original ? 0 : 1);
    return bits;
  }

  json to_json() const {
    json coords = json::array();
    for (const auto& c : coordinates) coords.push_back(c.to_json());
    return json{{"variant_id", variant_id}, {"coordinates", coords}, {"score", score}};
  }
  static MutationVariant from_json(const json& v) {
    MutationVariant variant;
    variant.variant_id = v.at("variant_id").get<std::string>();
    for (const auto& c : v.value("coordinates", json::array()))
      variant.coordinates.push_back(VariantCoordinate::from_json(c));
    variant.score = v.value("score", 0.0);
    return variant;
  }
};

// Mutation-ratio-weighted mean: unmutated coordinates contribute 0, the sum
// is divided by the number of ICP coordinates.
inline double variant_score(const MutationVariant& variant) {
  if (variant.coordinates.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& coord : variant.coordinates) sum += coord.choice.complexity;
  return sum / static_cast<double>(variant.coordinates.size());
}

// Cartesian product over per-ICP choice sets (each pool already contains its
// Original and Deletion); the all-Original variant is excluded. Products
// larger than `cap` are truncated by seeded uniform sampling of product
// indices.
inline std::vector<MutationVariant> combine(const std::vector<MutationPool>& pools,
                                            size_t cap = 100000,
                                            std::uint64_t seed = 0) {
  if (pools.empty()) throw InvalidArgumentError("combine requires at least one pool");
  size_t product = 1;
  bool overflowed = false;
  for (const auto& pool : pools) {
    if (pool.records.empty()) throw IntegrityError("pool with no records");
    if (product > std::numeric_limits<size_t>::max() / pool.records.size()) {
      overflowed = true;
      break;
    }
    product *= pool.records.size();
  }

  auto variant_at = [&](size_t flat_index) {
    MutationVariant variant;
    size_t rest = flat_index;
    bool all_original = true;
    for (const auto& pool : pools) {
      size_t pick = rest % pool.records.size();
      rest /= pool.records.size();
      VariantCoordinate coord{pool.sample_id, pool.step, pool.parameter,
                              pool.records[pick]};
      if (coord.choice.strategy != MutationStrategy::Original) all_original = false;
      variant.coordinates.push_back(std::move(coord));
    }
    variant.score = variant_score(variant);
    variant.variant_id = "var_" + hex64(fnv1a64(canonical_dump(variant.to_json())));
    return std::make_pair(variant, all_original);
  };

  std::vector<MutationVariant> variants;
  if (!overflowed && product <= cap + 1) {
    for (size_t i = 0; i < product; ++i) {
      auto [variant, all_original] = variant_at(i);
      if (!all_original) variants.push_back(std::move(variant));
    }
  } else {
    if (overflowed) product = std::numeric_limits<size_t>::max();
    auto rng = substream(seed, "combine_cap");
    std::uniform_int_distribution<size_t> dist(0, product - 1);
    std::set<size_t> picked;
    while (picked.size() < cap) picked.insert(dist(rng));
    for (size_t i : picked) {
      auto [variant, all_original] = variant_at(i);
      if (!all_original) variants.push_back(std::move(variant));
    }
  }
  return variants;
}

// Theta applies to combinations as well as to single records.
inline std::vector<MutationVariant> filter_variants(std::vector<MutationVariant> variants,
                                                    double theta) {
  std::vector<MutationVariant> kept;
  for (auto& variant : variants)
    if (variant.score >= theta) kept.push_back(std::move(variant));
  return kept;
}

}  // namespace toolforge
