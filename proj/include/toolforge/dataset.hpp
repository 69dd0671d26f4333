#pragma once

#include "toolforge/common.hpp"
#include "toolforge/mutation.hpp"
#include "toolforge/registry.hpp"
#include "toolforge/request_synthesis.hpp"
#include "toolforge/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace toolforge {

// Deep copy of the positive trajectory with exactly the variant's coordinates
// replaced (or removed, for Deletion). Everything else stays byte-identical.
inline Sample materialize_negative(const Sample& positive, const MutationVariant& variant,
                                   const PrimitiveStore& store) {
  if (positive.label != Label::Positive)
    throw InvalidArgumentError("materialize_negative requires a positive sample");

  Sample negative = positive;
  negative.sample_id = positive.sample_id + "#" + variant.variant_id;
  negative.label = Label::Negative;
  negative.mutation_meta = json{{"source_sample", positive.sample_id},
                                {"variant", variant.to_json()}};

  for (const auto& coord : variant.coordinates) {
    if (coord.choice.strategy == MutationStrategy::Original) continue;
    auto& step = negative.trajectory.steps.at(static_cast<size_t>(coord.step - 1));
    json args = effective_arguments(positive.trajectory, coord.step, store);
    if (!args.contains(coord.parameter))
      throw IntegrityError("variant coordinate references vanished parameter " +
                           coord.parameter + " at step " + std::to_string(coord.step));
    if (coord.choice.is_deletion) {
      // Override with an explicit deletion marker the serializer understands.
      step.overrides[coord.parameter] = json{{"__deleted__", true}};
    } else {
      step.overrides[coord.parameter] = coord.choice.mutated_value;
    }
  }
  return negative;
}

// Canonical, sorted-key, whitespace-free serialization of a trajectory's
// concrete calls; string equality implies structural equality. Deletion
// markers drop the parameter.
inline json concrete_calls(const Trajectory& trajectory, const PrimitiveStore& store) {
  json calls = json::array();
  for (const auto& step : trajectory.steps) {
    const auto& primitive = store.get(step.primitive_id);
    json args = primitive.arguments;
    for (const auto& [key, value] : step.overrides.items()) args[key] = value;
    json cleaned = json::object();
    for (const auto& [key, value] : args.items()) {
      if (value.is_object() && value.value("__deleted__", false)) continue;
      cleaned[key] = value;
    }
    calls.push_back(json{{"step", step.index},
                         {"tool_id", primitive.tool_id},
                         {"arguments", cleaned}});
  }
  return calls;
}

inline std::string serialize_trajectory(const Trajectory& trajectory,
                                        const PrimitiveStore& store) {
  return canonical_dump(json{{"pattern", to_string(trajectory.pattern)},
                             {"calls", concrete_calls(trajectory, store)}});
}

struct PreferencePair {
  std::string pair_id;
  std::string input_context;  // x: user request + candidate tool set
  std::string chosen;         // c_w
  std::string rejected;       // c_l
  std::string sample_id;
  std::string variant_id;

  json to_json() const {
    return json{{"id", pair_id},
                {"prompt", input_context},
                {"chosen", chosen},
                {"rejected", rejected},
                {"meta", json{{"sample_id", sample_id}, {"variant_id", variant_id}}}};
  }
  static PreferencePair from_json(const json& v) {
    PreferencePair pair;
    pair.pair_id = v.at("id").get<std::string>();
    pair.input_context = v.at("prompt").get<std::string>();
    pair.chosen = v.at("chosen").get<std::string>();
    pair.rejected = v.at("rejected").get<std::string>();
    pair.sample_id = v.at("meta").value("sample_id", std::string());
    pair.variant_id = v.at("meta").value("variant_id", std::string());
    return pair;
  }
};

// x = request text + candidate tool set: the trajectory's own tools plus d
// seeded distractors from the registry.
inline std::string build_input_context(const Sample& positive, const PrimitiveStore& store,
                                       const ToolRegistry& registry, size_t distractors,
                                       std::uint64_t seed) {
  std::set<std::string> used;
  for (const auto& step : positive.trajectory.steps)
    used.insert(store.get(step.primitive_id).tool_id);

  std::vector<std::string> candidates(used.begin(), used.end());
  std::vector<std::string> others;
  for (const auto& tool_id : registry.tool_ids())
    if (!used.count(tool_id)) others.push_back(tool_id);
  auto rng = substream(seed ^ fnv1a64(positive.sample_id), "distractors");
  std::shuffle(others.begin(), others.end(), rng);
  for (size_t i = 0; i < others.size() && i < distractors; ++i)
    candidates.push_back(others[i]);
  std::sort(candidates.begin(), candidates.end());

  json tool_set = json::array();
  for (const auto& tool_id : candidates) tool_set.push_back(registry.tool(tool_id).to_json());
  return canonical_dump(json{{"request", positive.request.text}, {"tools", tool_set}});
}

inline std::vector<PreferencePair> build_preference_pairs(
    const std::vector<Sample>& positives, const std::vector<Sample>& negatives,
    const PrimitiveStore& store, const ToolRegistry& registry, size_t distractors = 8,
    std::uint64_t seed = 0) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& positive : positives) by_id[positive.sample_id] = &positive;

  std::vector<PreferencePair> pairs;
  for (const auto& negative : negatives) {
    if (negative.mutation_meta.is_null() || !negative.mutation_meta.contains("source_sample"))
      throw IntegrityError("negative without mutation provenance: " + negative.sample_id);
    std::string source = negative.mutation_meta["source_sample"].get<std::string>();
    auto it = by_id.find(source);
    if (it == by_id.end())
      throw IntegrityError("negative " + negative.sample_id +
                           " references missing positive " + source);
    const Sample& positive = *it->second;

    PreferencePair pair;
    pair.pair_id = "pair_" + hex64(fnv1a64(negative.sample_id));
    pair.input_context = build_input_context(positive, store, registry, distractors, seed);
    pair.chosen = serialize_trajectory(positive.trajectory, store);
    pair.rejected = serialize_trajectory(negative.trajectory, store);
    pair.sample_id = positive.sample_id;
    pair.variant_id = negative.mutation_meta["variant"]["variant_id"].get<std::string>();
    if (pair.chosen == pair.rejected)
      throw IntegrityError("pair with identical chosen/rejected: " + negative.sample_id);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

struct DpoLossInput {
  double logp_w_policy = 0;
  double logp_w_ref = 0;
  double logp_l_policy = 0;
  double logp_l_ref = 0;
  double beta = 0.1;
};

// -log sigma(beta * [(logp_w_policy - logp_w_ref) - (logp_l_policy - logp_l_ref)])
// computed with the stable softplus form log1p(exp(-m)).
inline double dpo_loss(const DpoLossInput& input) {
  if (input.beta <= 0) throw InvalidArgumentError("beta must be > 0");
  for (double v : {input.logp_w_policy, input.logp_w_ref, input.logp_l_policy,
                   input.logp_l_ref})
    if (!std::isfinite(v)) throw InvalidArgumentError("non-finite log-probability");
  double margin = input.beta * ((input.logp_w_policy - input.logp_w_ref) -
                                (input.logp_l_policy - input.logp_l_ref));
  // softplus(-margin), guarded against exp overflow
  if (margin < -50) return -margin;
  return std::log1p(std::exp(-margin));
}

inline void export_sft(const std::vector<Sample>& positives, const std::string& path,
                       const PrimitiveStore& store) {
  std::vector<json> records;
  for (const auto& sample : positives) {
    if (sample.label != Label::Positive)
      throw InvalidArgumentError("export_sft accepts positives only");
    records.push_back(json{{"id", sample.sample_id},
                           {"messages", json::array({sample.request.text})},
                           {"target", serialize_trajectory(sample.trajectory, store)},
                           {"response_note", sample.response_note}});
  }
  write_jsonl(path, records);
}

inline void export_dpo(const std::vector<PreferencePair>& pairs, const std::string& path) {
  std::vector<json> records;
  for (const auto& pair : pairs) records.push_back(pair.to_json());
  write_jsonl(path, records);
}

inline std::vector<PreferencePair> import_dpo(const std::string& path) {
  std::vector<PreferencePair> pairs;
  for (const auto& record : read_jsonl(path))
    pairs.push_back(PreferencePair::from_json(record));
  return pairs;
}

}  // namespace toolforge
