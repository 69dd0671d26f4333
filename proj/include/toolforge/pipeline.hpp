#pragma once

#include "toolforge/common.hpp"
#include "toolforge/config.hpp"
#include "toolforge/dataset.hpp"
#include "toolforge/embedding.hpp"
#include "toolforge/eval.hpp"
#include "toolforge/gateway.hpp"
#include "toolforge/http_backend.hpp"
#include "toolforge/icp.hpp"
#include "toolforge/mcp.hpp"
#include "toolforge/mutation.hpp"
#include "toolforge/primitive.hpp"
#include "toolforge/registry.hpp"
#include "toolforge/request_synthesis.hpp"
#include "toolforge/scripted_backend.hpp"
#include "toolforge/subsample.hpp"
#include "toolforge/trajectory.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace toolforge {

struct StageReport {
  std::string stage;
  std::map<std::string, size_t> counts;
  std::vector<std::string> rejections;

  json to_json() const {
    return json{{"stage", stage}, {"counts", counts}, {"rejections", rejections}};
  }
};

inline void print_report(const StageReport& report) {
  std::cout << canonical_dump(report.to_json()) << "\n";
}

// Drives the stages over one run directory. Stage outputs are pure functions
// of (config, seed, cassettes, fixtures); re-running a stage overwrites its
// artifacts with identical bytes.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
  }

  const PipelineConfig& config() const { return config_; }

  StageReport run_stage(const std::string& stage) {
    if (stage == "ingest") return ingest();
    if (stage == "primitives") return primitives();
    if (stage == "trajectories") return trajectories();
    if (stage == "requests") return requests();
    if (stage == "icp") return icp();
    if (stage == "mutate") return mutate();
    if (stage == "sample") return sample();
    if (stage == "build") return build();
    if (stage == "export") return export_datasets();
    if (stage == "evaluate") return evaluate();
    throw InvalidArgumentError("unknown stage: " + stage);
  }

  std::vector<StageReport> run_all() {
    std::vector<StageReport> reports;
    for (const char* stage : {"ingest", "primitives", "trajectories", "requests",
                              "icp", "mutate", "sample", "build", "export", "evaluate"})
      reports.push_back(run_stage(stage));
    return reports;
  }

  static const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {
        "ingest", "primitives", "trajectories", "requests", "icp",
        "mutate", "sample",     "build",        "export",   "evaluate"};
    return names;
  }

 private:
  std::filesystem::path artifact(const std::string& name) const {
    return std::filesystem::path(config_.run_dir) / name;
  }

  void require_artifact(const std::string& name, const std::string& producing_stage) const {
    if (!std::filesystem::exists(artifact(name)))
      throw DependencyError("missing artifact " + name + "; run stage '" +
                            producing_stage + "' first");
  }

  void write_manifest() {
    if (config_.dry_run) return;
    std::filesystem::create_directories(config_.run_dir);
    json manifest{{"config_hash", hex64(fnv1a64(canonical_dump(config_.to_json())))},
                  {"seed", config_.seed}};
    std::ofstream out(artifact("manifest.json"));
    out << canonical_dump(manifest) << "\n";
  }

  LlmGateway& gateway() {
    if (!gateway_) {
      std::shared_ptr<ChatBackend> backend;
      if (config_.backend_type == "scripted")
        backend = std::make_shared<ScriptedBackend>();
      else if (config_.backend_type == "http")
        backend = std::make_shared<HttpChatBackend>(config_.backend_base_url,
                                                    config_.backend_model);
      else
        throw InvalidArgumentError("unknown backend type: " + config_.backend_type);
      gateway_ = std::make_unique<LlmGateway>(
          config_.templates_dir, backend,
          cassette_mode_from_string(config_.cassette_mode), config_.cassette_path);
    }
    return *gateway_;
  }

  EmbeddingProvider& embedder() {
    if (!embedder_) embedder_ = std::make_unique<HashingEmbedder>();
    return *embedder_;
  }

  ToolRegistry load_registry() {
    require_artifact("registry.jsonl", "ingest");
    return ToolRegistry::import_snapshot(artifact("registry.jsonl").string());
  }

  PrimitiveStore load_primitives() {
    require_artifact("primitives.jsonl", "primitives");
    return PrimitiveStore::load(artifact("primitives.jsonl").string());
  }

  std::vector<Sample> load_positives() {
    require_artifact("positives.jsonl", "requests");
    std::vector<Sample> positives;
    for (const auto& record : read_jsonl(artifact("positives.jsonl").string()))
      positives.push_back(Sample::from_json(record));
    return positives;
  }

  StageReport ingest() {
    StageReport report{"ingest", {}, {}};
    if (config_.catalog.empty()) throw DependencyError("config has no catalog path");
    auto entries = ingest_catalog(config_.catalog);
    report.counts["catalog"] = entries.size();
    auto filtered = filter_servers(entries, config_.min_stars);
    report.counts["filtered"] = filtered.size();
    auto deduped = dedup_servers(filtered, config_.dedup_threshold, embedder());
    report.counts["deduped"] = deduped.size();
    auto sampled = deduped;
    if (config_.sample_servers > 0 && config_.sample_servers < deduped.size())
      sampled = stratified_sample_servers(deduped, config_.sample_servers, config_.seed);
    report.counts["sampled"] = sampled.size();
    if (!config_.dry_run) {
      write_manifest();
      ToolRegistry(sampled).export_snapshot(artifact("registry.jsonl").string());
    }
    return report;
  }

  StageReport primitives() {
    StageReport report{"primitives", {}, {}};
    ToolRegistry registry = load_registry();
    if (config_.server_command.empty())
      throw DependencyError("config has no server_command for executability validation");

    if (config_.dry_run) {
      report.counts["tools"] = registry.tool_ids().size();
      report.counts["planned_candidates"] =
          registry.tool_ids().size() * 2 * static_cast<size_t>(config_.primitives_per_tool);
      return report;
    }

    StdioClient client;
    client.connect(config_.server_command, config_.server_args);

    PrimitiveStore store;
    auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    for (const auto& tool_id : registry.tool_ids()) {
      const ToolSpec& spec = registry.tool(tool_id);
      for (Coverage coverage : {Coverage::RequiredOnly, Coverage::FullyPopulated}) {
        std::vector<ToolPrimitive> candidates;
        try {
          candidates = generate_candidates(spec, coverage, config_.primitives_per_tool,
                                           gateway());
        } catch (const StageError& e) {
          report.rejections.push_back(tool_id + ": " + e.what());
          continue;
        }
        for (auto& candidate : candidates) {
          ++report.counts["candidates"];
          auto validated = validate_primitive(
              std::move(candidate), spec,
              [&](const ToolCall& call) { return client.call_tool(call); },
              ErrorMarkerConfig{}, timeout);
          if (validated.verdict.valid()) {
            if (!store.contains(validated.primitive_id)) store.admit(validated);
          } else {
            report.rejections.push_back(validated.primitive_id + ": " +
                                        to_string(validated.verdict.variant) + ": " +
                                        validated.verdict.detail);
          }
        }
      }
    }
    report.counts["admitted"] = store.size();
    write_manifest();
    store.save(artifact("primitives.jsonl").string());
    return report;
  }

  StageReport trajectories() {
    StageReport report{"trajectories", {}, {}};
    ToolRegistry registry = load_registry();
    PrimitiveStore store = load_primitives();
    auto pool = store.all();
    if (pool.empty()) throw DependencyError("primitive store is empty; run 'primitives'");

    if (config_.dry_run) {
      report.counts["planned"] = 3 * static_cast<size_t>(config_.trajectories_per_pattern);
      return report;
    }

    auto rng = substream(config_.seed, "trajectories");
    std::vector<json> records;
    for (Pattern pattern : {Pattern::Sequential, Pattern::Parallel, Pattern::Conditional}) {
      for (int i = 0; i < config_.trajectories_per_pattern; ++i) {
        int span = config_.max_trajectory_length - config_.min_trajectory_length + 1;
        int length = config_.min_trajectory_length +
                     static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(span, 1)));
        if (pattern == Pattern::Conditional && length < 2) length = 2;
        // Rotate the pool so different trajectories see different primitives.
        std::vector<ToolPrimitive> rotated = pool;
        size_t shift = rng() % pool.size();
        std::rotate(rotated.begin(),
                    rotated.begin() + static_cast<long>(shift), rotated.end());
        try {
          Trajectory trajectory =
              compose(rotated, pattern, length, gateway(), store, registry);
          records.push_back(trajectory.to_json());
          ++report.counts["composed"];
        } catch (const StageError& e) {
          report.rejections.push_back(to_string(pattern) + ": " + e.what());
        } catch (const InvalidArgumentError& e) {
          report.rejections.push_back(to_string(pattern) + ": " + e.what());
        }
      }
    }
    write_manifest();
    write_jsonl(artifact("trajectories.jsonl").string(), records);
    return report;
  }

  StageReport requests() {
    StageReport report{"requests", {}, {}};
    PrimitiveStore store = load_primitives();
    require_artifact("trajectories.jsonl", "trajectories");
    auto trajectory_records = read_jsonl(artifact("trajectories.jsonl").string());
    report.counts["trajectories"] = trajectory_records.size();

    if (config_.dry_run) return report;

    auto rng = substream(config_.seed, "requests.ambiguity");
    std::vector<json> positives;
    std::set<std::string> ids;
    for (const auto& record : trajectory_records) {
      Trajectory trajectory = Trajectory::from_json(record);
      try {
        UserRequest request = synthesize_request(trajectory, gateway(), store);
        if (std::uniform_real_distribution<double>(0, 1)(rng) <
            config_.ambiguity_probability)
          request = apply_referential_ambiguity(std::move(request), trajectory, store);
        std::string sample_id =
            "sample_" + hex64(fnv1a64(canonical_dump(trajectory.to_json()) + request.text));
        if (!ids.insert(sample_id).second) continue;
        std::string rejection;
        auto sample = validate_sample(request, trajectory, gateway(), sample_id, &rejection);
        if (sample) {
          positives.push_back(sample->to_json());
          ++report.counts["positives"];
        } else {
          report.rejections.push_back(sample_id + ": " + rejection);
        }
      } catch (const StageError& e) {
        report.rejections.push_back(e.what());
      }
    }
    write_manifest();
    write_jsonl(artifact("positives.jsonl").string(), positives);
    return report;
  }

  StageReport icp() {
    StageReport report{"icp", {}, {}};
    PrimitiveStore store = load_primitives();
    auto positives = load_positives();
    report.counts["positives"] = positives.size();
    if (config_.dry_run) return report;

    std::vector<json> records;
    for (const auto& sample : positives) {
      auto assignments = identify_icps(sample, gateway(), store);
      for (const auto& assignment : assignments) {
        json record = assignment.to_json();
        record["sample_id"] = sample.sample_id;
        records.push_back(record);
        ++report.counts["assignments"];
      }
    }
    write_manifest();
    write_jsonl(artifact("icps.jsonl").string(), records);
    return report;
  }

  StageReport mutate() {
    StageReport report{"mutate", {}, {}};
    require_artifact("icps.jsonl", "icp");
    auto positives = load_positives();
    auto icp_records = read_jsonl(artifact("icps.jsonl").string());
    report.counts["assignments"] = icp_records.size();
    if (config_.dry_run) return report;

    std::map<std::string, std::vector<IcpAssignment>> by_sample;
    std::vector<std::string> sample_order;
    for (const auto& record : icp_records) {
      std::string sample_id = record.at("sample_id").get<std::string>();
      if (!by_sample.count(sample_id)) sample_order.push_back(sample_id);
      by_sample[sample_id].push_back(IcpAssignment::from_json(record));
    }

    std::vector<MutationStrategy> strategies(kSubstitutionStrategies.begin(),
                                             kSubstitutionStrategies.end());
    std::vector<json> pool_records;
    std::vector<json> variant_records;
    for (const auto& sample_id : sample_order) {
      std::vector<MutationPool> pools;
      for (const auto& assignment : by_sample[sample_id]) {
        auto substitutions = generate_substitutions(assignment, strategies, gateway(),
                                                    embedder(), config_.per_strategy);
        MutationPool pool = filter_pool(
            build_pool(assignment, sample_id, std::move(substitutions)), config_.theta);
        pool_records.push_back(pool.to_json());
        pools.push_back(std::move(pool));
      }
      if (pools.empty()) continue;
      auto variants =
          filter_variants(combine(pools, config_.combine_cap, config_.seed), config_.theta);
      for (const auto& variant : variants) {
        variant_records.push_back(variant.to_json());
        ++report.counts["variants"];
      }
    }
    report.counts["pools"] = pool_records.size();
    write_manifest();
    write_jsonl(artifact("pools.jsonl").string(), pool_records);
    write_jsonl(artifact("variants.jsonl").string(), variant_records);
    return report;
  }

  StageReport sample() {
    StageReport report{"sample", {}, {}};
    require_artifact("variants.jsonl", "mutate");
    std::vector<MutationVariant> variants;
    for (const auto& record : read_jsonl(artifact("variants.jsonl").string()))
      variants.push_back(MutationVariant::from_json(record));
    report.counts["variants"] = variants.size();
    report.counts["target"] = config_.negatives_total;
    if (config_.dry_run) return report;

    auto [selected, manifest] =
        subsample(variants, config_.negatives_total, config_.bins, config_.seed);
    report.counts["selected"] = selected.size();
    std::vector<json> selected_records, manifest_records;
    for (const auto& variant : selected) selected_records.push_back(variant.to_json());
    for (const auto& record : manifest) manifest_records.push_back(record.to_json());
    write_manifest();
    write_jsonl(artifact("selected.jsonl").string(), selected_records);
    write_jsonl(artifact("selection_manifest.jsonl").string(), manifest_records);
    return report;
  }

  StageReport build() {
    StageReport report{"build", {}, {}};
    PrimitiveStore store = load_primitives();
    ToolRegistry registry = load_registry();
    auto positives = load_positives();
    require_artifact("selected.jsonl", "sample");
    std::vector<MutationVariant> selected;
    for (const auto& record : read_jsonl(artifact("selected.jsonl").string()))
      selected.push_back(MutationVariant::from_json(record));
    report.counts["selected"] = selected.size();
    if (config_.dry_run) return report;

    std::map<std::string, const Sample*> by_id;
    for (const auto& positive : positives) by_id[positive.sample_id] = &positive;

    std::vector<Sample> negatives;
    std::vector<json> negative_records;
    for (const auto& variant : selected) {
      if (variant.coordinates.empty()) continue;
      auto it = by_id.find(variant.coordinates.front().sample_id);
      if (it == by_id.end())
        throw IntegrityError("variant " + variant.variant_id +
                             " references missing sample");
      Sample negative = materialize_negative(*it->second, variant, store);
      negative_records.push_back(negative.to_json());
      negatives.push_back(std::move(negative));
    }
    report.counts["negatives"] = negatives.size();

    auto pairs = build_preference_pairs(positives, negatives, store, registry,
                                        config_.distractors, config_.seed);
    report.counts["pairs"] = pairs.size();
    std::vector<json> pair_records;
    for (const auto& pair : pairs) pair_records.push_back(pair.to_json());
    write_manifest();
    write_jsonl(artifact("negatives.jsonl").string(), negative_records);
    write_jsonl(artifact("pairs.jsonl").string(), pair_records);
    return report;
  }

  StageReport export_datasets() {
    StageReport report{"export", {}, {}};
    PrimitiveStore store = load_primitives();
    auto positives = load_positives();
    require_artifact("pairs.jsonl", "build");
    auto pairs = import_dpo(artifact("pairs.jsonl").string());
    report.counts["positives"] = positives.size();
    report.counts["pairs"] = pairs.size();
    if (config_.dry_run) return report;

    write_manifest();
    export_sft(positives, artifact("sft.jsonl").string(), store);
    export_dpo(pairs, artifact("dpo.jsonl").string());
    return report;
  }

  StageReport evaluate() {
    StageReport report{"evaluate", {}, {}};
    PrimitiveStore store = load_primitives();
    ToolRegistry registry = load_registry();
    auto positives = load_positives();
    require_artifact("icps.jsonl", "icp");
    auto icp_records = read_jsonl(artifact("icps.jsonl").string());
    report.counts["records"] = positives.size();
    if (config_.dry_run) return report;

    std::map<std::string, std::vector<GoldIcp>> gold_icps;
    for (const auto& record : icp_records)
      gold_icps[record.at("sample_id").get<std::string>()].push_back(
          GoldIcp{record.at("step").get<int>(),
                  record.at("parameter").get<std::string>(), record.at("value")});

    // Self-evaluation of the synthesized positives: prediction = gold.
    std::vector<EvalRecord> records;
    for (const auto& sample : positives) {
      EvalRecord record;
      record.request = sample.request.text;
      for (const auto& call : concrete_calls(sample.trajectory, store))
        record.gold.push_back(EvalCall{call.at("tool_id").get<std::string>(),
                                       call.at("arguments")});
      record.predicted = record.gold;
      record.gold_icps = gold_icps[sample.sample_id];
      record.predicted_response = sample.response_note;
      records.push_back(std::move(record));
    }

    MetricsReport metrics = compute_metrics(records, registry);
    size_t skipped = 0;
    for (const char* dimension : kJudgedDimensions) {
      double sum = 0;
      size_t judged = 0;
      for (const auto& record : records) {
        auto score = judge_dimension(dimension, record, gateway(), registry);
        if (score) {
          sum += *score;
          ++judged;
        } else {
          ++skipped;
        }
      }
      metrics.quality_dimensions[dimension] = judged == 0 ? 0.0 : sum / judged;
    }
    double conciseness_total = 0;
    for (const auto& record : records)
      conciseness_total += call_conciseness(record.predicted, record.gold);
    metrics.quality_dimensions["CallConciseness"] =
        records.empty() ? 0.0 : conciseness_total / records.size();
    report.counts["judge_skipped"] = skipped;

    std::vector<json> verdicts;
    for (size_t i = 0; i < records.size(); ++i)
      verdicts.push_back(json{{"record", i},
                              {"task_completed", task_completed(records[i], registry)},
                              {"intent_aligned", intent_aligned(records[i], registry)}});
    write_manifest();
    write_jsonl(artifact("verdicts.jsonl").string(), verdicts);
    std::ofstream out(artifact("metrics.json"));
    out << canonical_dump(metrics.to_json()) << "\n";
    return report;
  }

  PipelineConfig config_;
  std::unique_ptr<LlmGateway> gateway_;
  std::unique_ptr<EmbeddingProvider> embedder_;
};

}  // namespace toolforge
