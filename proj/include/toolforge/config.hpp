#pragma once

#include "toolforge/common.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace toolforge {

struct PipelineConfig {
  std::uint64_t seed = 0;
  bool seed_set = false;

  std::string catalog;
  std::string run_dir = "run";
  std::string templates_dir = "fixtures/templates";

  // tool_registry
  long min_stars = 0;
  double dedup_threshold = 0.8;
  size_t sample_servers = 0;  // 0 = keep all

  // execution_env
  std::string server_command;
  std::vector<std::string> server_args;
  int timeout_ms = 30000;

  // primitive_forge
  int primitives_per_tool = 4;

  // trajectory_composer
  int min_trajectory_length = 2;
  int max_trajectory_length = 4;
  int trajectories_per_pattern = 2;

  // request_synthesis
  double ambiguity_probability = 1.0;

  // mutation_engine
  double theta = 0.3;
  int per_strategy = 3;
  size_t combine_cap = 100000;

  // subsampler
  size_t negatives_total = 40;  // N
  size_t bins = 5;              // L

  // dataset_builder
  size_t distractors = 8;

  // llm_gateway
  std::string backend_type = "scripted";  // scripted | http
  std::string backend_base_url;
  std::string backend_model;
  std::string cassette_mode = "passthrough";  // record | replay | passthrough
  std::string cassette_path;

  int jobs = 1;
  bool dry_run = false;

  json to_json() const {
    return json{{"seed", seed},
                {"catalog", catalog},
                {"run_dir", run_dir},
                {"templates_dir", templates_dir},
                {"min_stars", min_stars},
                {"dedup_threshold", dedup_threshold},
                {"sample_servers", sample_servers},
                {"server_command", server_command},
                {"server_args", server_args},
                {"timeout_ms", timeout_ms},
                {"primitives_per_tool", primitives_per_tool},
                {"min_trajectory_length", min_trajectory_length},
                {"max_trajectory_length", max_trajectory_length},
                {"trajectories_per_pattern", trajectories_per_pattern},
                {"ambiguity_probability", ambiguity_probability},
                {"theta", theta},
                {"per_strategy", per_strategy},
                {"combine_cap", combine_cap},
                {"negatives_total", negatives_total},
                {"bins", bins},
                {"distractors", distractors},
                {"backend_type", backend_type},
                {"backend_base_url", backend_base_url},
                {"backend_model", backend_model},
                {"cassette_mode", cassette_mode},
                {"cassette_path", cassette_path}};
  }

  static PipelineConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("cannot open config " + path);
    json raw;
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError("config " + path + ": " + e.what());
    }
    PipelineConfig config;
    if (raw.contains("seed")) {
      config.seed = raw["seed"].get<std::uint64_t>();
      config.seed_set = true;
    }
    config.catalog = raw.value("catalog", config.catalog);
    config.run_dir = raw.value("run_dir", config.run_dir);
    config.templates_dir = raw.value("templates_dir", config.templates_dir);
    config.min_stars = raw.value("min_stars", config.min_stars);
    config.dedup_threshold = raw.value("dedup_threshold", config.dedup_threshold);
    config.sample_servers = raw.value("sample_servers", config.sample_servers);
    config.server_command = raw.value("server_command", config.server_command);
    config.server_args = raw.value("server_args", config.server_args);
    config.timeout_ms = raw.value("timeout_ms", config.timeout_ms);
    config.primitives_per_tool = raw.value("primitives_per_tool", config.primitives_per_tool);
    config.min_trajectory_length =
        raw.value("min_trajectory_length", config.min_trajectory_length);
    config.max_trajectory_length =
        raw.value("max_trajectory_length", config.max_trajectory_length);
    config.trajectories_per_pattern =
        raw.value("trajectories_per_pattern", config.trajectories_per_pattern);
    config.ambiguity_probability =
        raw.value("ambiguity_probability", config.ambiguity_probability);
    config.theta = raw.value("theta", config.theta);
    config.per_strategy = raw.value("per_strategy", config.per_strategy);
    config.combine_cap = raw.value("combine_cap", config.combine_cap);
    config.negatives_total = raw.value("negatives_total", config.negatives_total);
    config.bins = raw.value("bins", config.bins);
    config.distractors = raw.value("distractors", config.distractors);
    config.backend_type = raw.value("backend_type", config.backend_type);
    config.backend_base_url = raw.value("backend_base_url", config.backend_base_url);
    config.backend_model = raw.value("backend_model", config.backend_model);
    config.cassette_mode = raw.value("cassette_mode", config.cassette_mode);
    config.cassette_path = raw.value("cassette_path", config.cassette_path);
    return config;
  }

  void validate() const {
    if (!seed_set) throw InvalidArgumentError("seed is mandatory");
    if (dedup_threshold < 0 || dedup_threshold > 1)
      throw InvalidArgumentError("dedup_threshold must be in [0,1]");
    if (theta < 0) throw InvalidArgumentError("theta must be >= 0");
    if (timeout_ms <= 0) throw InvalidArgumentError("timeout_ms must be > 0");
    if (bins < 1) throw InvalidArgumentError("bins must be >= 1");
    if (ambiguity_probability < 0 || ambiguity_probability > 1)
      throw InvalidArgumentError("ambiguity_probability must be in [0,1]");
  }
};

}  // namespace toolforge
