// Acceptance suite: one printed PASS/FAIL line per criterion, nonzero exit on
// any failure. Each criterion is self-contained and enforces its own time
// budget.

#include "toolforge/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace toolforge;
namespace fs = std::filesystem;

namespace {

struct AcceptanceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw AcceptanceFailure(message);
}

void require_close(double actual, double expected, double tolerance,
                   const std::string& message) {
  if (!(std::abs(actual - expected) <= tolerance))
    throw AcceptanceFailure(message + " (got " + std::to_string(actual) + ", want " +
                            std::to_string(expected) + ")");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_command(const std::string& command) {
  int status = std::system(command.c_str());
  if (status == -1) throw AcceptanceFailure("failed to launch: " + command);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

// ---------------------------------------------------------------------------
// Criterion 1: brewery worked example under cassette replay.

void criterion_worked_example() {
  std::ifstream in(fs::path(FIXTURES_DIR) / "brewery_sample.json");
  require(static_cast<bool>(in), "missing fixtures/brewery_sample.json");
  json fixture = json::parse(in);

  PrimitiveStore store;
  for (const auto& record : fixture.at("primitives"))
    store.admit(ToolPrimitive::from_json(record));
  Sample sample = Sample::from_json(fixture.at("sample"));

  fs::path cassette = fs::temp_directory_path() / "acceptance_brewery_cassette.jsonl";
  fs::remove(cassette);
  {
    LlmGateway recorder(fs::path(FIXTURES_DIR) / "templates",
                        std::make_shared<ScriptedBackend>(), CassetteMode::Record,
                        cassette.string());
    identify_icps(sample, recorder, store);
  }

  // The timed run replays the cassette; the backend must stay untouched.
  auto backend = std::make_shared<QueueBackend>(std::vector<std::string>{});
  LlmGateway replay(fs::path(FIXTURES_DIR) / "templates", backend, CassetteMode::Replay,
                    cassette.string());
  auto started = std::chrono::steady_clock::now();
  auto assignments = identify_icps(sample, replay, store);
  auto ict = compute_ict(assignments, sample.trajectory);
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  fs::remove(cassette);

  std::set<std::pair<int, std::string>> found;
  std::map<std::string, json> values;
  for (const auto& assignment : assignments) {
    found.insert({assignment.step, assignment.parameter});
    values[assignment.parameter] = assignment.value;
  }
  std::set<std::pair<int, std::string>> expected = {
      {1, "by_type"}, {1, "by_city"}, {1, "by_state"}, {3, "size"}};
  require(found == expected, "ICP set differs from the worked example");
  require(values["by_type"] == json("micro") && values["by_city"] == json("Denver") &&
              values["by_state"] == json("CO") && values["size"] == json(3),
          "ICP values differ from ('micro', 'Denver', 'CO', 3)");
  require(ict == IctSet{1, 3}, "ICT must be exactly the search and random steps");
  require(backend->calls == 0, "replay run must not touch the backend");
  require(elapsed.count() < 1000, "replay run exceeded 1 s");
}

// ---------------------------------------------------------------------------
// Criterion 2: quota apportionment formula.

void criterion_quota_formula() {
  auto plan = allocate_quotas({6, 3, 1}, 5);
  require(plan.quotas == std::vector<size_t>{3, 1, 1}, "[6,3,1]/N=5 must give [3,1,1]");
  plan = allocate_quotas({5, 5}, 5);
  require(plan.quotas == std::vector<size_t>{3, 2}, "[5,5]/N=5 must give [3,2]");

  std::mt19937_64 rng(1019);
  for (int trial = 0; trial < 1000; ++trial) {
    size_t g_count = 1 + rng() % 8;
    std::vector<size_t> sizes(g_count);
    size_t population = 0, nonempty = 0;
    for (auto& size : sizes) {
      size = rng() % 25;
      population += size;
      if (size > 0) ++nonempty;
    }
    if (nonempty == 0) continue;
    size_t total = nonempty + rng() % (population - nonempty + 1);
    auto trial_plan = allocate_quotas(sizes, total);
    size_t sum = 0;
    for (size_t g = 0; g < g_count; ++g) {
      sum += trial_plan.quotas[g];
      if (sizes[g] == 0)
        require(trial_plan.quotas[g] == 0, "empty cluster must get quota 0");
      else
        require(trial_plan.quotas[g] >= 1 && trial_plan.quotas[g] <= sizes[g],
                "quota must stay within [1, cluster size]");
    }
    require(sum == total, "quotas must sum to the budget");
  }
}

// ---------------------------------------------------------------------------
// Criterion 3: stratified bin sampling.

MutationVariant scored_variant(const std::string& id, double score) {
  MutationVariant variant;
  variant.variant_id = id;
  variant.score = score;
  VariantCoordinate coord{"s", 1, "p",
                          MutationRecord{MutationStrategy::Irrelevance, json("x"),
                                         false, score}};
  variant.coordinates.push_back(coord);
  return variant;
}

void criterion_stratified_binning() {
  std::vector<MutationVariant> cluster;
  for (int i = 0; i < 10; ++i)
    cluster.push_back(scored_variant("v" + std::to_string(i), 0.1 * i));

  auto baseline = stratified_bin_sample(cluster, 5, 5, 4242);
  require(baseline.size() == 5, "quota 5 must select 5 variants");
  for (size_t bin = 0; bin < 5; ++bin) {
    size_t in_bin = 0;
    for (const auto& variant : baseline) {
      // With 10 sorted scores and 5 bins, bin l holds scores 0.2l and 0.2l+0.1.
      double low = 0.2 * bin - 1e-9, high = 0.2 * bin + 0.1 + 1e-9;
      if (variant.score >= low && variant.score <= high) ++in_bin;
    }
    require(in_bin == 1, "each of the 5 bins must contribute exactly one pick");
  }

  for (int repeat = 0; repeat < 100; ++repeat) {
    auto again = stratified_bin_sample(cluster, 5, 5, 4242);
    require(again.size() == baseline.size(), "repeat changed the selection size");
    for (size_t i = 0; i < again.size(); ++i)
      require(again[i].variant_id == baseline[i].variant_id,
              "selection must be deterministic under a fixed seed");
  }

  // Min- and max-score bins are always represented when the quota covers L.
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    size_t bins = 2 + rng() % 5;
    size_t size = bins + rng() % 20;
    std::vector<MutationVariant> random_cluster;
    for (size_t i = 0; i < size; ++i)
      random_cluster.push_back(scored_variant("r" + std::to_string(i),
                                              static_cast<double>(rng() % 1000)));
    size_t quota = bins + rng() % (size - bins + 1);
    if (quota == size) continue;  // trivial copy path
    auto picks = stratified_bin_sample(random_cluster, quota, bins, rng());

    std::vector<double> scores;
    for (const auto& variant : random_cluster) scores.push_back(variant.score);
    std::sort(scores.begin(), scores.end());
    size_t per_bin = size / bins, extra = size % bins;
    size_t first_bin_size = per_bin + (extra > 0 ? 1 : 0);
    double low_cut = scores[first_bin_size - 1];
    double high_cut = scores[size - per_bin];
    bool low_hit = false, high_hit = false;
    for (const auto& variant : picks) {
      if (variant.score <= low_cut) low_hit = true;
      if (variant.score >= high_cut) high_hit = true;
    }
    require(low_hit, "min-score bin unrepresented despite quota >= L");
    require(high_hit, "max-score bin unrepresented despite quota >= L");
  }
}

// ---------------------------------------------------------------------------
// Criterion 4: mutation pool composition and Cartesian combination.

void criterion_mutation_pool() {
  HashingEmbedder embedder;
  MutationRecord thirty{MutationStrategy::Irrelevance, json(30), false, 0.0};
  require(score_complexity(json(3), thirty, embedder) == 9.0,
          "numeric complexity for 3 -> 30 must be exactly 9.0");

  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 50; ++trial) {
    size_t pool_count = 1 + rng() % 4;  // <= 4 coordinates
    std::vector<MutationPool> pools;
    size_t product = 1;
    for (size_t g = 0; g < pool_count; ++g) {
      IcpAssignment assignment;
      assignment.step = static_cast<int>(g + 1);
      assignment.parameter = "p" + std::to_string(g);
      assignment.value = json(static_cast<int>(1 + rng() % 9));

      std::vector<MutationRecord> substitutions;
      size_t subs = 1 + rng() % 3;  // pool size = subs + Original + Deletion <= 5
      for (size_t s = 0; s < subs; ++s) {
        // Distinct values, as generate_substitutions dedups upstream.
        MutationRecord record{MutationStrategy::Irrelevance,
                              json(static_cast<int>(100 + 10 * g + s)), false, 0.0};
        record.complexity = score_complexity(assignment.value, record, embedder);
        substitutions.push_back(record);
      }
      MutationPool pool = build_pool(assignment, "sample_acc", substitutions);

      bool has_original = false, has_deletion = false;
      for (const auto& record : pool.records) {
        if (record.strategy == MutationStrategy::Original) has_original = true;
        if (record.is_deletion) has_deletion = true;
      }
      require(has_original && has_deletion,
              "every pool must contain the Original and Deletion choices");

      // The theta filter never removes Original or Deletion, even at extremes.
      MutationPool strict = filter_pool(pool, 1e9);
      bool kept_original = false, kept_deletion = false;
      for (const auto& record : strict.records) {
        if (record.strategy == MutationStrategy::Original) kept_original = true;
        if (record.is_deletion) kept_deletion = true;
      }
      require(kept_original && kept_deletion,
              "theta filter removed Original or Deletion");

      product *= pool.records.size();
      pools.push_back(std::move(pool));
    }

    auto variants = combine(pools, 1000000, 7);
    require(variants.size() == product - 1,
            "combine must enumerate the Cartesian product minus all-Original");
    std::set<std::string> ids;
    for (const auto& variant : variants) {
      ids.insert(variant.variant_id);
      bool all_original = true;
      for (const auto& coord : variant.coordinates)
        if (coord.choice.strategy != MutationStrategy::Original) all_original = false;
      require(!all_original, "the all-Original variant must be excluded");
    }
    require(ids.size() == variants.size(), "variant ids must be unique");
  }
}

// ---------------------------------------------------------------------------
// Criterion 5: DPO loss reference behavior.

double loss_at(double beta, double margin_over_beta) {
  DpoLossInput input;
  input.beta = beta;
  input.logp_w_policy = margin_over_beta;
  return dpo_loss(input);
}

void criterion_dpo_loss() {
  require_close(loss_at(1.0, 0.0), std::log(2.0), 1e-12, "zero margin must give ln 2");

  std::mt19937_64 rng(88);
  for (int point = 0; point < 1000; ++point) {
    double margin = -10.0 + 20.0 * (static_cast<double>(rng() % 100000) / 100000.0);
    double beta = 0.01 + 2.0 * (static_cast<double>(rng() % 100000) / 100000.0);
    // dpo_loss(beta, m) == dpo_loss(1, beta * m)
    require_close(loss_at(beta, margin), loss_at(1.0, beta * margin), 1e-12,
                  "beta-scaling identity violated");
  }

  double previous = std::numeric_limits<double>::infinity();
  for (double margin = -20.0; margin <= 20.0; margin += 0.25) {
    double loss = loss_at(1.0, margin);
    require(loss < previous, "loss must strictly decrease in the margin");
    previous = loss;
  }

  require(std::isfinite(loss_at(1.0, 1e4)), "overflow at margin +1e4");
  require(std::isfinite(loss_at(1.0, -1e4)), "overflow at margin -1e4");
  require_close(loss_at(1.0, -1e4), 1e4, 1e-6, "large negative margin asymptote");
}

// ---------------------------------------------------------------------------
// Criterion 6: metric oracle equivalence.

ToolRegistry metric_registry() {
  std::vector<ServerEntry> entries;
  ServerEntry server;
  server.id = "srv_metrics";
  server.name = "Metrics Fixture";
  server.stars = 1;
  server.accessible = true;
  server.has_docs = true;
  server.domain_tags = {"misc"};
  for (const std::string& name : {"alpha/run", "beta/run", "gamma/run"}) {
    ToolSpec tool;
    tool.tool_id = name;
    tool.name = name;
    tool.description = "fixture tool";
    tool.parameters = {ParameterSpec::from_json(
        json{{"name", "value"}, {"kind", "string"}, {"required", true}})};
    server.tools.push_back(tool);
  }
  entries.push_back(server);
  return ToolRegistry(entries);
}

// Independent brute-force recomputation of the six metrics.
struct BruteMetrics {
  double acc_task = 0, acc_calling = 0, precision = 0, recall = 0;
  double acc_icp = 0, acc_intent = 0;
  size_t icp_considered = 0;
};

BruteMetrics brute_force(const std::vector<EvalRecord>& records,
                         const ToolRegistry& registry) {
  BruteMetrics out;
  size_t icp_matched = 0;
  for (const auto& record : records) {
    bool valid = true;
    for (const auto& call : record.predicted) {
      const ToolSpec* spec = registry.find_tool(call.tool_id);
      if (!spec || !check_arguments(*spec, call.arguments).empty()) valid = false;
    }

    size_t hits = 0;
    std::set<std::string> gold_tools;
    for (const auto& call : record.gold) gold_tools.insert(call.tool_id);
    for (const auto& tool : gold_tools)
      for (const auto& call : record.predicted)
        if (call.tool_id == tool) {
          ++hits;
          break;
        }
    double precision = record.predicted.empty()
                           ? (gold_tools.empty() ? 1.0 : 0.0)
                           : static_cast<double>(hits) / record.predicted.size();
    double recall =
        gold_tools.empty() ? 1.0 : static_cast<double>(hits) / gold_tools.size();
    out.precision += precision;
    out.recall += recall;

    bool completed = recall == 1.0 && valid;
    if (completed) out.acc_task += 1;
    if (valid) out.acc_calling += 1;

    bool all_icps_match = true;
    for (const auto& icp : record.gold_icps) {
      if (icp.step < 1 || icp.step > static_cast<int>(record.gold.size())) {
        all_icps_match = false;
        continue;
      }
      const std::string& tool = record.gold[icp.step - 1].tool_id;
      std::optional<json> predicted;
      for (const auto& call : record.predicted) {
        if (call.tool_id != tool || !call.arguments.contains(icp.parameter)) continue;
        predicted = call.arguments.at(icp.parameter);
        break;
      }
      bool matched = predicted && normalize_for_match(value_to_text(*predicted)) ==
                                      normalize_for_match(value_to_text(icp.value));
      if (!matched) all_icps_match = false;
      bool selected = false;
      for (const auto& call : record.predicted)
        if (call.tool_id == tool) selected = true;
      if (selected) {
        ++out.icp_considered;
        if (matched) ++icp_matched;
      }
    }
    if (completed && precision == 1.0 && recall == 1.0 && all_icps_match)
      out.acc_intent += 1;
  }
  size_t n = records.size();
  out.acc_task /= n;
  out.acc_calling /= n;
  out.precision /= n;
  out.recall /= n;
  out.acc_intent /= n;
  out.acc_icp = out.icp_considered == 0
                    ? 0.0
                    : static_cast<double>(icp_matched) / out.icp_considered;
  return out;
}

std::vector<EvalRecord> random_records(std::mt19937_64& rng, size_t count) {
  const std::vector<std::string> tools{"alpha/run", "beta/run", "gamma/run",
                                       "missing/tool"};
  const std::vector<std::string> values{"one", "two", "three"};
  std::vector<EvalRecord> records;
  for (size_t i = 0; i < count; ++i) {
    EvalRecord record;
    size_t gold_count = 1 + rng() % 3;
    for (size_t g = 0; g < gold_count; ++g) {
      EvalCall call{tools[rng() % 3], json{{"value", values[rng() % values.size()]}}};
      record.gold.push_back(call);
      if (rng() % 2)
        record.gold_icps.push_back(
            GoldIcp{static_cast<int>(g + 1), "value", call.arguments["value"]});
    }
    size_t pred_count = rng() % 4;
    for (size_t p = 0; p < pred_count; ++p) {
      if (rng() % 2) {
        record.predicted.push_back(record.gold[rng() % record.gold.size()]);
      } else {
        json args = json{{"value", values[rng() % values.size()]}};
        if (rng() % 4 == 0) args["value"] = 7;  // type violation
        record.predicted.push_back(EvalCall{tools[rng() % tools.size()], args});
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

void criterion_metric_oracle() {
  auto registry = metric_registry();
  std::mt19937_64 rng(2024);

  auto fixture = random_records(rng, 20);
  // Include the degenerate conventions explicitly.
  fixture[0].predicted.clear();                       // empty prediction
  fixture[1].predicted = {fixture[1].gold.front()};   // partial recall
  auto report = compute_metrics(fixture, registry);
  auto oracle = brute_force(fixture, registry);

  require_close(report.acc_task, oracle.acc_task, 1e-12, "acc_task mismatch");
  require_close(report.acc_calling, oracle.acc_calling, 1e-12, "acc_calling mismatch");
  require_close(report.precision_tool, oracle.precision, 1e-12, "precision mismatch");
  require_close(report.recall_tool, oracle.recall, 1e-12, "recall mismatch");
  require_close(report.acc_icp, oracle.acc_icp, 1e-12, "acc_icp mismatch");
  require_close(report.acc_intent, oracle.acc_intent, 1e-12, "acc_intent mismatch");
  require(report.denominators.at("icp") == oracle.icp_considered,
          "acc_icp denominator must cover only correctly selected tools");

  for (int trial = 0; trial < 1000; ++trial) {
    auto batch = random_records(rng, 1 + rng() % 5);
    auto metrics = compute_metrics(batch, registry);
    require(metrics.acc_intent <= metrics.acc_task + 1e-12,
            "acc_intent must never exceed acc_task");
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: executability filters against the scripted mock server.

void criterion_executability() {
  fs::path fixture = fs::temp_directory_path() / "acceptance_mock_fixture.json";
  {
    json tools = json::array();
    auto add = [&](const std::string& name, json behavior) {
      json tool;
      tool["name"] = name;
      tool["description"] = "acceptance fixture tool";
      tool["inputSchema"] = json{{"type", "object"}, {"properties", json::object()}};
      tool["behavior"] = std::move(behavior);
      tools.push_back(tool);
    };
    add("acc/ok", json{{"payload", json{{"note", "all good"}}}});
    add("acc/err", json{{"payload", json{{"error", "boom"}}}});
    add("acc/slow", json{{"payload", json{{"note", "late"}}}, {"delay_ms", 1500}});
    std::ofstream out(fixture);
    out << json{{"tools", tools}}.dump() << "\n";
  }

  StdioClient client;
  client.connect(MOCK_SERVER_PATH, {fixture.string()});
  auto wire = [&](const ToolCall& call) { return client.call_tool(call); };
  auto timeout = std::chrono::milliseconds(200);

  auto spec_for = [](const std::string& tool_id) {
    ToolSpec spec;
    spec.tool_id = tool_id;
    spec.name = tool_id;
    spec.parameters = {ParameterSpec::from_json(
        json{{"name", "q"}, {"kind", "string"}, {"required", true}})};
    return spec;
  };
  auto candidate_for = [](const std::string& tool_id, json arguments) {
    ToolPrimitive candidate;
    candidate.primitive_id = "cand_" + tool_id;
    candidate.tool_id = tool_id;
    candidate.instruction = "probe";
    candidate.arguments = std::move(arguments);
    return candidate;
  };

  auto valid = validate_primitive(candidate_for("acc/ok", json{{"q", "x"}}),
                                  spec_for("acc/ok"), wire, {}, timeout);
  require(valid.verdict.variant == Verdict::Valid, "healthy tool must be Valid");

  auto invalid = validate_primitive(candidate_for("acc/ok", json{{"q", 7}}),
                                    spec_for("acc/ok"), wire, {}, timeout);
  require(invalid.verdict.variant == Verdict::InvalidParams,
          "schema-violating candidate must be InvalidParams");

  auto errored = validate_primitive(candidate_for("acc/err", json{{"q", "x"}}),
                                    spec_for("acc/err"), wire, {}, timeout);
  require(errored.verdict.variant == Verdict::ErrorPayload,
          "error-marker payload must be ErrorPayload");

  auto slow = validate_primitive(candidate_for("acc/slow", json{{"q", "x"}}),
                                 spec_for("acc/slow"), wire, {}, timeout);
  require(slow.verdict.variant == Verdict::Timeout, "slow tool must be Timeout");

  PrimitiveStore store;
  store.admit(valid);
  for (const auto& rejected : {invalid, errored, slow}) {
    bool refused = false;
    try {
      store.admit(rejected);
    } catch (const IntegrityError&) {
      refused = true;
    }
    require(refused, "store admitted a non-Valid primitive");
  }
  require(store.size() == 1, "only the Valid primitive may enter the store");

  Trajectory trajectory;
  trajectory.steps = {TrajectoryStep{1, valid.primitive_id, json::object()},
                      TrajectoryStep{2, "prim_fabricated", json::object()}};
  auto unknown = verify_primitive_ids(trajectory, store);
  require(unknown == std::vector<std::string>{"prim_fabricated"},
          "fabricated primitive_id must be reported");
  fs::remove(fixture);
}

// ---------------------------------------------------------------------------
// Criterion 8: catalog dedup.

void criterion_dedup() {
  HashingEmbedder embedder;

  ServerEntry low, high;
  low.id = "srv_low";
  low.name = "Weather Service";
  low.stars = 3;
  low.accessible = true;
  low.has_docs = true;
  high = low;
  high.id = "srv_high";
  high.stars = 90;
  auto survivors = dedup_servers({low, high}, 0.8, embedder);
  require(survivors.size() == 1 && survivors[0].id == "srv_high",
          "identical-name servers must collapse to the max-stars entry");

  std::mt19937_64 rng(4096);
  const std::vector<std::string> names{"alpha tools", "beta weather", "gamma orders",
                                       "alpha tools", "delta notes"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ServerEntry> catalog;
    size_t count = 1 + rng() % 10;
    for (size_t i = 0; i < count; ++i) {
      ServerEntry entry;
      entry.id = "srv_" + std::to_string(trial) + "_" + std::to_string(i);
      entry.name = names[rng() % names.size()];
      entry.stars = static_cast<long>(rng() % 100);
      entry.accessible = true;
      entry.has_docs = true;
      catalog.push_back(entry);
    }
    auto once = dedup_servers(catalog, 0.8, embedder);
    auto twice = dedup_servers(once, 0.8, embedder);
    require(once.size() == twice.size(), "dedup must be idempotent (size)");
    for (size_t i = 0; i < once.size(); ++i)
      require(once[i].id == twice[i].id, "dedup must be idempotent (order/ids)");
  }
}

// ---------------------------------------------------------------------------
// Criterion 9: hermetic end-to-end demo.

fs::path demo_workdir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void run_demo(const fs::path& workdir) {
  std::string command = "cd " + workdir.string() + " && " + TOOLFORGE_CLI_PATH +
                        " demo > demo_stdout.txt 2> demo_stderr.txt";
  int code = run_command(command);
  require(code == 0, "demo exited with code " + std::to_string(code) + " (see " +
                         (workdir / "demo_stderr.txt").string() + ")");
}

void criterion_demo() {
  fs::path first = demo_workdir("acceptance_demo_a");
  fs::path second = demo_workdir("acceptance_demo_b");
  run_demo(first);
  run_demo(second);

  fs::path run_dir = first / "demo_run";
  auto positives = read_jsonl((run_dir / "positives.jsonl").string());
  require(positives.size() >= 10, "demo must produce at least 10 positives");
  auto negatives = read_jsonl((run_dir / "negatives.jsonl").string());
  require(negatives.size() == 40, "demo must produce exactly N=40 negatives");

  // SFT export: every line parses and references a real positive.
  std::set<std::string> positive_ids;
  for (const auto& record : positives)
    positive_ids.insert(record.at("sample_id").get<std::string>());
  auto sft = read_jsonl((run_dir / "sft.jsonl").string());
  require(sft.size() == positives.size(), "SFT export must cover every positive");
  for (const auto& record : sft) {
    require(positive_ids.count(record.at("id").get<std::string>()) == 1,
            "SFT record references an unknown positive");
    require(!record.at("target").get<std::string>().empty(), "empty SFT target");
  }

  // DPO export re-imports losslessly.
  auto pairs = import_dpo((run_dir / "dpo.jsonl").string());
  require(pairs.size() == 40, "DPO export must hold one pair per negative");
  fs::path reexport = first / "dpo_roundtrip.jsonl";
  export_dpo(pairs, reexport.string());
  require(slurp(run_dir / "dpo.jsonl") == slurp(reexport),
          "DPO export must re-import losslessly");

  for (const char* name : {"sft.jsonl", "dpo.jsonl", "pairs.jsonl", "negatives.jsonl",
                           "positives.jsonl", "metrics.json", "selection_manifest.jsonl"})
    require(slurp(first / "demo_run" / name) == slurp(second / "demo_run" / name),
            std::string("demo outputs differ between runs: ") + name);

  // Cassette removed: the replay-mode demo must fail with the backend exit code.
  fs::path broken = demo_workdir("acceptance_demo_broken");
  fs::create_directories(broken / "fixtures");
  for (const auto& entry : fs::directory_iterator(FIXTURES_DIR)) {
    if (entry.path().filename() == "demo_cassette.jsonl") continue;
    fs::copy(entry.path(), broken / "fixtures" / entry.path().filename(),
             fs::copy_options::recursive);
  }
  int code = run_command("cd " + broken.string() + " && " + TOOLFORGE_CLI_PATH +
                         " demo > /dev/null 2>&1");
  require(code == 4, "demo without its cassette must exit with code 4, got " +
                         std::to_string(code));

  fs::remove_all(second);
  fs::remove_all(broken);
  // `first` is kept for criterion 10.
}

// ---------------------------------------------------------------------------
// Criterion 10: negative integrity via tree diff.

void criterion_negative_integrity() {
  fs::path run_dir = fs::temp_directory_path() / "acceptance_demo_a" / "demo_run";
  require(fs::exists(run_dir / "pairs.jsonl"), "criterion 9 demo output missing");

  std::map<std::string, std::set<std::pair<int, std::string>>> mutated_coords;
  for (const auto& record : read_jsonl((run_dir / "selected.jsonl").string())) {
    auto variant = MutationVariant::from_json(record);
    auto& coords = mutated_coords[variant.variant_id];
    for (const auto& coord : variant.coordinates)
      if (coord.choice.strategy != MutationStrategy::Original)
        coords.insert({coord.step, coord.parameter});
  }

  auto pairs = import_dpo((run_dir / "pairs.jsonl").string());
  require(!pairs.empty(), "demo produced no preference pairs");
  for (const auto& pair : pairs) {
    auto it = mutated_coords.find(pair.variant_id);
    require(it != mutated_coords.end(),
            "pair references unknown variant " + pair.variant_id);

    json chosen = json::parse(pair.chosen);
    json rejected = json::parse(pair.rejected);
    require(chosen.at("pattern") == rejected.at("pattern"),
            "mutation must not alter the trajectory pattern");
    const json& chosen_calls = chosen.at("calls");
    const json& rejected_calls = rejected.at("calls");
    require(chosen_calls.size() == rejected_calls.size(),
            "mutation must not add or remove calls");

    std::set<std::pair<int, std::string>> touched;
    for (size_t i = 0; i < chosen_calls.size(); ++i) {
      const json& before = chosen_calls[i];
      const json& after = rejected_calls[i];
      require(before.at("tool_id") == after.at("tool_id"),
              "mutation must not change a call's tool");
      int step = before.at("step").get<int>();
      std::set<std::string> keys;
      for (const auto& [key, value] : before.at("arguments").items()) keys.insert(key);
      for (const auto& [key, value] : after.at("arguments").items()) keys.insert(key);
      for (const auto& key : keys) {
        bool in_before = before.at("arguments").contains(key);
        bool in_after = after.at("arguments").contains(key);
        if (!in_before || !in_after ||
            before.at("arguments").at(key) != after.at("arguments").at(key))
          touched.insert({step, key});
      }
    }
    require(touched == it->second,
            "tree diff of pair " + pair.pair_id +
                " does not equal the variant's mutated ICP coordinates");
  }
  fs::remove_all(fs::temp_directory_path() / "acceptance_demo_a");
}

struct Criterion {
  std::string name;
  std::function<void()> body;
  long budget_ms;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1 worked example ICP/ICT identification", criterion_worked_example, 1000 + 5000},
      {"2 quota apportionment formula", criterion_quota_formula, 5000},
      {"3 stratified bin sampling", criterion_stratified_binning, 5000},
      {"4 mutation pool and Cartesian combination", criterion_mutation_pool, 10000},
      {"5 DPO loss reference behavior", criterion_dpo_loss, 1000},
      {"6 metric oracle equivalence", criterion_metric_oracle, 5000},
      {"7 executability filters", criterion_executability, 10000},
      {"8 catalog dedup", criterion_dedup, 5000},
      {"9 hermetic end-to-end demo", criterion_demo, 60000 * 3},
      {"10 negative integrity tree diff", criterion_negative_integrity, 5000},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto started = std::chrono::steady_clock::now();
    std::string failure;
    try {
      criterion.body();
    } catch (const std::exception& e) {
      failure = e.what();
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    if (failure.empty() && elapsed > criterion.budget_ms)
      failure = "exceeded time budget (" + std::to_string(elapsed) + " ms > " +
                std::to_string(criterion.budget_ms) + " ms)";
    if (failure.empty()) {
      std::cout << "PASS criterion " << criterion.name << " (" << elapsed << " ms)\n";
    } else {
      std::cout << "FAIL criterion " << criterion.name << ": " << failure << "\n";
      ++failures;
    }
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 10 criteria passed\n";
  return 0;
}
