// Command-line driver: composable pipeline stages, a full pipeline run, and
// the hermetic demo (bundled mock server + cassette, no network).

#include "toolforge/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace toolforge;

namespace {

struct CliOptions {
  std::string config_path;
  std::string run_dir;
  std::string catalog;
  std::string server_command;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  bool dry_run = false;
};

PipelineConfig resolve_config(const CliOptions& options) {
  PipelineConfig config;
  if (!options.config_path.empty())
    config = PipelineConfig::from_file(options.config_path);
  // Flags override the config file.
  if (options.seed_given) {
    config.seed = options.seed;
    config.seed_set = true;
  }
  if (!options.run_dir.empty()) config.run_dir = options.run_dir;
  if (!options.catalog.empty()) config.catalog = options.catalog;
  if (!options.server_command.empty()) config.server_command = options.server_command;
  config.jobs = options.jobs;
  config.dry_run = options.dry_run;
  return config;
}

// The demo resolves bundled fixture paths relative to the executable so it
// works from any working directory in a build tree laid out by CMake.
fs::path locate_fixtures(const char* argv0) {
  fs::path exe_dir = fs::absolute(fs::path(argv0)).parent_path();
  for (fs::path dir : {fs::current_path() / "fixtures", exe_dir / "fixtures",
                       exe_dir.parent_path() / "fixtures",
                       exe_dir.parent_path().parent_path() / "fixtures"})
    if (fs::exists(dir / "demo_config.json")) return dir;
  throw DependencyError("cannot locate fixtures/demo_config.json");
}

fs::path locate_mock_server(const char* argv0) {
  fs::path exe_dir = fs::absolute(fs::path(argv0)).parent_path();
  for (fs::path candidate : {exe_dir / "mock_mcp_server",
                             fs::current_path() / "mock_mcp_server"})
    if (fs::exists(candidate)) return candidate;
  return "mock_mcp_server";  // rely on PATH
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intent-aligned tool-use data synthesis pipeline"};
  app.require_subcommand(1);

  CliOptions options;
  app.add_option("--config", options.config_path, "pipeline config file (JSON)");
  app.add_option("--run-dir", options.run_dir, "run directory for artifacts");
  app.add_option("--catalog", options.catalog, "tool-server catalog file");
  app.add_option("--server-command", options.server_command, "MCP server executable");
  auto* seed_opt = app.add_option("--seed", options.seed, "master random seed");
  app.add_option("--jobs", options.jobs, "stage-internal parallelism bound");
  app.add_flag("--dry-run", options.dry_run, "print planned counts without writing");

  for (const auto& stage : Pipeline::stage_names())
    app.add_subcommand(stage, "run the '" + stage + "' stage");
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage in order");
  auto* demo_cmd = app.add_subcommand("demo", "hermetic end-to-end run on bundled fixtures");

  CLI11_PARSE(app, argc, argv);
  options.seed_given = seed_opt->count() > 0;

  auto* active = app.get_subcommands().front();

  if (active == demo_cmd) {
    return run_guarded([&] {
      fs::path fixtures = locate_fixtures(argv[0]);
      CliOptions demo_options = options;
      if (demo_options.config_path.empty())
        demo_options.config_path = (fixtures / "demo_config.json").string();
      PipelineConfig config = resolve_config(demo_options);
      // Resolve fixture-relative paths against the fixtures directory.
      auto resolve = [&](std::string& path) {
        if (!path.empty() && fs::path(path).is_relative() && !fs::exists(path))
          path = (fixtures / path).string();
      };
      resolve(config.catalog);
      resolve(config.templates_dir);
      resolve(config.cassette_path);
      if (config.server_command.empty())
        config.server_command = locate_mock_server(argv[0]).string();
      if (!config.server_args.empty()) resolve(config.server_args.front());
      Pipeline pipeline(config);
      for (const auto& report : pipeline.run_all()) print_report(report);
      std::cout << "demo artifacts written to " << config.run_dir << "\n";
    });
  }

  if (active == pipeline_cmd) {
    return run_guarded([&] {
      Pipeline pipeline(resolve_config(options));
      for (const auto& report : pipeline.run_all()) print_report(report);
    });
  }

  return run_guarded([&] {
    Pipeline pipeline(resolve_config(options));
    print_report(pipeline.run_stage(active->get_name()));
  });
}
