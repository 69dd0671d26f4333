#include <doctest.h>

#include "toolforge/gateway.hpp"
#include "toolforge/scripted_backend.hpp"
#include "toolforge/trajectory.hpp"

#include <filesystem>
#include <fstream>
#include <memory>

using namespace toolforge;

namespace {

ToolRegistry brewery_registry() {
  ServerEntry server;
  server.id = "srv";
  server.name = "brewery";
  server.stars = 1;
  server.accessible = true;
  server.has_docs = true;

  ToolSpec search;
  search.tool_id = "brewery/search";
  search.name = search.tool_id;
  ParameterSpec by_type;
  by_type.name = "by_type";
  by_type.required = true;
  search.parameters.push_back(by_type);

  ToolSpec by_id;
  by_id.tool_id = "brewery/by_id";
  by_id.name = by_id.tool_id;
  ParameterSpec id;
  id.name = "id";
  id.required = true;
  by_id.parameters.push_back(id);

  server.tools = {search, by_id};
  return ToolRegistry({server});
}

PrimitiveStore brewery_store() {
  PrimitiveStore store;
  ToolPrimitive search;
  search.primitive_id = "prim_search";
  search.tool_id = "brewery/search";
  search.instruction = "find micro breweries";
  search.arguments = json{{"by_type", "micro"}};
  search.verdict.variant = Verdict::Valid;
  search.result_digest = json{{"id", "brw_001"}, {"name", "Crooked Stave"}};
  store.admit(search);

  ToolPrimitive lookup;
  lookup.primitive_id = "prim_lookup";
  lookup.tool_id = "brewery/by_id";
  lookup.instruction = "fetch brewery details";
  lookup.arguments = json{{"id", "id_placeholder"}};
  lookup.verdict.variant = Verdict::Valid;
  lookup.result_digest = json{{"id", "brw_001"}, {"detail", "open"}};
  store.admit(lookup);
  return store;
}

Trajectory conditional_pair() {
  Trajectory trajectory;
  trajectory.pattern = Pattern::Conditional;
  trajectory.steps = {TrajectoryStep{1, "prim_search", json::object()},
                      TrajectoryStep{2, "prim_lookup", json::object()}};
  trajectory.data_flow = {FlowEdge{1, "$.id", 2, "id"}};
  return trajectory;
}

}  // namespace

TEST_CASE("structure validation accepts a sound conditional trajectory") {
  auto registry = brewery_registry();
  auto store = brewery_store();
  CHECK(validate_structure(conditional_pair(), store, registry).empty());
}

TEST_CASE("structure validation flags each malformation") {
  auto registry = brewery_registry();
  auto store = brewery_store();

  SUBCASE("indices must be contiguous from 1") {
    auto t = conditional_pair();
    t.steps[1].index = 5;
    CHECK(!validate_structure(t, store, registry).empty());
  }
  SUBCASE("data-flow edges must point forward") {
    auto t = conditional_pair();
    t.data_flow[0] = FlowEdge{2, "$.id", 1, "by_type"};
    CHECK(!validate_structure(t, store, registry).empty());
  }
  SUBCASE("edges must reference existing steps") {
    auto t = conditional_pair();
    t.data_flow[0].consumer_step = 9;
    CHECK(!validate_structure(t, store, registry).empty());
  }
  SUBCASE("edges must target a declared parameter of the consumer tool") {
    auto t = conditional_pair();
    t.data_flow[0].parameter = "upc";
    CHECK(!validate_structure(t, store, registry).empty());
  }
  SUBCASE("conditional requires at least one edge") {
    auto t = conditional_pair();
    t.data_flow.clear();
    CHECK(!validate_structure(t, store, registry).empty());
  }
  SUBCASE("parallel requires a complete, disjoint branch partition") {
    auto t = conditional_pair();
    t.pattern = Pattern::Parallel;
    t.data_flow.clear();
    CHECK(!validate_structure(t, store, registry).empty());  // no branches

    t.branches = {{1}, {2}};
    CHECK(validate_structure(t, store, registry).empty());

    t.branches = {{1}, {1, 2}};  // duplicate membership
    CHECK(!validate_structure(t, store, registry).empty());

    t.branches = {{1}};  // step 2 uncovered
    CHECK(!validate_structure(t, store, registry).empty());
  }
  SUBCASE("edges may not cross parallel branches") {
    auto t = conditional_pair();
    t.pattern = Pattern::Parallel;
    t.branches = {{1}, {2}};
    CHECK(!validate_structure(t, store, registry).empty());
  }
}

TEST_CASE("fabricated primitive ids are reported") {
  auto store = brewery_store();
  auto t = conditional_pair();
  t.steps[1].primitive_id = "prim_invented";
  auto unknown = verify_primitive_ids(t, store);
  REQUIRE(unknown.size() == 1);
  CHECK(unknown[0] == "prim_invented");
}

TEST_CASE("effective arguments apply overrides on top of the primitive") {
  auto store = brewery_store();
  auto t = conditional_pair();
  t.steps[1].overrides["id"] = "brw_001";
  auto args = effective_arguments(t, 2, store);
  CHECK(args.at("id") == "brw_001");
  CHECK(effective_arguments(t, 1, store).at("by_type") == "micro");
}

TEST_CASE("trajectories round-trip through JSON") {
  auto t = conditional_pair();
  t.steps[1].overrides["id"] = "brw_001";
  auto restored = Trajectory::from_json(t.to_json());
  CHECK(restored.to_json() == t.to_json());
  CHECK(restored.fed_parameters(2).count("id") == 1);
  CHECK(restored.fed_parameters(1).empty());
}

TEST_CASE("composition produces a valid trajectory and wires data flow") {
  auto registry = brewery_registry();
  auto store = brewery_store();
  std::filesystem::path dir = "test_traj_templates";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "compose_trajectory.txt")
      << "Compose a pattern plan of length steps from primitives."
      << " Inputs: {pattern} {length} {primitives}";
  LlmGateway gateway(dir, std::make_shared<ScriptedBackend>());

  auto composed = compose(store.all(), Pattern::Conditional, 2, gateway, store, registry);
  CHECK(composed.pattern == Pattern::Conditional);
  REQUIRE(composed.steps.size() == 2);
  REQUIRE(composed.data_flow.size() == 1);
  CHECK(validate_structure(composed, store, registry).empty());
  // The fed parameter carries the concrete produced value.
  auto fed = composed.fed_parameters(composed.data_flow[0].consumer_step);
  REQUIRE(fed.size() == 1);
  auto args = effective_arguments(composed, composed.data_flow[0].consumer_step, store);
  CHECK(args.at(*fed.begin()) == "brw_001");

  auto sequential = compose(store.all(), Pattern::Sequential, 2, gateway, store, registry);
  CHECK(sequential.data_flow.empty());
  CHECK(validate_structure(sequential, store, registry).empty());

  auto parallel = compose(store.all(), Pattern::Parallel, 2, gateway, store, registry);
  CHECK_FALSE(parallel.branches.empty());
  CHECK(validate_structure(parallel, store, registry).empty());

  CHECK_THROWS_AS(compose(store.all(), Pattern::Conditional, 1, gateway, store, registry),
                  InvalidArgumentError);
  CHECK_THROWS_AS(compose({}, Pattern::Sequential, 2, gateway, store, registry),
                  InvalidArgumentError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("composition that keeps failing validation becomes a stage error") {
  auto registry = brewery_registry();
  auto store = brewery_store();
  std::filesystem::path dir = "test_traj_templates_bad";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "compose_trajectory.txt")
      << "Inputs: {pattern} {length} {primitives}";
  // A backend that always fabricates a primitive id.
  auto backend = std::make_shared<QueueBackend>(std::vector<std::string>(
      3, "```\n{\"steps\": [{\"index\": 1, \"primitive_id\": \"prim_fake\"}], "
         "\"pattern\": \"sequential\", \"data_flow\": []}\n```"));
  LlmGateway gateway(dir, backend);
  CHECK_THROWS_AS(compose(store.all(), Pattern::Sequential, 1, gateway, store, registry),
                  StageError);
  CHECK(backend->calls == 3);
  std::filesystem::remove_all(dir);
}
