#include <doctest.h>

#include "toolforge/request_synthesis.hpp"
#include "toolforge/scripted_backend.hpp"

#include <filesystem>
#include <fstream>
#include <memory>

using namespace toolforge;

namespace {

struct Rig {
  PrimitiveStore store;
  Trajectory trajectory;
  std::filesystem::path dir = "test_request_templates";
  std::unique_ptr<LlmGateway> gateway;

  Rig() {
    ToolPrimitive search;
    search.primitive_id = "prim_search";
    search.tool_id = "brewery/search";
    search.instruction = "search breweries";
    search.arguments = json{{"by_type", "micro"}, {"by_city", "Denver"}};
    search.verdict.variant = Verdict::Valid;
    search.result_digest = json{{"id", "brw_001"}};
    store.admit(search);

    ToolPrimitive lookup;
    lookup.primitive_id = "prim_lookup";
    lookup.tool_id = "brewery/by_id";
    lookup.instruction = "fetch brewery details";
    lookup.arguments = json{{"id", "placeholder"}};
    lookup.verdict.variant = Verdict::Valid;
    lookup.result_digest = json{{"detail", "open"}};
    store.admit(lookup);

    trajectory.pattern = Pattern::Conditional;
    trajectory.steps = {TrajectoryStep{1, "prim_search", json::object()},
                        TrajectoryStep{2, "prim_lookup", json{{"id", "brw_001"}}}};
    trajectory.data_flow = {FlowEdge{1, "$.id", 2, "id"}};

    std::filesystem::create_directories(dir);
    std::ofstream(dir / "request_synth.txt") << "Write a request for {trajectory}.";
    std::ofstream(dir / "consistency_check.txt")
        << "Check {request} against {trajectory}.";
    gateway = std::make_unique<LlmGateway>(dir, std::make_shared<ScriptedBackend>());
  }
  ~Rig() { std::filesystem::remove_all(dir); }
};

}  // namespace

TEST_CASE("steps without fed parameters need a textual trigger") {
  Rig rig;
  auto needing = steps_needing_trigger(rig.trajectory, rig.store);
  CHECK(needing.count(1) == 1);
  // Step 2's only argument arrives through the data-flow edge.
  CHECK(needing.count(2) == 0);
}

TEST_CASE("coverage gaps name steps neither mapped nor fed") {
  Rig rig;
  UserRequest request;
  request.text = "whatever";
  request.key_elements = {KeyElement{1, "set by_type", "micro", 1}};
  CHECK(coverage_gaps(request, rig.trajectory).empty());  // step 2 is fed

  rig.trajectory.data_flow.clear();
  auto gaps = coverage_gaps(request, rig.trajectory);
  REQUIRE(gaps.size() == 1);
  CHECK(gaps[0] == 2);
}

TEST_CASE("synthesis grounds every unfed argument as a key element") {
  Rig rig;
  auto request = synthesize_request(rig.trajectory, *rig.gateway, rig.store);
  CHECK(!request.text.empty());
  CHECK(coverage_gaps(request, rig.trajectory).empty());

  std::set<std::string> grounded;
  for (const auto& element : request.key_elements) {
    CHECK(request.text.find(element.key_value) != std::string::npos);
    grounded.insert(element.key_value);
  }
  CHECK(grounded.count("micro") == 1);
  CHECK(grounded.count("Denver") == 1);
}

TEST_CASE("referential ambiguity replaces intermediates with demonstratives") {
  Rig rig;
  UserRequest request;
  request.text = "Find micro breweries in Denver, then look up brw_001.";
  request.key_elements = {
      KeyElement{1, "set by_type", "micro", 1},
      KeyElement{2, "set by_city", "Denver", 1},
      KeyElement{3, "set id", "brw_001", 2},
  };
  auto blurred = apply_referential_ambiguity(request, rig.trajectory, rig.store);

  // The intermediate value disappears from the text and the log records it.
  CHECK(blurred.text.find("brw_001") == std::string::npos);
  REQUIRE(blurred.ambiguity_applied.size() == 1);
  CHECK(blurred.ambiguity_applied[0].first == "brw_001");
  CHECK(blurred.key_elements[2].key_value == blurred.ambiguity_applied[0].second);
  // Values the user must state verbatim stay put.
  CHECK(blurred.text.find("micro") != std::string::npos);
  CHECK(blurred.text.find("Denver") != std::string::npos);
}

TEST_CASE("demonstratives follow the parameter's semantic family") {
  CHECK(demonstrative_for("order_id") == "that order");
  CHECK(demonstrative_for("product_code") == "that item");
  CHECK(demonstrative_for("by_city") == "there");
  CHECK(demonstrative_for("user_name") == "them");
  CHECK(demonstrative_for("frobnicator") == "that one");
}

TEST_CASE("pass/fail parsing reads the first line and keeps the rationale") {
  auto pass = parse_pass_fail("PASS\nall values grounded");
  CHECK(pass.pass);
  CHECK(pass.rationale == "all values grounded");

  auto fail = parse_pass_fail("FAIL\nmissing value for by_city");
  CHECK_FALSE(fail.pass);
  CHECK(fail.rationale == "missing value for by_city");

  CHECK_THROWS_AS(parse_pass_fail("MAYBE\nwho knows"), StageError);
}

TEST_CASE("consistency validation yields a positive sample or a logged rejection") {
  Rig rig;
  auto request = synthesize_request(rig.trajectory, *rig.gateway, rig.store);
  std::string rejection;
  auto sample = validate_sample(request, rig.trajectory, *rig.gateway, "s1", &rejection);
  REQUIRE(sample.has_value());
  CHECK(sample->label == Label::Positive);
  CHECK(sample->sample_id == "s1");
  CHECK_FALSE(sample->response_note.empty());

  // A request that hides a mandatory value fails the check.
  UserRequest degraded = request;
  bool mutated = false;
  for (auto& element : degraded.key_elements)
    if (element.key_value == "micro") {
      size_t pos = degraded.text.find("micro");
      REQUIRE(pos != std::string::npos);
      degraded.text.replace(pos, 5, "nice");
      mutated = true;
    }
  REQUIRE(mutated);
  auto rejected = validate_sample(degraded, rig.trajectory, *rig.gateway, "s2", &rejection);
  CHECK_FALSE(rejected.has_value());
  CHECK_FALSE(rejection.empty());
}

TEST_CASE("samples round-trip through JSON") {
  Rig rig;
  auto request = synthesize_request(rig.trajectory, *rig.gateway, rig.store);
  auto sample = validate_sample(request, rig.trajectory, *rig.gateway, "s1");
  REQUIRE(sample.has_value());
  auto restored = Sample::from_json(sample->to_json());
  CHECK(restored.to_json() == sample->to_json());
}
