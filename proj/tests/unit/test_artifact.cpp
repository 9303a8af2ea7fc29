#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "looplab/artifact.hpp"

using namespace looplab;

namespace {

Artifact two_slot(std::string predict = "return obs.ball", std::string act = "return NOOP") {
  std::vector<Slot> slots{
      {"predict", {{"obs"}, "number or none"}, "Guess where the ball goes.", predict, true},
      {"act", {{"obs", "target"}, "action"}, "Pick a move.\nSecond line.", act, true},
  };
  Wiring w{"obs", {{"target", "predict", {"obs"}}, {"action", "act", {"obs", "target"}}}, "action"};
  OutputSpec out{OutputSpec::Kind::action, {0, 2, 3}};
  return Artifact("toy", slots, w, out, {{"NOOP", Value(0)}, {"UP", Value(2)}});
}

const Value kObs = value_from_json(R"({"ball": 7, "paddle": 3})");

}  // namespace

TEST_CASE("construction rejects malformed structure") {
  OutputSpec any;
  Slot s{"f", {{"x"}, "int"}, "", "return x", true};
  CHECK_THROWS_AS(Artifact("a", {}, Wiring{"obs", {}, "obs"}, any), ArtifactError);
  CHECK_THROWS_AS(Artifact("a", {s, s}, Wiring{"obs", {{"y", "f", {"obs"}}}, "y"}, any),
                  ArtifactError);
  CHECK_THROWS_AS(Artifact("a", {s}, Wiring{"obs", {{"y", "g", {"obs"}}}, "y"}, any),
                  ArtifactError);
  CHECK_THROWS_AS(Artifact("a", {s}, Wiring{"obs", {{"y", "f", {"z"}}}, "y"}, any),
                  ArtifactError);
  CHECK_THROWS_AS(Artifact("a", {s}, Wiring{"obs", {{"y", "f", {"obs", "obs"}}}, "y"}, any),
                  ArtifactError);
  CHECK_THROWS_AS(Artifact("a", {s}, Wiring{"obs", {{"y", "f", {"obs"}}}, "q"}, any),
                  ArtifactError);
  CHECK_THROWS_AS(Artifact("a", {s}, Wiring{"obs", {{"y", "f", {"obs"}}}, "y"},
                           OutputSpec{OutputSpec::Kind::action, {}}),
                  ArtifactError);
  Slot broken = s;
  broken.body = "return (";
  CHECK_THROWS_AS(Artifact("a", {broken}, Wiring{"obs", {{"y", "f", {"obs"}}}, "y"}, any),
                  ExecutionError);
}

TEST_CASE("execution records one value node per slot call") {
  const Artifact a = two_slot();
  const ExecutionOutcome o = execute_traced(a, kObs);
  REQUIRE(o.ok());
  CHECK(o.output == Value(0));
  const WorkflowGraph& g = o.graph;
  // Input plus one value node per slot, one param node per slot.
  CHECK(g.value_node_count() == 1 + a.slots().size());
  CHECK(g.param_node_count() == a.slots().size());
  const auto& out = g.at(g.output());
  CHECK(std::get<ValueNode>(out).label == "action");
  CHECK(std::get<ValueNode>(out).payload == "0");
  CHECK(o.steps > 0);
}

TEST_CASE("illegal outputs and slot failures become error nodes") {
  const ExecutionOutcome bad_action = execute_traced(two_slot("return 1", "return 7"), kObs);
  REQUIRE_FALSE(bad_action.ok());
  CHECK(bad_action.error->kind() == ExecutionError::Kind::type);
  const auto& last = std::get<ValueNode>(bad_action.graph.at(bad_action.graph.output()));
  CHECK(last.label == "error");

  const ExecutionOutcome crash = execute_traced(two_slot("return obs.missing"), kObs);
  REQUIRE_FALSE(crash.ok());
  CHECK(crash.error->slot() == "predict");
  CHECK(crash.error->kind() == ExecutionError::Kind::runtime);
  CHECK_THROWS_AS(execute(two_slot("return obs.missing"), kObs), ExecutionError);
}

TEST_CASE("fuel limit applies per slot call") {
  const Artifact a = two_slot("while true { }");
  ExecOptions opt;
  opt.fuel_limit = 50;
  const ExecutionOutcome o = execute_traced(a, kObs, opt);
  REQUIRE_FALSE(o.ok());
  CHECK(o.error->kind() == ExecutionError::Kind::fuel);
  CHECK(o.error->steps() == 50);
  CHECK(o.steps == 50);
}

TEST_CASE("deltas replace bodies and nothing else") {
  const Artifact a = two_slot();
  CHECK(apply_delta(a, ArtifactDelta{}) == a);

  ArtifactDelta d;
  d.bodies["act"] = "return UP";
  const Artifact b = apply_delta(a, d);
  CHECK(execute(b, kObs).output == Value(2));
  CHECK(b.slot("act").documentation == a.slot("act").documentation);
  CHECK(b.slot("act").signature == a.slot("act").signature);
  CHECK(diff_artifacts(a, b).bodies == d.bodies);
  CHECK(diff_artifacts(a, a).empty());

  // Applying the inverse restores the original byte for byte.
  const Artifact back = apply_delta(b, diff_artifacts(b, a));
  CHECK(back == a);
  CHECK(write_artifact(back) == write_artifact(a));

  for (const char* key : {"act.signature", "act.documentation", "nope"}) {
    ArtifactDelta bad;
    bad.bodies[key] = "return 0";
    CHECK_THROWS_AS(apply_delta(a, bad), ValidationError);
  }
  ArtifactDelta unparsable;
  unparsable.bodies["act"] = "return (";
  CHECK_THROWS_AS(apply_delta(a, unparsable), ValidationError);
}

TEST_CASE("non-editable slots refuse deltas") {
  std::vector<Slot> slots{{"f", {{"obs"}, "text"}, "", "return \"x\"", false}};
  const Artifact a("fixed", slots, Wiring{"obs", {{"y", "f", {"obs"}}}, "y"},
                   OutputSpec{OutputSpec::Kind::text, {}});
  ArtifactDelta d;
  d.bodies["f"] = "return \"y\"";
  CHECK_THROWS_AS(apply_delta(a, d), ValidationError);
  CHECK(render_slots(a, true).empty());
  CHECK(render_slots(a).find("(fixed)") != std::string::npos);
}

TEST_CASE("diff matches a per-slot comparison oracle") {
  const std::vector<std::string> pool{"return 0", "return 2", "return 3", "return NOOP",
                                      "return UP"};
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string p1 = pool[uniform_index(rng, pool.size())];
    const std::string p2 = pool[uniform_index(rng, pool.size())];
    const std::string q1 = pool[uniform_index(rng, pool.size())];
    const std::string q2 = pool[uniform_index(rng, pool.size())];
    const Artifact x = two_slot(p1, q1);
    const Artifact y = two_slot(p2, q2);
    std::set<std::string> expected;
    if (p1 != p2) expected.insert("predict");
    if (q1 != q2) expected.insert("act");
    std::set<std::string> got;
    for (const auto& [k, v] : diff_artifacts(x, y).bodies) got.insert(k);
    CHECK(got == expected);
    CHECK(apply_delta(x, diff_artifacts(x, y)) == y);
  }
}

TEST_CASE("signatures round trip") {
  for (const Signature& s : {Signature{{}, "int"}, Signature{{"obs"}, "action in {0, 2}"},
                             Signature{{"a", "b_2", "c"}, "none"}}) {
    CHECK(parse_signature(render_signature(s)) == s);
  }
  CHECK(render_signature(Signature{{"obs", "ball_y"}, "int"}) == "(obs, ball_y) -> int");
  CHECK_THROWS_AS(parse_signature("obs -> int"), ArtifactError);
  CHECK_THROWS_AS(parse_signature("(obs) int"), ArtifactError);
  CHECK_THROWS_AS(parse_signature("(1x) -> int"), ArtifactError);
}

TEST_CASE("artifact files round trip exactly") {
  const Artifact a = two_slot("# comment\nlet y = obs.ball\n\nreturn y\n", "return NOOP");
  const std::string text = write_artifact(a);
  CHECK(text.starts_with("looplab-artifact/1\n"));
  const Artifact b = read_artifact(text);
  CHECK(b == a);
  CHECK(write_artifact(b) == text);

  std::vector<Slot> slots{{"f", {{"obs"}, "text"}, "", "", true}};
  const Artifact empty_text("e", slots, Wiring{"obs", {{"y", "f", {"obs"}}}, "y"},
                            OutputSpec{}, {{"S", Value(List{1, "two", 3.5})}});
  CHECK(read_artifact(write_artifact(empty_text)) == empty_text);

  CHECK_THROWS_AS(read_artifact("looplab-artifact/9\n"), ArtifactError);
  CHECK_THROWS_AS(read_artifact(text.substr(0, text.size() / 2)), Error);
}
