#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "looplab/error.hpp"
#include "looplab/templates.hpp"
#include "looplab/util.hpp"

using namespace looplab;

namespace {

WorkflowGraph qa_trace(const std::string& question, const std::string& answer,
                       double score) {
  GraphBuilder b = begin_graph(question);
  const std::vector<NodeId> parents{b.input()};
  b.record_step("solve", parents, {}, answer, "answer");
  return attach_feedback(
      b.graph(), FeedbackRecord{score, score > 0 ? "Correct" : "Incorrect",
                                score > 0 ? Stage::correct : Stage::incorrect,
                                score > 0 ? "correct" : "incorrect"});
}

std::string full_render(const LearningGraph& lg) {
  return render_traces(lg) + "--\n" + render_feedback(lg) + "--\n" +
         lg.aggregate_output.value_or("<none>");
}

}  // namespace

TEST_CASE("interactive template") {
  const WorkflowGraph g = qa_trace("q1", "(A)", 1);
  const LearningGraph lg = template_interactive(g);
  CHECK(lg.kind == TemplateKind::interactive);
  REQUIRE(lg.members.size() == 1);
  CHECK(lg.members[0] == g);
  CHECK(render_traces(lg) == render_trace(g));
  GraphBuilder bare = begin_graph("q");
  CHECK_THROWS_AS(template_interactive(bare.graph()), TemplateError);
}

TEST_CASE("batch template preserves members and order") {
  const std::vector<WorkflowGraph> gs{qa_trace("q1", "(A)", 1),
                                      qa_trace("q2", "(B)", 0),
                                      qa_trace("q3", "(C)", 1)};
  const LearningGraph lg = template_batch(gs);
  CHECK(lg.members == gs);
  REQUIRE(lg.aggregate_feedback);
  CHECK(lg.aggregate_feedback->score == doctest::Approx(2.0 / 3.0));
  const std::string text = render_traces(lg);
  const auto p1 = text.find("Example 1 of 3:");
  const auto p2 = text.find("Example 2 of 3:");
  const auto p3 = text.find("Example 3 of 3:");
  CHECK(p1 < p2);
  CHECK(p2 < p3);
  CHECK(p3 != std::string::npos);
  CHECK(text.find("q2") > p2);

  CHECK_THROWS_AS(template_batch({}), TemplateError);
  GraphBuilder bare = begin_graph("q");
  CHECK_THROWS_AS(template_batch({gs[0], bare.graph()}), TemplateError);
}

TEST_CASE("singleton batch renders as interactive") {
  const WorkflowGraph g = qa_trace("q1", "(A)", 1);
  const LearningGraph a = template_interactive(g);
  const LearningGraph b = template_batch({g});
  CHECK(render_traces(a) == render_traces(b));
  CHECK(render_feedback(a) == render_feedback(b));
}

TEST_CASE("batchify is associative over every ordering") {
  const std::vector<WorkflowGraph> t{qa_trace("q1", "(A)", 1),
                                     qa_trace("q2", "(B)", 0),
                                     qa_trace("q3", "(C)", 1)};
  std::vector<int> perm{0, 1, 2};
  do {
    const LearningGraph a = template_interactive(t[perm[0]]);
    const LearningGraph b = template_interactive(t[perm[1]]);
    const LearningGraph c = template_interactive(t[perm[2]]);
    const std::vector<LearningGraph> ab{a, b};
    const std::vector<LearningGraph> left{batchify(ab), c};
    const std::vector<LearningGraph> bc{b, c};
    const std::vector<LearningGraph> right{a, batchify(bc)};
    const std::vector<LearningGraph> flat{a, b, c};
    const std::string expected = full_render(batchify(flat));
    CHECK(full_render(batchify(left)) == expected);
    CHECK(full_render(batchify(right)) == expected);
    const auto first = expected.find("q" + std::to_string(perm[0] + 1));
    const auto last = expected.find("q" + std::to_string(perm[2] + 1));
    CHECK(first < last);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("episodic template and truncation") {
  std::vector<TimedGraph> steps;
  for (std::size_t t = 0; t < 60; ++t) {
    steps.push_back(TimedGraph{t + 1, qa_trace("obs" + std::to_string(t + 1), "3", 0)});
  }
  Rng rng(9);
  std::vector<TimedGraph> shuffled = steps;
  shuffle_in_place(shuffled, rng);
  const LearningGraph lg = template_episodic(
      shuffled, FeedbackRecord{70, "Your average score is 70.", Stage::low, "low"});
  CHECK(lg.members.size() == 60);
  CHECK(lg.links.size() == 59);
  CHECK(std::is_sorted(lg.times.begin(), lg.times.end()));
  const std::string text = render_traces(lg);
  std::size_t prev = 0;
  for (std::size_t t = 1; t <= 60; ++t) {
    const auto pos = text.find("Step " + std::to_string(t) + ":\n");
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= prev);
    prev = pos;
  }

  const LearningGraph last25 =
      truncate_horizon(lg, HorizonPolicy{HorizonPolicy::Mode::multi_step, 25});
  CHECK(last25.members.size() == 25);
  CHECK(last25.links.size() == 24);
  CHECK(last25.times.front() == 36);
  CHECK(last25.times.back() == 60);
  for (std::size_t i = 0; i < 25; ++i) CHECK(last25.members[i] == lg.members[35 + i]);

  const LearningGraph one = truncate_horizon(lg, HorizonPolicy{});
  CHECK(one.members.size() == 1);
  CHECK(one.links.empty());
  CHECK(one.members[0] == lg.members.back());

  CHECK(truncate_horizon(lg, HorizonPolicy{HorizonPolicy::Mode::multi_step, 60}) == lg);
  CHECK(truncate_horizon(lg, HorizonPolicy{HorizonPolicy::Mode::multi_step, 400}) == lg);

  CHECK_THROWS_AS(template_episodic({}, FeedbackRecord{}), TemplateError);
  CHECK_THROWS_AS(truncate_horizon(template_interactive(qa_trace("q", "a", 1)),
                                   HorizonPolicy{}),
                  TemplateError);
  std::vector<TimedGraph> dup{steps[0], steps[0]};
  CHECK_THROWS_AS(template_episodic(dup, FeedbackRecord{}), TemplateError);
}

TEST_CASE("episodic aggregate output is opt-in") {
  std::vector<TimedGraph> steps{{0, qa_trace("a", "2", 0)}, {1, qa_trace("b", "3", 0)}};
  const LearningGraph off = template_episodic(steps, FeedbackRecord{});
  CHECK_FALSE(off.aggregate_output.has_value());
  const LearningGraph on = template_episodic(steps, FeedbackRecord{}, true);
  REQUIRE(on.aggregate_output.has_value());
  CHECK(*on.aggregate_output == "Example 1 of 2:\n2\nExample 2 of 2:\n3\n");
}
