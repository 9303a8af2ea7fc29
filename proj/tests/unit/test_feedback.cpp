#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "looplab/error.hpp"
#include "looplab/feedback.hpp"
#include "looplab/util.hpp"

using namespace looplab;

namespace {

// Character scan for the last "(L)" token.
std::string scan_choice(const std::string& s) {
  std::string last;
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    const char c = s[i + 1];
    const bool letter = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
    if (s[i] == '(' && letter && s[i + 2] == ')') last = s.substr(i, 3);
  }
  if (!last.empty()) return last;
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

TEST_CASE("pong table") {
  const StageTable t = tables::pong();
  t.validate();
  const FeedbackRecord mid = game_feedback("pong", 12, t);
  CHECK(mid.stage == Stage::medium);
  CHECK(mid.message ==
        "Keep it up! You're scoring 12 points against the opponent but you are "
        "still 9 points from winning the game. Try improving paddle "
        "positioning to prevent opponent scoring.");
  CHECK(game_feedback("pong", 19, t).stage == Stage::high);
  CHECK(game_feedback("pong", 20, t).message ==
        "Good job! You're close to winning the game! You're scoring 20 points "
        "against the opponent, only 1 point short of winning.");
  const FeedbackRecord zero = game_feedback("pong", 0, t);
  CHECK(zero.stage == Stage::low);
  CHECK(game_feedback("pong", -5, t).message ==
        "Your score is -5 points. Try to improve paddle positioning to prevent "
        "opponent scoring.");
  CHECK(game_feedback("pong", 0.5, t).stage == Stage::medium);
}

TEST_CASE("breakout table") {
  const StageTable t = tables::breakout();
  t.validate();
  CHECK(game_feedback("breakout", 50, t).message ==
        "Keep it up! You're scoring 50 points against the opponent but you are "
        "still 300 points from winning the game. Try improving paddle "
        "positioning to return the ball and avoid losing lives.");
  CHECK(game_feedback("breakout", 320, t).message ==
        "Good job! You're close to winning the game! You're scoring 320 points "
        "against the opponent, try ensuring you return the ball, only 30 "
        "points short of winning.");
  CHECK(game_feedback("breakout", 300, t).stage == Stage::high);
  CHECK(game_feedback("breakout", 0, t).stage == Stage::low);
}

TEST_CASE("invaders table") {
  const StageTable t = tables::invaders();
  t.validate();
  CHECK(game_feedback("invaders", 100, t).stage == Stage::medium);
  CHECK(game_feedback("invaders", 99.9, t).stage == Stage::low);
  CHECK(game_feedback("invaders", 180, t).message ==
        "Good progress! Your average score is 180. Focus on better timing for "
        "shooting and avoiding enemy projectiles.");
  CHECK(game_feedback("invaders", 320, t).message ==
        "Great job! You're performing well with an average score of 320. Try "
        "to improve your shooting accuracy and dodging.");
  CHECK(game_feedback("invaders", 70, t).message ==
        "Your average score is 70. Try to improve your strategy for shooting "
        "aliens and dodging projectiles.");
}

TEST_CASE("ml tables") {
  const StageTable f1 = tables::spaceship_f1();
  const StageTable r2 = tables::housing_r2();
  f1.validate();
  r2.validate();
  CHECK(f1.select(0.5).name == "promising");
  CHECK(f1.select(0.4999).name == "poor");
  CHECK(f1.select(0.7).name == "good");
  CHECK(f1.select(0.8).name == "excellent");
  CHECK(r2.select(0.0).name == "below_baseline");
  CHECK(r2.select(1e-9).name == "poor");
  CHECK(r2.select(0.5).name == "improving");
  CHECK(r2.select(0.7).name == "good");
  CHECK_THROWS_AS(f1.select(std::nan("")), MetricError);
}

TEST_CASE("stage selection is total over random values") {
  Rng rng(11);
  for (const StageTable& t : {tables::pong(), tables::breakout(), tables::invaders(),
                              tables::spaceship_f1(), tables::housing_r2()}) {
    std::vector<double> probes;
    for (const StageRow& r : t.rows()) {
      for (auto b : {r.lower, r.upper}) {
        if (!b) continue;
        probes.push_back(*b);
        probes.push_back(std::nextafter(*b, -1e300));
        probes.push_back(std::nextafter(*b, 1e300));
      }
    }
    for (int i = 0; i < 2000; ++i) probes.push_back((uniform_unit(rng) - 0.5) * 1000);
    for (double v : probes) {
      int hits = 0;
      for (const StageRow& r : t.rows()) hits += r.contains(v) ? 1 : 0;
      CHECK(hits == 1);
    }
  }
}

TEST_CASE("malformed tables and templates") {
  StageTable gap("gap", "m",
                 {StageRow{"a", Stage::low, std::nullopt, true, 0.0, false, "a"},
                  StageRow{"b", Stage::high, 1.0, true, std::nullopt, false, "b"}});
  CHECK_THROWS_AS(gap.validate(), ConfigError);
  StageTable overlap(
      "overlap", "m",
      {StageRow{"a", Stage::low, std::nullopt, true, 0.0, true, "a"},
       StageRow{"b", Stage::high, 0.0, true, std::nullopt, false, "b"}});
  CHECK_THROWS_AS(overlap.validate(), ConfigError);
  CHECK_THROWS_AS(render_template("score {missing}", {}), TemplateError);
  CHECK_THROWS_AS(render_template("score {open", {}), TemplateError);
  CHECK(render_template("{a}{a}-{b}", {{"a", "x"}, {"b", ""}}) == "xx-");
}

TEST_CASE("correctness guide") {
  CHECK(correctness_guide("(B)", "(B)").score == 1.0);
  const FeedbackRecord wrong = correctness_guide("(A)", "(B)");
  CHECK(wrong.score == 0.0);
  CHECK(wrong.stage == Stage::incorrect);
  CHECK(wrong.message.find("(B)") != std::string::npos);
  CHECK(correctness_guide("", "(B)").score == 0.0);
  for (const char* s : {"", "x", "(C)", "True", "}])"}) {
    CHECK(correctness_guide(s, s).score == 1.0);
  }
}

TEST_CASE("extract_choice matches a character scan") {
  CHECK(extract_choice("I think (A) but finally (C)") == "(C)");
  CHECK(extract_choice("(B)") == "(B)");
  CHECK(extract_choice("  True \n") == "True");
  const std::vector<std::string> pieces{"(A)", "(b)", "(Z)", "answer", " ", "((",
                                        "))", "(AB)", "(1)", "\n", "()", "x)", "(q"};
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::string s;
    const std::size_t n = uniform_index(rng, 8);
    for (std::size_t k = 0; k < n; ++k) s += pieces[uniform_index(rng, pieces.size())];
    CHECK(extract_choice(s) == scan_choice(s));
  }
}

TEST_CASE("classification metrics") {
  const std::vector<double> p{1, 1, 0, 0}, g{1, 0, 1, 0};
  const MetricSet m = compute_metrics(p, g, TaskKind::classification);
  CHECK(*m.precision == 0.5);
  CHECK(*m.recall == 0.5);
  CHECK(*m.f1 == 0.5);
  CHECK(*m.accuracy == 0.5);
  const MetricSet perfect = compute_metrics(g, g, TaskKind::classification);
  CHECK(*perfect.f1 == 1.0);
  CHECK(*perfect.accuracy == 1.0);
  const std::vector<double> none{0, 0, 0, 0};
  CHECK(*compute_metrics(none, g, TaskKind::classification).f1 == 0.0);
  const std::vector<double> one{1};
  CHECK_THROWS_AS(compute_metrics(p, one, TaskKind::classification), MetricError);
  CHECK_THROWS_AS(compute_metrics({}, {}, TaskKind::regression), MetricError);
}

TEST_CASE("regression metrics") {
  const std::vector<double> g{1, 2, 3, 4};
  const MetricSet same = compute_metrics(g, g, TaskKind::regression);
  CHECK(*same.rmse == 0.0);
  CHECK(*same.mae == 0.0);
  CHECK(*same.r2 == 1.0);
  const std::vector<double> flat{2, 2, 2};
  const MetricSet undef = compute_metrics(flat, flat, TaskKind::regression);
  CHECK(undef.r2_undefined);
  CHECK_FALSE(undef.r2.has_value());

  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 20);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = (uniform_unit(rng) - 0.5) * 100;
      b[i] = (uniform_unit(rng) - 0.5) * 100;
    }
    const MetricSet m = compute_metrics(a, b, TaskKind::regression);
    CHECK(*m.rmse >= *m.mae - 1e-12);
  }
}

TEST_CASE("episode metrics sum rewards") {
  const std::vector<double> r{1, -1, 0, 1}, z(4, 0.0);
  CHECK(*compute_metrics(r, z, TaskKind::episodes).episode_return == 1.0);
}

TEST_CASE("ml feedback report") {
  MetricSet m;
  m.accuracy = 0.8125;
  m.f1 = 0.5;
  m.precision = 0.6;
  m.recall = 0.42857;
  const FeedbackRecord fb =
      ml_feedback(m, TaskKind::classification, tables::spaceship_f1(), 3, 20);
  CHECK(fb.message ==
        "Epoch 3/20\n\nAccuracy: 0.812\nF1: 0.500\nPrecision: 0.600\n"
        "Recall: 0.429\n\nModel is showing promise but needs improvement. "
        "Consider class balancing techniques.");
  CHECK(fb.stage_name == "promising");

  MetricSet r;
  r.rmse = 1.5;
  r.mae = 1.0;
  r.r2_undefined = true;
  const FeedbackRecord rf =
      ml_feedback(r, TaskKind::regression, tables::housing_r2(), 1, 20);
  CHECK(rf.stage_name == "below_baseline");
  CHECK(rf.message.find("r2: undefined") != std::string::npos);
}
