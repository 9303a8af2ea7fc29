// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "looplab/environments.hpp"
#include "looplab/feedback.hpp"
#include "looplab/harness.hpp"
#include "looplab/optimizer.hpp"
#include "looplab/report.hpp"
#include "looplab/templates.hpp"
#include "looplab/text_tasks.hpp"
#include "looplab/trace.hpp"
#include "looplab/util.hpp"

using namespace looplab;
namespace fs = std::filesystem;

namespace {

// Collects the first few failure descriptions of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    if (failures_.size() < 5) failures_.push_back(what);
    ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string detail() const {
    std::string s = std::to_string(checks_) + " checks";
    if (failed_ > 0) {
      s += ", " + std::to_string(failed_) + " failed:";
      for (const std::string& f : failures_) s += "\n    " + f;
    }
    return s;
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("looplab_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// ---- 1. template laws

std::string random_word(Rng& rng) {
  static const char* words[] = {"alpha", "beta", "(A)", "(B)", "7", "-3", "x y", "{k}", "\"q\""};
  std::string s;
  const std::size_t n = 1 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < n; ++i) s += std::string(i ? " " : "") + words[uniform_index(rng, 9)];
  return s;
}

WorkflowGraph random_trace(Rng& rng, std::size_t id) {
  GraphBuilder b = begin_graph("q" + std::to_string(id) + ": " + random_word(rng));
  NodeId last = b.input();
  const std::size_t steps = 1 + uniform_index(rng, 3);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::vector<NodeId> parents{last};
    last = b.record_step("op" + std::to_string(s), parents, {}, random_word(rng), "v");
  }
  const double score = static_cast<double>(uniform_index(rng, 5)) - 1.0;
  return attach_feedback(b.graph(), FeedbackRecord{score, "feedback " + random_word(rng),
                                                   Stage::info, "info"});
}

std::string full_render(const LearningGraph& lg) {
  return render_traces(lg) + "\x1f" + render_feedback(lg) + "\x1f" +
         lg.aggregate_output.value_or("<none>");
}

LearningGraph random_learning_graph(Rng& rng, std::size_t& id) {
  if (uniform_index(rng, 2) == 0) return template_interactive(random_trace(rng, id++));
  std::vector<WorkflowGraph> gs;
  const std::size_t n = 1 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < n; ++i) gs.push_back(random_trace(rng, id++));
  return template_batch(gs);
}

Check template_laws() {
  Check c;
  Rng rng(derive_seed(1, "acceptance-templates"));
  for (int t = 0; t < 1000; ++t) {
    std::size_t id = 0;
    const LearningGraph a = random_learning_graph(rng, id);
    const LearningGraph b = random_learning_graph(rng, id);
    const LearningGraph d = random_learning_graph(rng, id);
    const std::vector<LearningGraph> ab{a, b}, bd{b, d}, flat{a, b, d};
    const std::vector<LearningGraph> left{batchify(ab), d}, right{a, batchify(bd)};
    const LearningGraph l = batchify(left), r = batchify(right), f = batchify(flat);
    const std::string tag = "triple " + std::to_string(t);
    c.expect(full_render(l) == full_render(f), tag + ": (a+b)+c differs from a+b+c");
    c.expect(full_render(r) == full_render(f), tag + ": a+(b+c) differs from a+b+c");
    c.expect(l == r, tag + ": groupings give different graphs");
    std::vector<WorkflowGraph> members;
    for (const LearningGraph& g : flat) members.insert(members.end(), g.members.begin(), g.members.end());
    c.expect(f.members == members, tag + ": member order not preserved");

    const WorkflowGraph g = random_trace(rng, id++);
    const LearningGraph single = template_batch({g});
    const LearningGraph inter = template_interactive(g);
    c.expect(full_render(single) == full_render(inter), tag + ": singleton batch differs from interactive");

    std::vector<TimedGraph> steps;
    const std::size_t len = 1 + uniform_index(rng, 12);
    std::size_t time = uniform_index(rng, 3);
    for (std::size_t s = 0; s < len; ++s) {
      steps.push_back({time, random_trace(rng, id++)});
      time += 1 + uniform_index(rng, 2);
    }
    const WorkflowGraph last = steps.back().graph;
    const LearningGraph ep = template_episodic(steps, FeedbackRecord{1, "episode", Stage::info, "info"},
                                               uniform_index(rng, 2) == 1);
    const LearningGraph full = truncate_horizon(ep, {HorizonPolicy::Mode::multi_step, len});
    c.expect(full == ep, tag + ": full-length truncation is not the identity");
    c.expect(full_render(full) == full_render(ep), tag + ": full-length truncation renders differently");
    const LearningGraph one = truncate_horizon(ep, {HorizonPolicy::Mode::one_step, 1});
    c.expect(one.members.size() == 1 && one.members[0] == last,
             tag + ": one_step does not keep exactly the last member");
  }
  return c;
}

// ---- 2. staged feedback goldens

Check feedback_goldens() {
  Check c;
  struct Game {
    const char* game;
    double value;
    Stage stage;
    const char* message;
  };
  const Game games[] = {
      {"pong", -5, Stage::low,
       "Your score is -5 points. Try to improve paddle positioning to prevent opponent scoring."},
      {"pong", 0, Stage::low,
       "Your score is 0 points. Try to improve paddle positioning to prevent opponent scoring."},
      {"pong", 1, Stage::medium,
       "Keep it up! You're scoring 1 points against the opponent but you are still 20 points "
       "from winning the game. Try improving paddle positioning to prevent opponent scoring."},
      {"pong", 12, Stage::medium,
       "Keep it up! You're scoring 12 points against the opponent but you are still 9 points "
       "from winning the game. Try improving paddle positioning to prevent opponent scoring."},
      {"pong", 18, Stage::medium,
       "Keep it up! You're scoring 18 points against the opponent but you are still 3 points "
       "from winning the game. Try improving paddle positioning to prevent opponent scoring."},
      {"pong", 19, Stage::high,
       "Good job! You're close to winning the game! You're scoring 19 points against the "
       "opponent, only 2 points short of winning."},
      {"pong", 20, Stage::high,
       "Good job! You're close to winning the game! You're scoring 20 points against the "
       "opponent, only 1 point short of winning."},
      {"breakout", -5, Stage::low,
       "Your score is -5 points. Try to improve paddle positioning to return the ball and "
       "avoid losing lives."},
      {"breakout", 0, Stage::low,
       "Your score is 0 points. Try to improve paddle positioning to return the ball and "
       "avoid losing lives."},
      {"breakout", 50, Stage::medium,
       "Keep it up! You're scoring 50 points against the opponent but you are still 300 "
       "points from winning the game. Try improving paddle positioning to return the ball and "
       "avoid losing lives."},
      {"breakout", 299, Stage::medium,
       "Keep it up! You're scoring 299 points against the opponent but you are still 51 "
       "points from winning the game. Try improving paddle positioning to return the ball and "
       "avoid losing lives."},
      {"breakout", 300, Stage::high,
       "Good job! You're close to winning the game! You're scoring 300 points against the "
       "opponent, try ensuring you return the ball, only 50 points short of winning."},
      {"invaders", 70, Stage::low,
       "Your average score is 70. Try to improve your strategy for shooting aliens and "
       "dodging projectiles."},
      {"invaders", 99, Stage::low,
       "Your average score is 99. Try to improve your strategy for shooting aliens and "
       "dodging projectiles."},
      {"invaders", 100, Stage::medium,
       "Good progress! Your average score is 100. Focus on better timing for shooting and "
       "avoiding enemy projectiles."},
      {"invaders", 180, Stage::medium,
       "Good progress! Your average score is 180. Focus on better timing for shooting and "
       "avoiding enemy projectiles."},
      {"invaders", 300, Stage::high,
       "Great job! You're performing well with an average score of 300. Try to improve your "
       "shooting accuracy and dodging."},
      {"invaders", 320, Stage::high,
       "Great job! You're performing well with an average score of 320. Try to improve your "
       "shooting accuracy and dodging."},
  };
  for (const Game& g : games) {
    const FeedbackRecord r = game_feedback(g.game, g.value, *tables::by_name(g.game));
    const std::string tag = std::string(g.game) + " " + format_real(g.value);
    c.expect(r.stage == g.stage, tag + ": stage " + to_string(r.stage));
    c.expect(r.message == g.message, tag + ": message \"" + r.message + "\"");
    c.expect(r.score == g.value, tag + ": score");
  }

  struct Ml {
    const char* table;
    double value;
    const char* message;
  };
  const char* poor_f1 = "Model performance is poor. Try better feature engineering and preprocessing.";
  const char* promise = "Model is showing promise but needs improvement. Consider class balancing techniques.";
  const char* well = "Model is performing well. Fine-tune hyperparameters for further improvements.";
  const char* excellent = "Excellent performance! Focus on preventing overfitting.";
  const char* worse = "Model is performing worse than baseline. Focus on better feature engineering and selection.";
  const char* poor_r2 = "Model has poor predictive power. Try more advanced preprocessing or different algorithms.";
  const char* improving = "Model is improving but still has room for growth. Consider feature interactions.";
  const Ml ml[] = {
      {"spaceship_f1", 0.0, poor_f1},      {"spaceship_f1", 0.3, poor_f1},
      {"spaceship_f1", std::nextafter(0.5, 0.0), poor_f1},
      {"spaceship_f1", 0.5, promise},      {"spaceship_f1", 0.6, promise},
      {"spaceship_f1", std::nextafter(0.7, 0.0), promise},
      {"spaceship_f1", 0.7, well},         {"spaceship_f1", 0.75, well},
      {"spaceship_f1", std::nextafter(0.8, 0.0), well},
      {"spaceship_f1", 0.8, excellent},    {"spaceship_f1", 0.95, excellent},
      {"housing_r2", -2.0, worse},         {"housing_r2", 0.0, worse},
      {"housing_r2", std::nextafter(0.0, 1.0), poor_r2},
      {"housing_r2", 0.3, poor_r2},        {"housing_r2", std::nextafter(0.5, 0.0), poor_r2},
      {"housing_r2", 0.5, improving},      {"housing_r2", 0.6, improving},
      {"housing_r2", std::nextafter(0.7, 0.0), improving},
      {"housing_r2", 0.7, well},           {"housing_r2", 0.9, well},
  };
  for (const Ml& m : ml) {
    const StageTable t = *tables::by_name(m.table);
    const FeedbackRecord r = staged_feedback(m.value, t, {});
    c.expect(r.message == m.message,
             std::string(m.table) + " " + format_real(m.value) + ": message \"" + r.message + "\"");
  }
  return c;
}

// ---- 3. protocol accounting

class Recorder final : public OptimizerBackend {
 public:
  explicit Recorder(std::vector<LearningContext>* out) : out_(out) {}
  ArtifactDelta propose(const LearningContext& ctx) override {
    out_->push_back(ctx);
    return {};
  }
  std::string_view name() const noexcept override { return "recorder"; }

 private:
  std::vector<LearningContext>* out_;
};

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentConfig bbeh_config(std::size_t k, std::size_t updates) {
  ExperimentConfig c;
  c.task = "bbeh";
  c.template_kind = TemplateKind::batch;
  c.batch_size = k;
  c.total_updates = updates;
  c.trials = 1;
  c.seed = 21;
  c.data.size = 60;
  return c;
}

Check accounting() {
  Check c;
  for (std::size_t k : {1u, 3u, 5u}) {
    const ExperimentConfig cfg = bbeh_config(k, 15);
    const ExperimentContext ctx(cfg);
    const std::string tag = "k=" + std::to_string(k);
    c.expect(ctx.train_size() == 15 && ctx.validation_size() == 10 && ctx.test_size() == 35,
             tag + ": split sizes");
    std::vector<LearningContext> seen;
    RunOptions opt;
    opt.backend = [&](const ExperimentContext&, std::uint64_t) {
      return std::make_unique<Recorder>(&seen);
    };
    const TrialReport t = run_trial(ctx, 0, opt);
    c.expect(t.examples_consumed == 15 * k,
             tag + ": consumed " + std::to_string(t.examples_consumed));
    c.expect(seen.size() == 15, tag + ": optimizer calls " + std::to_string(seen.size()));
    std::string all;
    for (const LearningContext& l : seen) all += l.traces;
    const auto items = generate_text_suite(cfg.data.text_kind, cfg.data.size, derive_seed(cfg.seed, "data"));
    std::map<std::string, std::size_t> multiplicity;
    for (std::size_t i = 0; i < kBbehTrain; ++i) ++multiplicity[items[i].question];
    for (const auto& [q, m] : multiplicity) {
      c.expect(occurrences(all, q) == k * m, tag + ": question seen a wrong number of times");
    }
  }

  for (std::size_t n : {26u, 40u, 200u}) {
    const auto s = split_indices(n, SplitProtocol::bbeh, 0);
    bool ordered = s.train.size() == 15 && s.validation.size() == 10 && s.test.size() == n - 25;
    for (std::size_t i = 0; ordered && i < n; ++i) {
      const std::size_t got = i < 15 ? s.train[i] : i < 25 ? s.validation[i - 15] : s.test[i - 25];
      ordered = got == i;
    }
    c.expect(ordered, "bbeh split of " + std::to_string(n));
  }
  for (std::size_t n : {10u, 100u, 1000u, 4350u}) {
    const auto s = split_indices(n, SplitProtocol::pipeline, 5);
    c.expect(s.train.size() * 5 == n * 4 && s.validation.size() * 5 == n && s.test.empty(),
             "pipeline split of " + std::to_string(n));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    std::sort(all.begin(), all.end());
    bool partition = all.size() == n;
    for (std::size_t i = 0; partition && i < n; ++i) partition = all[i] == i;
    c.expect(partition, "pipeline split of " + std::to_string(n) + " is not a partition");
  }

  OptimizerMemory memory(5);
  for (std::size_t i = 0; i < 20; ++i) memory.push(MemoryEntry{i, "change " + std::to_string(i)});
  bool last_five = memory.size() == 5;
  for (std::size_t i = 0; last_five && i < 5; ++i) last_five = memory.entries()[i].step == 15 + i;
  c.expect(last_five, "memory does not hold exactly the last 5 of 20 entries");

  // Same property through the loop: the context after 20 updates.
  std::vector<LearningContext> seen;
  RunOptions opt;
  opt.backend = [&](const ExperimentContext&, std::uint64_t) {
    return std::make_unique<Recorder>(&seen);
  };
  ExperimentConfig cfg = bbeh_config(1, 21);
  cfg.memory_capacity = 5;
  run_trial(ExperimentContext(cfg), 0, opt);
  bool loop_five = seen.size() == 21 && seen.back().memory.size() == 5;
  for (std::size_t i = 0; loop_five && i < 5; ++i) loop_five = seen.back().memory[i].step == 15 + i;
  c.expect(loop_five, "loop memory after 20 updates is not steps 15..19");
  return c;
}

// ---- 4. environment invariants

int brick_count(const Observation& o) {
  int n = 0;
  for (const auto& [key, value] : breakout::kRows) {
    for (const Box& b : *o.group(key)) n += b.w / 8;
  }
  return n;
}

int brick_value(const Observation& o) {
  int total = 0;
  for (const auto& [key, value] : breakout::kRows) {
    for (const Box& b : *o.group(key)) total += (b.w / 8) * value;
  }
  return total;
}

Check environment_invariants() {
  Check c;
  for (Game game : {Game::pong, Game::breakout, Game::invaders}) {
    const auto legal = legal_actions(game);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      EnvConfig cfg{game};
      cfg.seed = seed;
      Environment env(cfg);
      env.reset();
      Rng actions(derive_seed(seed, "acceptance-actions"));
      int bricks = game == Game::breakout ? brick_count(env.observation()) : 0;
      int full_value = game == Game::breakout ? brick_value(env.observation()) : 0;
      double episode_score = 0;
      const std::string tag = std::string(to_string(game)) + " seed " + std::to_string(seed);
      for (int i = 0; i < 10000; ++i) {
        if (env.done()) {
          env.reset();
          if (game == Game::breakout) {
            bricks = brick_count(env.observation());
            full_value = brick_value(env.observation());
          }
          episode_score = 0;
        }
        const StepResult r = env.step(legal[uniform_index(actions, legal.size())]);
        episode_score += r.reward;
        const Observation& o = r.observation;
        const std::string at = tag + " step " + std::to_string(i);
        if (game == Game::pong) {
          const ObjectRecord* ball = o.find("Ball");
          c.expect(ball && ball->y >= pong::kTop && ball->y <= pong::kBottom, at + ": ball y out of range");
        } else if (game == Game::breakout) {
          const ObjectRecord* ball = o.find("Ball");
          c.expect(ball && ball->x >= breakout::kLeftWall && ball->x <= breakout::kRightWall,
                   at + ": ball x out of range");
          const int now = brick_count(o);
          c.expect(now <= bricks, at + ": brick count increased");
          bricks = now;
          c.expect(episode_score == full_value - brick_value(o), at + ": score is not the removed brick value");
        } else {
          int live = 0;
          for (const auto& [k, obj] : o.objects) {
            if (k.starts_with("Bullet") && obj.dy < 0) ++live;
          }
          c.expect(live <= 1, at + ": more than one player bullet");
        }
      }
    }
  }
  return c;
}

// ---- 5. loop closure on pong

ExperimentConfig pong_config() {
  ExperimentConfig c;
  c.name = "pong acceptance";
  c.task = "pong";
  c.artifact_init = ArtifactInit::many_function;
  c.template_kind = TemplateKind::episodic;
  c.horizon = {HorizonPolicy::Mode::one_step, 1};
  c.total_updates = 30;
  c.trials = 5;
  c.seed = 1;
  c.memory_capacity = 5;
  c.environment.train_max_steps = 400;
  c.validation = {2, 1000};
  c.evaluation = {10, 4000};
  c.evaluate_initial = true;
  return c;
}

Check loop_closure() {
  Check c;
  const fs::path a = scratch("pong_a"), b = scratch("pong_b");
  RunOptions oa, ob;
  oa.out_dir = a;
  ob.out_dir = b;
  const ExperimentReport ra = run_experiment(pong_config(), oa);
  const ExperimentReport rb = run_experiment(pong_config(), ob);
  c.expect(ra.trials.size() == 5, "expected 5 trials");
  for (const TrialReport& t : ra.trials) {
    const std::string tag = "trial " + std::to_string(t.index);
    c.expect(!t.failed, tag + " failed: " + t.failure);
    c.expect(t.curve.size() == 31, tag + ": curve length " + std::to_string(t.curve.size()));
    c.expect(t.initial_score.has_value() && t.final_score.samples == 10, tag + ": evaluation protocol");
    if (t.initial_score) {
      c.expect(t.final_score.value > t.initial_score->value,
               tag + ": best " + format_real(t.final_score.value) + " vs initial " +
                   format_real(t.initial_score->value));
    }
  }
  c.expect(experiment_csv(ra) == experiment_csv(rb), "reports differ between runs");
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    c.expect(fs::exists(b / rel) && slurp(entry.path()) == slurp(b / rel), rel.string() + " differs");
    ++compared;
  }
  c.expect(compared > 100, "too few run files compared");
  fs::remove_all(a);
  fs::remove_all(b);
  return c;
}

// ---- 6. checkpoint selection

Check selection() {
  Check c;
  Rng rng(derive_seed(6, "acceptance-selection"));
  const Artifact art = init_many_function(builtin_task("pong"));
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + uniform_index(rng, 40));
    // Few distinct values so ties are common.
    for (double& x : v) x = static_cast<double>(uniform_index(rng, 6)) * 0.125;
    std::vector<Checkpoint> cps;
    for (std::size_t i = 0; i < v.size(); ++i) cps.push_back({i, art, 0.0, v[i]});
    for (MetricDirection d : {MetricDirection::maximize, MetricDirection::minimize}) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (d == MetricDirection::maximize ? v[i] > v[best] : v[i] < v[best]) best = i;
      }
      c.expect(select_best_index(v, d) == best, "sequence " + std::to_string(t));
      c.expect(select_checkpoint(cps, d).step == best, "checkpoint sequence " + std::to_string(t));
    }
  }
  ExperimentConfig housing;
  housing.task = "housing";
  housing.validation_metric = "rmse";
  c.expect(validation_metric(housing).direction == MetricDirection::minimize, "rmse is not minimized");
  return c;
}

// ---- 7. meta-overfit detection

double sums_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxy += x * y[i];
    sxx += x * x;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::optional<std::size_t> window_oracle(const std::vector<CurveRow>& curve, std::size_t w) {
  w = std::min(w, curve.size());
  for (std::size_t start = 0; start + w <= curve.size(); ++start) {
    std::vector<double> t, v;
    for (std::size_t i = start; i < start + w; ++i) {
      t.push_back(curve[i].train_metric);
      v.push_back(curve[i].val_metric);
    }
    if (sums_slope(t) > 1e-9 && sums_slope(v) <= 1e-9) return curve[start + w - 1].step;
  }
  return std::nullopt;
}

Check overfit() {
  Check c;
  // Training climbs; validation climbs, plateaus, then declines.
  std::vector<CurveRow> shaped;
  const double val[] = {0.42, 0.50, 0.56, 0.60, 0.62, 0.62, 0.62, 0.62, 0.62, 0.62,
                        0.61, 0.59, 0.56, 0.53, 0.50, 0.47, 0.44, 0.41, 0.38, 0.35};
  for (std::size_t i = 0; i < 20; ++i) {
    shaped.push_back({i, 0.40 + 0.025 * static_cast<double>(i), val[i], ""});
  }
  for (std::size_t w = 3; w <= 8; ++w) {
    const OverfitReport r = detect_meta_overfit(shaped, w);
    const auto expected = window_oracle(shaped, w);
    c.expect(expected.has_value() && r.flagged && r.divergence_step == expected,
             "window " + std::to_string(w) + ": flagged at " +
                 (r.divergence_step ? std::to_string(*r.divergence_step) : "none"));
  }
  Rng rng(derive_seed(7, "acceptance-overfit"));
  for (int t = 0; t < 500; ++t) {
    std::vector<CurveRow> same;
    double v = uniform_unit(rng);
    const std::size_t n = 3 + uniform_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      v += uniform_unit(rng) - 0.3;
      same.push_back({i, v, v, ""});
    }
    c.expect(!detect_meta_overfit(same, 2 + uniform_index(rng, 8)).flagged,
             "train=val curve " + std::to_string(t) + " flagged");
  }
  return c;
}

// ---- 8. metrics

Check metrics() {
  Check c;
  Rng rng(derive_seed(8, "acceptance-metrics"));
  const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  for (int t = 0; t < 500; ++t) {
    const std::size_t tp = uniform_index(rng, 30), fp = uniform_index(rng, 30);
    const std::size_t fn = uniform_index(rng, 30), tn = uniform_index(rng, 30) + (t == 0 ? 1 : 0);
    std::vector<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < tp; ++i) rows.push_back({1, 1});
    for (std::size_t i = 0; i < fp; ++i) rows.push_back({1, 0});
    for (std::size_t i = 0; i < fn; ++i) rows.push_back({0, 1});
    for (std::size_t i = 0; i < tn; ++i) rows.push_back({0, 0});
    if (rows.empty()) rows.push_back({0, 0});
    shuffle_in_place(rows, rng);
    std::vector<double> preds, golds;
    for (const auto& [p, g] : rows) {
      preds.push_back(p);
      golds.push_back(g);
    }
    const MetricSet m = compute_metrics(preds, golds, TaskKind::classification);
    const double n = static_cast<double>(rows.size());
    const double TP = static_cast<double>(tp), FP = static_cast<double>(fp);
    const double FN = static_cast<double>(fn);
    const double TN = n - TP - FP - FN;
    const double precision = tp + fp ? TP / (TP + FP) : 0.0;
    const double recall = tp + fn ? TP / (TP + FN) : 0.0;
    const double f1 = 2 * tp + fp + fn ? 2 * TP / (2 * TP + FP + FN) : 0.0;
    const std::string tag = "confusion " + std::to_string(tp) + "/" + std::to_string(fp) + "/" +
                            std::to_string(fn) + "/" + std::to_string(tn);
    c.expect(close(*m.accuracy, (TP + TN) / n), tag + ": accuracy");
    c.expect(close(*m.precision, precision), tag + ": precision");
    c.expect(close(*m.recall, recall), tag + ": recall");
    c.expect(close(*m.f1, f1), tag + ": f1");
  }
  for (int t = 0; t < 500; ++t) {
    std::vector<double> preds(1 + uniform_index(rng, 50)), golds(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      preds[i] = (uniform_unit(rng) - 0.5) * 100;
      golds[i] = (uniform_unit(rng) - 0.5) * 100;
    }
    const MetricSet m = compute_metrics(preds, golds, TaskKind::regression);
    c.expect(*m.rmse >= *m.mae, "regression sample " + std::to_string(t) + ": rmse < mae");
  }
  const std::vector<double> flat_gold{3, 3, 3, 3}, guess{1, 2, 3, 4};
  const MetricSet u = compute_metrics(guess, flat_gold, TaskKind::regression);
  c.expect(u.r2_undefined && !u.r2.has_value() && !u.get("r2").has_value(),
           "constant golds must leave r2 undefined");
  const FeedbackRecord fb = ml_feedback(u, TaskKind::regression, tables::housing_r2(), 1, 1);
  c.expect(fb.stage_name == tables::housing_r2().rows().front().name,
           "undefined r2 must fall back to the lowest stage");
  return c;
}

// ---- 9. llm backend against a stub server

struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};

  explicit StubServer(std::function<void(int, httplib::Response&)> reply) {
    server.Post("/v1/chat/completions",
                [this, reply](const httplib::Request&, httplib::Response& res) { reply(hits++, res); });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    thread.join();
  }
  LlmConfig config() const {
    LlmConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port);
    c.model = "stub";
    c.timeout_seconds = 5;
    c.initial_backoff_seconds = 0.01;
    return c;
  }
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

Check llm_resilience() {
  Check c;
  LearningContext ctx;
  ctx.text = "## Task\nPick an answer.\n";
  {
    StubServer stub([](int hit, httplib::Response& res) {
      if (hit < 2) {
        res.status = 500;
        return;
      }
      res.set_content(completion("```slot:answer\nreturn 1\n```"), "application/json");
    });
    LlmBackend llm(stub.config(), [](double) {});
    try {
      const ArtifactDelta d = llm.propose(ctx);
      c.expect(d.bodies.count("answer") == 1, "retry-then-succeed: reply not parsed");
    } catch (const std::exception& e) {
      c.expect(false, std::string("retry-then-succeed threw: ") + e.what());
    }
    c.expect(llm.last_attempts() == 3, "500,500,200 took " + std::to_string(llm.last_attempts()) + " attempts");
  }
  {
    StubServer stub([](int, httplib::Response& res) {
      res.set_content(completion("Move the paddle a little earlier."), "application/json");
    });
    LlmBackend llm(stub.config(), [](double) {});
    bool optimizer_error = false;
    try {
      llm.propose(ctx);
    } catch (const OptimizerError& e) {
      optimizer_error = !e.retriable();
    }
    c.expect(optimizer_error, "prose reply did not end in a non-retriable optimizer error");
    c.expect(stub.hits == 2, "prose reply used " + std::to_string(stub.hits.load()) + " requests");
  }
  {
    StubServer stub([](int, httplib::Response& res) {
      res.set_content(completion("NO CHANGE: keep it."), "application/json");
    });
    ExperimentConfig cfg = bbeh_config(2, 3);
    cfg.optimizer.backend = "llm";
    cfg.optimizer.llm = stub.config();
    const fs::path dir = scratch("llm");
    RunOptions opt;
    opt.out_dir = dir;
    const ExperimentReport rep = run_experiment(cfg, opt);
    c.expect(!rep.trials.empty() && !rep.trials[0].failed, "llm-backed run failed");
    LlmBackend rebuild(cfg.optimizer.llm);
    for (std::size_t step = 0; step < 3; ++step) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%04zu.jsonl", step);
      const std::string log = slurp(dir / "trial_0" / "llm" / name);
      const std::string tag = "step " + std::to_string(step);
      if (log.empty()) {
        c.expect(false, tag + ": no request log");
        continue;
      }
      const auto line = nlohmann::json::parse(split_lines(log).front());
      const std::string request = line["request"].get<std::string>();
      const std::string replayed = replay_context(dir, step, 0);
      const auto body = nlohmann::json::parse(request);
      c.expect(body["messages"][1]["content"].get<std::string>() == replayed,
               tag + ": replay differs from the logged user message");
      LearningContext again;
      again.text = replayed;
      c.expect(rebuild.request_body(again) == request, tag + ": replay does not rebuild the logged payload");
    }
    fs::remove_all(dir);
  }
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Check()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "template laws over 1000 random triples", 10, template_laws},
      {2, "staged feedback goldens", 0, feedback_goldens},
      {3, "protocol accounting, splits and memory", 0, accounting},
      {4, "environment invariants, 10000 steps x 20 seeds per game", 60, environment_invariants},
      {5, "scripted pong loop beats the initial artifact, reproducibly", 300, loop_closure},
      {6, "checkpoint selection equals brute-force argbest", 0, selection},
      {7, "meta-overfit detector matches the window oracle", 0, overfit},
      {8, "classification and regression metrics", 0, metrics},
      {9, "llm backend retries, reformat failure and replay", 0, llm_resilience},
  };
  int failed = 0;
  for (const Criterion& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check result;
    try {
      result = cr.run();
    } catch (const std::exception& e) {
      result.expect(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_seconds > 0) {
      result.expect(seconds < cr.limit_seconds,
                    "took " + format_fixed(seconds, 1) + " s, limit " + format_real(cr.limit_seconds) + " s");
    }
    std::cout << "criterion " << cr.id << ": " << (result.ok() ? "PASS" : "FAIL") << "  " << cr.name
              << " (" << result.detail() << ", " << format_fixed(seconds, 2) << " s)" << std::endl;
    if (!result.ok()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
