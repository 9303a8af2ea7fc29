#include "looplab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "looplab/environments.hpp"
#include "looplab/feedback.hpp"
#include "looplab/report.hpp"
#include "looplab/text_tasks.hpp"
#include "looplab/util.hpp"

namespace looplab {

// ------------------------------------------------------------ selection

std::size_t select_best_index(std::span<const double> metrics, MetricDirection direction) {
  if (metrics.empty()) throw InvariantError("cannot select from an empty metric sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    const bool better = direction == MetricDirection::maximize ? metrics[i] > metrics[best]
                                                               : metrics[i] < metrics[best];
    if (better) best = i;
  }
  return best;
}

const Checkpoint& select_checkpoint(std::span<const Checkpoint> checkpoints,
                                    MetricDirection direction) {
  std::vector<double> metrics;
  for (const Checkpoint& c : checkpoints) metrics.push_back(c.val_metric);
  return checkpoints[select_best_index(metrics, direction)];
}

double trend_slope(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  const double mean_x = (n - 1.0) / 2.0;
  const double mean_y = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    num += dx * (values[i] - mean_y);
    den += dx * dx;
  }
  return num / den;
}

OverfitReport detect_meta_overfit(std::span<const CurveRow> curve, std::size_t window) {
  if (curve.size() < 3) throw InvariantError("overfit detection needs at least 3 curve rows");
  if (window < 2) throw InvariantError("overfit window must be at least 2");
  OverfitReport report;
  for (const CurveRow& r : curve) report.gap.push_back(r.train_metric - r.val_metric);
  const std::size_t w = std::min(window, curve.size());
  constexpr double kEps = 1e-12;
  for (std::size_t end = w; end <= curve.size(); ++end) {
    std::vector<double> train;
    std::vector<double> val;
    for (std::size_t i = end - w; i < end; ++i) {
      train.push_back(curve[i].train_metric);
      val.push_back(curve[i].val_metric);
    }
    if (trend_slope(train) > kEps && trend_slope(val) <= kEps) {
      report.flagged = true;
      report.divergence_step = curve[end - 1].step;
      break;
    }
  }
  return report;
}

// ------------------------------------------------------------ task data

MetricChoice validation_metric(const ExperimentConfig& config) {
  const TaskSpec& spec = builtin_task(config.task);
  MetricChoice m;
  switch (spec.family) {
    case TaskFamily::arcade:
      m.name = "mean_return";
      break;
    case TaskFamily::text:
      m.name = "accuracy";
      break;
    case TaskFamily::tabular:
      m.name = !config.validation_metric.empty()
                   ? config.validation_metric
                   : (spec.metric_kind == TaskKind::regression ? "r2" : "f1");
      break;
  }
  if (m.name == "rmse" || m.name == "mae") m.direction = MetricDirection::minimize;
  return m;
}

double failure_score(const ExperimentConfig& config) {
  if (config.failure_score) return *config.failure_score;
  const TaskSpec& spec = builtin_task(config.task);
  if (spec.family == TaskFamily::arcade) return spec.name == "pong" ? -21.0 : 0.0;
  const MetricChoice m = validation_metric(config);
  if (m.name == "r2") return -1.0;
  if (m.direction == MetricDirection::minimize) return 1e9;
  return 0.0;
}

struct TaskData {
  StageTable table;
  HostMap host;
  std::optional<Game> game;
  std::vector<TextTask> text_train, text_validation, text_test;
  std::vector<TabularExample> tab_train, tab_validation, tab_test;
};

ExperimentContext::ExperimentContext(ExperimentConfig config)
    : config_(std::move(config)), task_(nullptr), data_(std::make_unique<TaskData>()) {
  validate_config(config_);
  task_ = &builtin_task(config_.task);
  TaskData& d = *data_;
  const std::string table_name = config_.feedback_table.empty() ? task_->table
                                                                : config_.feedback_table;
  if (!table_name.empty()) {
    auto t = tables::by_name(table_name);
    if (!t) throw ConfigError("unknown feedback table '" + table_name + "'");
    d.table = *t;
  }
  d.host = task_host_functions(*task_);
  const std::uint64_t data_seed = derive_seed(config_.seed, "data");
  switch (task_->family) {
    case TaskFamily::arcade:
      d.game = parse_game(task_->name);
      break;
    case TaskFamily::text: {
      const auto items = generate_text_suite(config_.data.text_kind, config_.data.size, data_seed);
      auto split = split_dataset(items, config_.data.split.value_or(SplitProtocol::bbeh),
                                 derive_seed(config_.seed, "split"));
      d.text_train = std::move(split.train);
      d.text_validation = std::move(split.validation);
      d.text_test = std::move(split.test);
      if (d.text_test.empty()) {
        d.text_test = generate_text_suite(config_.data.text_kind, config_.data.test_size,
                                          derive_seed(config_.seed, "test"));
      }
      break;
    }
    case TaskFamily::tabular: {
      const auto rows = generate_tabular_dataset(task_->name, config_.data.size, data_seed);
      auto split = split_dataset(rows, config_.data.split.value_or(SplitProtocol::pipeline),
                                 derive_seed(config_.seed, "split"));
      d.tab_train = std::move(split.train);
      d.tab_validation = std::move(split.validation);
      d.tab_test = generate_tabular_dataset(task_->name, config_.data.test_size,
                                            derive_seed(config_.seed, "test"));
      break;
    }
  }
}

ExperimentContext::~ExperimentContext() = default;
ExperimentContext::ExperimentContext(ExperimentContext&&) noexcept = default;

std::size_t ExperimentContext::train_size() const noexcept {
  return data_->text_train.size() + data_->tab_train.size();
}
std::size_t ExperimentContext::validation_size() const noexcept {
  return data_->text_validation.size() + data_->tab_validation.size();
}
std::size_t ExperimentContext::test_size() const noexcept {
  return data_->text_test.size() + data_->tab_test.size();
}

namespace {

// ------------------------------------------------------------ execution

FeedbackRecord error_feedback(const ExperimentContext& ctx, const std::string& what) {
  FeedbackRecord fb;
  fb.score = failure_score(ctx.config());
  fb.message = "The program failed with an error: " + what +
               "\nFix the error before tuning behavior.";
  fb.stage = Stage::low;
  fb.stage_name = "error";
  return fb;
}

struct EpisodeRun {
  double episode_return = 0.0;
  std::size_t steps = 0;
  std::optional<std::string> error;
  /// Most recent step graphs with their time index.
  std::deque<TimedGraph> tail;
};

EpisodeRun run_episode(const ExperimentContext& ctx, const Artifact& artifact,
                       std::uint64_t env_seed, std::uint64_t policy_seed, std::size_t max_steps,
                       std::size_t keep) {
  const ExperimentConfig& c = ctx.config();
  EnvConfig ec;
  ec.game = *ctx.data().game;
  ec.action_repeat = c.environment.action_repeat;
  ec.sticky_action_prob = c.environment.sticky_action_prob;
  ec.enemy_speed_cap = c.environment.enemy_speed_cap;
  ec.seed = env_seed;
  ec.max_steps = static_cast<int>(max_steps);
  Environment env(ec);
  env.reset();
  Rng rng(policy_seed);
  ExecOptions opt;
  opt.rng = &rng;
  opt.host = &ctx.data().host;

  EpisodeRun run;
  while (!env.done()) {
    ExecutionOutcome out = execute_traced(artifact, to_value(env.observation()), opt);
    const bool ok = out.ok();
    if (!ok) run.error = "step " + std::to_string(run.steps) + ": " + out.error->what();
    if (keep > 0) {
      run.tail.push_back({run.steps, std::move(out.graph)});
      while (run.tail.size() > keep) run.tail.pop_front();
    }
    if (!ok) break;
    env.step(out.output.as_int());
    ++run.steps;
  }
  run.episode_return = env.episode_return();
  return run;
}

struct Sample {
  WorkflowGraph graph;
  Value output;
  std::optional<std::string> error;
};

Sample run_one(const ExperimentContext& ctx, const Artifact& artifact, const Value& input,
               Rng& rng) {
  ExecOptions opt;
  opt.rng = &rng;
  opt.host = &ctx.data().host;
  ExecutionOutcome out = execute_traced(artifact, input, opt);
  Sample s{std::move(out.graph), std::move(out.output), std::nullopt};
  if (out.error) s.error = out.error->what();
  return s;
}

std::string answer_text(const Sample& s) {
  if (s.error || s.output.type() != Value::Type::string) return {};
  return s.output.as_string();
}

double as_number(const Value& v) {
  if (v.type() == Value::Type::integer) return static_cast<double>(v.as_int());
  return v.as_real();
}

TaskKind tabular_kind(const ExperimentContext& ctx) { return ctx.task().metric_kind; }

/// Metric on a set of tabular rows; nullopt plus the error when a row fails.
std::pair<double, std::optional<std::string>> tabular_metric(
    const ExperimentContext& ctx, const Artifact& artifact,
    const std::vector<TabularExample>& rows, MetricSet* metrics_out = nullptr) {
  std::vector<double> preds;
  std::vector<double> golds;
  Rng rng(derive_seed(ctx.config().seed, "tabular-policy"));
  for (const TabularExample& ex : rows) {
    Sample s = run_one(ctx, artifact, ex.row, rng);
    if (s.error) return {failure_score(ctx.config()), s.error};
    preds.push_back(as_number(s.output));
    golds.push_back(ex.target);
  }
  const MetricSet m = compute_metrics(preds, golds, tabular_kind(ctx));
  if (metrics_out != nullptr) *metrics_out = m;
  const std::string name = validation_metric(ctx.config()).name;
  const auto v = m.get(name);
  if (!v) return {failure_score(ctx.config()), name + " is undefined on these rows"};
  return {*v, std::nullopt};
}

double text_accuracy(const ExperimentContext& ctx, const Artifact& artifact,
                     const std::vector<TextTask>& items, std::vector<double>* per_item) {
  Rng rng(derive_seed(ctx.config().seed, "text-eval-policy"));
  std::vector<double> hits;
  for (const TextTask& t : items) {
    const Sample s = run_one(ctx, artifact, Value(t.question), rng);
    hits.push_back(answers_match(answer_text(s), t.gold) ? 1.0 : 0.0);
  }
  if (per_item != nullptr) *per_item = hits;
  return hits.empty() ? 0.0 : mean(hits);
}

// ------------------------------------------------------------ training step

struct TrainStep {
  LearningGraph lg;
  double metric = 0.0;
  std::string stage;
  std::size_t examples = 0;
};

/// Sampling without replacement inside an epoch, reshuffled per epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::size_t next() {
    if (pos_ == order_.size()) {
      order_.resize(n_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      Rng rng(derive_seed(seed_, "epoch", epoch_++));
      shuffle_in_place(order_, rng);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::string stage_of(const LearningGraph& lg) {
  if (lg.aggregate_feedback) return lg.aggregate_feedback->stage_name;
  if (!lg.members.empty() && lg.members.front().feedback()) {
    return lg.members.front().feedback()->stage_name;
  }
  return {};
}

LearningGraph compose(std::vector<WorkflowGraph> graphs) {
  if (graphs.size() == 1) return template_interactive(std::move(graphs.front()));
  return template_batch(std::move(graphs));
}

TrainStep arcade_step(const ExperimentContext& ctx, const Artifact& artifact,
                      std::uint64_t trial_seed, std::size_t step) {
  const ExperimentConfig& c = ctx.config();
  const std::string game(to_string(*ctx.data().game));
  const bool episodic = c.template_kind == TemplateKind::episodic;
  const std::size_t episodes = c.template_kind == TemplateKind::batch ? c.batch_size : 1;
  const std::size_t keep = episodic ? c.horizon.effective_horizon() : 1;

  TrainStep out;
  std::vector<WorkflowGraph> graphs;
  std::vector<double> returns;
  for (std::size_t b = 0; b < episodes; ++b) {
    const std::uint64_t base = derive_seed(derive_seed(trial_seed, "train", step), "episode", b);
    EpisodeRun run = run_episode(ctx, artifact, derive_seed(base, "env"),
                                 derive_seed(base, "policy"), c.environment.train_max_steps, keep);
    const FeedbackRecord fb = run.error ? error_feedback(ctx, *run.error)
                                        : game_feedback(game, run.episode_return, ctx.data().table);
    returns.push_back(run.error ? fb.score : run.episode_return);
    if (episodic) {
      std::vector<TimedGraph> steps(std::make_move_iterator(run.tail.begin()),
                                    std::make_move_iterator(run.tail.end()));
      out.lg = truncate_horizon(template_episodic(std::move(steps), fb), c.horizon);
    } else {
      graphs.push_back(attach_feedback(run.tail.back().graph, fb));
    }
  }
  if (!episodic) out.lg = compose(std::move(graphs));
  out.metric = mean(returns);
  out.stage = stage_of(out.lg);
  return out;
}

TrainStep text_step(const ExperimentContext& ctx, const Artifact& artifact,
                    std::uint64_t trial_seed, std::size_t step, EpochSampler& sampler) {
  const auto& train = ctx.data().text_train;
  Rng rng(derive_seed(trial_seed, "text-policy", step));
  TrainStep out;
  std::vector<WorkflowGraph> graphs;
  std::vector<double> scores;
  for (std::size_t b = 0; b < ctx.config().batch_size; ++b) {
    const TextTask& t = train[sampler.next()];
    Sample s = run_one(ctx, artifact, Value(t.question), rng);
    const FeedbackRecord fb =
        s.error ? error_feedback(ctx, *s.error) : correctness_guide(answer_text(s), t.gold);
    scores.push_back(s.error ? 0.0 : fb.score);
    graphs.push_back(attach_feedback(s.graph, fb));
    ++out.examples;
  }
  out.lg = compose(std::move(graphs));
  out.metric = mean(scores);
  out.stage = stage_of(out.lg);
  return out;
}

TrainStep tabular_step(const ExperimentContext& ctx, const Artifact& artifact,
                       std::uint64_t trial_seed, std::size_t step, EpochSampler& sampler) {
  const ExperimentConfig& c = ctx.config();
  const auto& train = ctx.data().tab_train;
  Rng rng(derive_seed(trial_seed, "tabular-policy", step));
  TrainStep out;
  std::vector<WorkflowGraph> graphs;
  std::optional<std::string> error;
  for (std::size_t b = 0; b < c.batch_size; ++b) {
    const TabularExample& ex = train[sampler.next()];
    Sample s = run_one(ctx, artifact, ex.row, rng);
    FeedbackRecord fb;
    if (s.error) {
      fb = error_feedback(ctx, *s.error);
      error = s.error;
    } else {
      fb.score = as_number(s.output);
      fb.message = "Predicted " + format_real(fb.score) + ", target " + format_real(ex.target) + ".";
    }
    graphs.push_back(attach_feedback(s.graph, fb));
    ++out.examples;
  }
  out.lg = template_batch(std::move(graphs));
  MetricSet metrics;
  auto [value, err] = tabular_metric(ctx, artifact, train, &metrics);
  if (!error) error = err;
  out.metric = value;
  if (error) {
    out.lg.aggregate_feedback = error_feedback(ctx, *error);
  } else {
    out.lg.aggregate_feedback =
        ml_feedback(metrics, tabular_kind(ctx), ctx.data().table, static_cast<int>(step) + 1,
                    static_cast<int>(c.total_updates));
  }
  out.stage = stage_of(out.lg);
  return out;
}

// ------------------------------------------------------------ files

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string step_name(std::size_t step, std::string_view ext) {
  std::ostringstream s;
  s << "step_" << std::setw(4) << std::setfill('0') << step << ext;
  return s.str();
}

std::string describe_delta(const ArtifactDelta& d) {
  if (d.empty()) return "no change";
  std::string out = "edited";
  bool first = true;
  for (const auto& [name, body] : d.bodies) {
    out += (first ? " " : ", ") + name;
    first = false;
  }
  const std::string first_line = split_lines(d.rationale).empty()
                                     ? std::string()
                                     : std::string(trim(split_lines(d.rationale).front()));
  if (!first_line.empty()) out += " (" + first_line + ")";
  return out;
}

std::string exchange_line(const LlmExchange& ex) {
  const nlohmann::json j = {{"request", ex.request},
                            {"status", ex.status},
                            {"response", ex.response},
                            {"error", ex.error}};
  return j.dump() + "\n";
}

std::vector<std::pair<std::string, std::string>> editable_bodies(const Artifact& a) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Slot& s : a.slots()) {
    if (s.editable) out.emplace_back(s.name, s.body);
  }
  return out;
}

}  // namespace

double validate_artifact(const ExperimentContext& ctx, const Artifact& artifact) {
  const ExperimentConfig& c = ctx.config();
  switch (ctx.task().family) {
    case TaskFamily::arcade: {
      std::vector<double> returns;
      for (std::size_t e = 0; e < c.validation.episodes; ++e) {
        const EpisodeRun run =
            run_episode(ctx, artifact, derive_seed(c.seed, "validation", e),
                        derive_seed(c.seed, "validation-policy", e), c.validation.max_steps, 0);
        if (run.error) return failure_score(c);
        returns.push_back(run.episode_return);
      }
      return mean(returns);
    }
    case TaskFamily::text:
      return text_accuracy(ctx, artifact, ctx.data().text_validation, nullptr);
    case TaskFamily::tabular:
      return tabular_metric(ctx, artifact, ctx.data().tab_validation).first;
  }
  return 0.0;
}

FinalScore evaluate_final(const ExperimentContext& ctx, const Artifact& artifact) {
  const ExperimentConfig& c = ctx.config();
  FinalScore out;
  switch (ctx.task().family) {
    case TaskFamily::arcade: {
      std::vector<double> returns;
      for (std::size_t e = 0; e < c.evaluation.episodes; ++e) {
        const EpisodeRun run =
            run_episode(ctx, artifact, derive_seed(c.seed, "evaluation", e),
                        derive_seed(c.seed, "evaluation-policy", e), c.evaluation.max_steps, 0);
        if (run.error) {
          out.value = failure_score(c);
          out.error = "episode " + std::to_string(e) + ", " + *run.error;
          out.samples = e + 1;
          return out;
        }
        returns.push_back(run.episode_return);
      }
      out.value = mean(returns);
      out.standard_error = standard_error(returns);
      out.samples = returns.size();
      return out;
    }
    case TaskFamily::text: {
      std::vector<double> hits;
      out.value = text_accuracy(ctx, artifact, ctx.data().text_test, &hits);
      out.standard_error = standard_error(hits);
      out.samples = hits.size();
      return out;
    }
    case TaskFamily::tabular: {
      auto [value, error] = tabular_metric(ctx, artifact, ctx.data().tab_test);
      out.value = value;
      out.error = error;
      out.samples = ctx.data().tab_test.size();
      return out;
    }
  }
  return out;
}

std::unique_ptr<OptimizerBackend> default_backend(const ExperimentContext& ctx,
                                                  std::uint64_t seed) {
  const ExperimentConfig& c = ctx.config();
  if (c.optimizer.backend == "llm") return std::make_unique<LlmBackend>(c.optimizer.llm);
  return std::make_unique<ScriptedOptimizer>(task_catalog(ctx.task(), c.artifact_init),
                                             derive_seed(seed, "optimizer"));
}

TrialReport run_trial(const ExperimentContext& ctx, std::size_t index, const RunOptions& options) {
  const ExperimentConfig& c = ctx.config();
  const MetricChoice metric = validation_metric(c);
  TrialReport report;
  report.index = index;
  report.seed = c.trial_seed(index);
  const std::uint64_t seed = report.seed;
  const bool write = !options.out_dir.empty();
  const std::filesystem::path dir = options.out_dir / ("trial_" + std::to_string(index));
  auto log = [&](const std::string& line) {
    if (options.log) options.log("trial " + std::to_string(index) + ": " + line);
  };

  std::unique_ptr<OptimizerBackend> backend =
      options.backend ? options.backend(ctx, seed) : default_backend(ctx, seed);
  LlmBackend* llm = dynamic_cast<LlmBackend*>(backend.get());
  OptimizerMemory memory(c.memory_capacity);
  const Artifact initial = init_artifact(ctx.task(), c.artifact_init);
  ContextOptions copt;
  copt.initial_artifact = c.optimizer.show_initial ? &initial : nullptr;
  copt.trace.max_payload_chars = c.optimizer.max_payload_chars;
  EpochSampler sampler(std::max<std::size_t>(ctx.train_size(), 1),
                       derive_seed(seed, "batches"));

  Artifact artifact = initial;
  std::string change = "initial artifact";
  std::vector<Checkpoint> checkpoints;
  for (std::size_t step = 0; step <= c.total_updates; ++step) {
    TrainStep ts;
    switch (ctx.task().family) {
      case TaskFamily::arcade:
        ts = arcade_step(ctx, artifact, seed, step);
        break;
      case TaskFamily::text:
        ts = text_step(ctx, artifact, seed, step, sampler);
        break;
      case TaskFamily::tabular:
        ts = tabular_step(ctx, artifact, seed, step, sampler);
        break;
    }
    if (step < c.total_updates) report.examples_consumed += ts.examples;
    const double val = validate_artifact(ctx, artifact);
    checkpoints.push_back({step, artifact, ts.metric, val});
    report.curve.push_back({step, ts.metric, val, ts.stage});
    if (write) write_file(dir / "artifacts" / step_name(step, ".artifact"), write_artifact(artifact));
    log("step " + std::to_string(step) + " train " + format_real(ts.metric) + " val " +
        format_real(val) + " [" + ts.stage + "]");
    if (step == c.total_updates) break;

    const LearningContext lctx =
        render_context(ts.lg, artifact, memory, ctx.task().background, step, copt);
    if (write) write_file(dir / "contexts" / step_name(step, ".txt"), lctx.text);

    std::optional<ArtifactDelta> delta;
    std::string rejection;
    std::optional<OptimizerError> hard_failure;
    try {
      delta = backend->propose(lctx);
    } catch (const OptimizerError& e) {
      if (e.retriable()) {
        hard_failure = e;
      } else {
        rejection = e.what();
      }
    }
    if (llm != nullptr && write) {
      std::string lines;
      for (const LlmExchange& ex : llm->last_exchanges()) lines += exchange_line(ex);
      write_file(dir / "llm" / step_name(step, ".jsonl"), lines);
    }
    if (hard_failure) {
      report.failed = true;
      report.failure = "step " + std::to_string(step) + ": " + hard_failure->what();
      log("failed: " + report.failure);
      break;
    }

    MemoryEntry entry;
    entry.step = step;
    entry.change = change;
    entry.bodies = editable_bodies(artifact);
    entry.score = lctx.current_score;
    entry.stage_name = ts.stage;
    entry.feedback = lctx.feedback;
    memory.push(std::move(entry));

    if (delta) {
      try {
        Artifact next = apply_delta(artifact, *delta);
        change = describe_delta(*delta);
        if (delta->empty()) ++report.empty_updates;
        artifact = std::move(next);
      } catch (const ValidationError& e) {
        rejection = e.what();
      }
    }
    if (!rejection.empty()) {
      ++report.rejected_updates;
      change = "rejected update: " + rejection;
      log(change);
    }
  }

  const Checkpoint& best = select_checkpoint(checkpoints, metric.direction);
  report.best_step = best.step;
  report.best_val = best.val_metric;
  if (report.curve.size() >= 3) report.overfit = detect_meta_overfit(report.curve, c.overfit_window);
  if (!report.failed) {
    report.final_score = evaluate_final(ctx, best.artifact);
    if (c.evaluate_initial) report.initial_score = evaluate_final(ctx, initial);
  }
  if (write) {
    write_file(dir / "curve.csv", curve_csv(report.curve));
    write_file(dir / "best.artifact", write_artifact(best.artifact));
  }
  log("best step " + std::to_string(report.best_step) + " final " +
      format_real(report.final_score.value));
  return report;
}

double ExperimentReport::final_mean() const {
  std::vector<double> v;
  for (const TrialReport& t : trials) {
    if (!t.failed) v.push_back(t.final_score.value);
  }
  return v.empty() ? 0.0 : mean(v);
}

double ExperimentReport::final_standard_error() const {
  std::vector<double> v;
  for (const TrialReport& t : trials) {
    if (!t.failed) v.push_back(t.final_score.value);
  }
  return standard_error(v);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentContext ctx(config);
  ExperimentReport report;
  report.config = config;
  report.metric = validation_metric(config);
  report.trials.resize(config.trials);

  std::mutex log_mutex;
  RunOptions trial_options = options;
  if (options.log) {
    trial_options.log = [&](const std::string& line) {
      std::lock_guard<std::mutex> lock(log_mutex);
      options.log(line);
    };
  }
  auto run_one_trial = [&](std::size_t i) {
    try {
      report.trials[i] = run_trial(ctx, i, trial_options);
    } catch (const std::exception& e) {
      TrialReport failed;
      failed.index = i;
      failed.seed = config.trial_seed(i);
      failed.failed = true;
      failed.failure = e.what();
      report.trials[i] = std::move(failed);
      if (trial_options.log) trial_options.log("trial " + std::to_string(i) + ": " + e.what());
    }
  };

  const std::size_t workers =
      config.parallel_trials
          ? std::min<std::size_t>(config.trials,
                                  std::max(1u, std::thread::hardware_concurrency()))
          : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.trials; ++i) run_one_trial(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.trials; i = next++) run_one_trial(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  if (!options.out_dir.empty()) {
    const auto& dir = options.out_dir;
    write_file(dir / "config.toml", dump_config(config));
    write_file(dir / "report.csv", experiment_csv(report));
    write_file(dir / "summary.txt", experiment_summary(report));
    std::vector<std::vector<CurveRow>> curves;
    for (const TrialReport& t : report.trials) {
      if (!t.curve.empty()) curves.push_back(t.curve);
    }
    const auto rows = aggregate_curves(curves);
    write_file(dir / "curve_aggregate.csv", aggregate_csv(rows));
    write_file(dir / "curves.svg", curve_svg(rows, config.name));
  }
  return report;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "batch_size") return SweepAxis::batch_size;
  if (name == "horizon") return SweepAxis::horizon;
  if (name == "artifact_init") return SweepAxis::artifact_init;
  throw ConfigError("unknown sweep axis '" + std::string(name) +
                    "' (expected batch_size, horizon or artifact_init)");
}

std::string_view to_string(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::batch_size:
      return "batch_size";
    case SweepAxis::horizon:
      return "horizon";
    case SweepAxis::artifact_init:
      return "artifact_init";
  }
  return "batch_size";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepAxis axis,
                                   std::string_view value) {
  ExperimentConfig c = config;
  switch (axis) {
    case SweepAxis::batch_size: {
      std::size_t k = 0;
      const std::string v(value);
      std::size_t used = 0;
      try {
        k = std::stoul(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || k < 1) {
        throw ConfigError("batch size sweep value '" + v + "' is not a positive integer");
      }
      c.batch_size = k;
      if (builtin_task(c.task).family == TaskFamily::arcade) c.template_kind = TemplateKind::batch;
      break;
    }
    case SweepAxis::horizon:
      if (builtin_task(c.task).family != TaskFamily::arcade) {
        throw ConfigError("the horizon axis needs an arcade task");
      }
      if (value == "one_step") {
        c.horizon.mode = HorizonPolicy::Mode::one_step;
      } else if (value == "multi_step") {
        c.horizon.mode = HorizonPolicy::Mode::multi_step;
      } else {
        throw ConfigError("horizon sweep value '" + std::string(value) +
                          "' is not one_step or multi_step");
      }
      c.template_kind = TemplateKind::episodic;
      break;
    case SweepAxis::artifact_init:
      c.artifact_init = parse_artifact_init(value);
      break;
  }
  validate_config(c);
  return c;
}

SweepReport sweep(const ExperimentConfig& config, SweepAxis axis,
                  std::span<const std::string> values, const RunOptions& options) {
  SweepReport out;
  out.axis = axis;
  for (const std::string& v : values) {
    SweepCell cell;
    cell.value = v;
    try {
      ExperimentConfig c = apply_sweep_value(config, axis, v);
      c.name = config.name + " " + std::string(to_string(axis)) + "=" + v;
      RunOptions o = options;
      if (!options.out_dir.empty()) {
        o.out_dir = options.out_dir / (std::string(to_string(axis)) + "_" + v);
      }
      cell.report = run_experiment(c, o);
    } catch (const std::exception& e) {
      cell.error = e.what();
      if (options.log) options.log("sweep " + v + ": " + e.what());
    }
    out.cells.push_back(std::move(cell));
  }
  if (!options.out_dir.empty()) write_file(options.out_dir / "sweep.csv", sweep_csv(out));
  return out;
}

std::string curve_csv(std::span<const CurveRow> curve) {
  std::string out = "step,train_metric,val_metric,stage\n";
  for (const CurveRow& r : curve) {
    out += std::to_string(r.step) + "," + format_real(r.train_metric) + "," +
           format_real(r.val_metric) + "," + r.stage + "\n";
  }
  return out;
}

std::vector<CurveRow> parse_curve_csv(std::string_view text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "step,train_metric,val_metric,stage") {
    throw InvariantError("curve file has no step,train_metric,val_metric,stage header");
  }
  std::vector<CurveRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(lines[i]);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    if (lines[i].back() == ',') f.emplace_back();
    if (f.size() != 4) {
      throw InvariantError("curve line " + std::to_string(i + 1) + " does not have 4 fields");
    }
    CurveRow r;
    try {
      std::size_t used = 0;
      r.step = std::stoul(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("step");
      r.train_metric = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("train");
      r.val_metric = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("val");
    } catch (const std::exception&) {
      throw InvariantError("curve line " + std::to_string(i + 1) + " has a malformed number");
    }
    r.stage = f[3];
    out.push_back(std::move(r));
  }
  return out;
}

std::string experiment_csv(const ExperimentReport& report) {
  std::string out =
      "trial,seed,failed,best_step,best_val,final,final_se,initial,examples,rejected\n";
  for (const TrialReport& t : report.trials) {
    out += std::to_string(t.index) + "," + std::to_string(t.seed) + "," +
           (t.failed ? "1" : "0") + "," + std::to_string(t.best_step) + "," +
           format_real(t.best_val) + "," + format_real(t.final_score.value) + "," +
           format_real(t.final_score.standard_error) + "," +
           (t.initial_score ? format_real(t.initial_score->value) : std::string()) + "," +
           std::to_string(t.examples_consumed) + "," + std::to_string(t.rejected_updates) + "\n";
  }
  return out;
}

std::string experiment_summary(const ExperimentReport& report) {
  const ExperimentConfig& c = report.config;
  std::ostringstream o;
  o << "Experiment: " << c.name << "\n";
  o << "Task: " << c.task << ", " << to_string(c.artifact_init) << ", "
    << to_string(c.template_kind) << " template";
  if (c.template_kind == TemplateKind::episodic) {
    o << " (" << to_string(c.horizon.mode) << ", horizon " << c.horizon.effective_horizon()
      << ")";
  }
  o << ", batch size " << c.batch_size << "\n";
  o << "Updates per trial: " << c.total_updates << ", memory " << c.memory_capacity
    << ", optimizer " << c.optimizer.backend << "\n";
  o << "Validation metric: " << report.metric.name << " ("
    << (report.metric.direction == MetricDirection::maximize ? "higher" : "lower")
    << " is better)\n\n";
  std::size_t ok = 0;
  for (const TrialReport& t : report.trials) {
    o << "Trial " << t.index << " (seed " << t.seed << "): ";
    if (t.failed) {
      o << "FAILED, " << t.failure << "\n";
      continue;
    }
    ++ok;
    o << "best step " << t.best_step << ", validation " << format_fixed(t.best_val, 4)
      << ", final " << format_fixed(t.final_score.value, 4) << " +/- "
      << format_fixed(t.final_score.standard_error, 4);
    if (t.final_score.error) o << " (artifact failed: " << *t.final_score.error << ")";
    if (t.initial_score) o << ", initial " << format_fixed(t.initial_score->value, 4);
    if (t.examples_consumed > 0) o << ", examples " << t.examples_consumed;
    if (t.rejected_updates > 0) o << ", rejected updates " << t.rejected_updates;
    if (t.overfit.flagged) o << ", overfitting from step " << *t.overfit.divergence_step;
    o << "\n";
  }
  o << "\nFinal score over " << ok << " of " << report.trials.size()
    << " trials: " << format_fixed(report.final_mean(), 4) << " +/- "
    << format_fixed(report.final_standard_error(), 4) << "\n";
  return o.str();
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = "value,direction,trials,failed,final_mean,final_se,best_val_mean,best_val_se\n";
  for (const SweepCell& cell : report.cells) {
    if (!cell.report) {
      out += cell.value + ",,0,0,,,,\n";
      continue;
    }
    const ExperimentReport& r = *cell.report;
    std::vector<double> best;
    std::size_t failed = 0;
    for (const TrialReport& t : r.trials) {
      if (t.failed) {
        ++failed;
      } else {
        best.push_back(t.best_val);
      }
    }
    out += cell.value + "," +
           (r.metric.direction == MetricDirection::maximize ? "maximize" : "minimize") + "," +
           std::to_string(r.trials.size()) + "," + std::to_string(failed) + "," +
           format_real(r.final_mean()) + "," + format_real(r.final_standard_error()) + "," +
           format_real(best.empty() ? 0.0 : mean(best)) + "," + format_real(standard_error(best)) +
           "\n";
  }
  return out;
}

}  // namespace looplab
