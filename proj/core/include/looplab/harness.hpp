#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "looplab/config.hpp"
#include "looplab/optimizer.hpp"

namespace looplab {

struct CurveRow {
  std::size_t step = 0;
  double train_metric = 0.0;
  double val_metric = 0.0;
  std::string stage;

  bool operator==(const CurveRow&) const = default;
};

struct Checkpoint {
  std::size_t step = 0;
  Artifact artifact;
  double train_metric = 0.0;
  double val_metric = 0.0;
};

enum class MetricDirection { maximize, minimize };

/// Best validation metric; ties go to the earliest step. Throws
/// InvariantError for an empty list.
const Checkpoint& select_checkpoint(std::span<const Checkpoint> checkpoints,
                                    MetricDirection direction);
/// Index form of select_checkpoint over a plain metric sequence.
std::size_t select_best_index(std::span<const double> metrics, MetricDirection direction);

struct OverfitReport {
  bool flagged = false;
  /// Last row of the first window where training improves while
  /// validation does not.
  std::optional<std::size_t> divergence_step;
  /// train - validation per row.
  std::vector<double> gap;
};

/// Least-squares slope of `values` against their index.
double trend_slope(std::span<const double> values);

/// Slides a window of `window` rows (the whole curve if shorter) and flags the
/// first window whose training slope is positive while the validation slope
/// is zero or negative. Throws InvariantError for fewer than 3 rows.
OverfitReport detect_meta_overfit(std::span<const CurveRow> curve, std::size_t window = 5);

struct FinalScore {
  double value = 0.0;
  /// Standard error over episodes or test items.
  double standard_error = 0.0;
  std::size_t samples = 0;
  /// Set when the artifact failed and `value` is the failure score.
  std::optional<std::string> error;
};

/// Which metric a config validates and reports on, and its direction.
struct MetricChoice {
  std::string name;
  MetricDirection direction = MetricDirection::maximize;
};
MetricChoice validation_metric(const ExperimentConfig& config);

/// Score assigned to artifacts that cannot run.
double failure_score(const ExperimentConfig& config);

/// Data shared by every trial of an experiment.
struct TaskData;

class ExperimentContext {
 public:
  /// Throws ConfigError for an invalid config.
  explicit ExperimentContext(ExperimentConfig config);
  ~ExperimentContext();
  ExperimentContext(ExperimentContext&&) noexcept;

  const ExperimentConfig& config() const noexcept { return config_; }
  const TaskSpec& task() const noexcept { return *task_; }
  const TaskData& data() const noexcept { return *data_; }
  std::size_t train_size() const noexcept;
  std::size_t validation_size() const noexcept;
  std::size_t test_size() const noexcept;

 private:
  ExperimentConfig config_;
  const TaskSpec* task_;
  std::unique_ptr<TaskData> data_;
};

/// Metric of `artifact` on the validation protocol.
double validate_artifact(const ExperimentContext& ctx, const Artifact& artifact);

/// Held-out score: mean episode return for arcade tasks, test accuracy for
/// text tasks, the validation metric on fresh rows for tabular tasks.
FinalScore evaluate_final(const ExperimentContext& ctx, const Artifact& artifact);

struct TrialReport {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<CurveRow> curve;
  std::size_t best_step = 0;
  double best_val = 0.0;
  FinalScore final_score;
  std::optional<FinalScore> initial_score;
  std::size_t examples_consumed = 0;
  std::size_t rejected_updates = 0;
  std::size_t empty_updates = 0;
  OverfitReport overfit;
};

struct ExperimentReport {
  ExperimentConfig config;
  MetricChoice metric;
  std::vector<TrialReport> trials;

  /// Mean and standard error of final scores over trials that did not fail.
  double final_mean() const;
  double final_standard_error() const;
};

/// Builds the optimizer of one trial.
using BackendFactory =
    std::function<std::unique_ptr<OptimizerBackend>(const ExperimentContext&, std::uint64_t seed)>;

/// The backend named by the config: a scripted hill climber over the task
/// catalog, or the LLM client.
std::unique_ptr<OptimizerBackend> default_backend(const ExperimentContext& ctx,
                                                  std::uint64_t seed);

struct RunOptions {
  /// Run directory; nothing is written when empty.
  std::filesystem::path out_dir;
  BackendFactory backend;
  /// Progress lines; silent when unset.
  std::function<void(const std::string&)> log;
};

/// One trial of the learning loop.
TrialReport run_trial(const ExperimentContext& ctx, std::size_t index,
                      const RunOptions& options = {});

/// All trials, then the summary files when an output directory is given.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

enum class SweepAxis { batch_size, horizon, artifact_init };
SweepAxis parse_sweep_axis(std::string_view name);
std::string_view to_string(SweepAxis axis) noexcept;

struct SweepCell {
  std::string value;
  std::optional<ExperimentReport> report;
  std::string error;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::batch_size;
  std::vector<SweepCell> cells;
};

/// The config with one sweep value applied. Horizon values are "one_step" or
/// "multi_step"; init values are "one_function" or "many_function".
ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepAxis axis,
                                   std::string_view value);

/// Runs one experiment per value with the same seeds; a failing cell is kept
/// with its error and the remaining cells still run.
SweepReport sweep(const ExperimentConfig& config, SweepAxis axis,
                  std::span<const std::string> values, const RunOptions& options = {});

/// Text of the per-trial curve file ("step,train_metric,val_metric,stage").
std::string curve_csv(std::span<const CurveRow> curve);
/// Parses a curve file; throws InvariantError on malformed input.
std::vector<CurveRow> parse_curve_csv(std::string_view text);

/// Human-readable summary written next to the report CSV.
std::string experiment_summary(const ExperimentReport& report);
/// "trial,seed,failed,best_step,best_val,final,final_se,initial,examples,rejected".
std::string experiment_csv(const ExperimentReport& report);
/// One row per cell: value, trials, final mean, final SE, best validation
/// mean, best validation SE.
std::string sweep_csv(const SweepReport& report);

}  // namespace looplab
