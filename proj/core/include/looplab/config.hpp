#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "looplab/optimizer.hpp"
#include "looplab/tasks.hpp"
#include "looplab/templates.hpp"
#include "looplab/text_tasks.hpp"

namespace looplab {

struct OptimizerSettings {
  /// "scripted" or "llm".
  std::string backend = "scripted";
  /// Include the initial artifact in every learning context.
  bool show_initial = false;
  /// Trace payloads are cut to this many characters; 0 keeps them whole.
  std::size_t max_payload_chars = 2000;
  LlmConfig llm;
};

struct EnvironmentSettings {
  int action_repeat = 4;
  double sticky_action_prob = 0.0;
  int enemy_speed_cap = 2;
  /// Step cap of each training rollout.
  std::size_t train_max_steps = 4000;
};

/// Episodes x step cap for arcade tasks; ignored by data tasks.
struct EpisodeProtocol {
  std::size_t episodes = 1;
  std::size_t max_steps = 4000;
};

struct DataSettings {
  /// Text suite kind for the bbeh task.
  TextTaskKind text_kind = TextTaskKind::boolean_eval;
  std::size_t size = 200;
  /// Empty picks bbeh for text tasks and pipeline for tabular tasks.
  std::optional<SplitProtocol> split;
  /// Held-out rows generated separately for tabular tasks.
  std::size_t test_size = 200;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string task = "pong";
  ArtifactInit artifact_init = ArtifactInit::many_function;
  TemplateKind template_kind = TemplateKind::interactive;
  HorizonPolicy horizon;
  std::size_t batch_size = 1;
  std::size_t total_updates = 30;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  /// Explicit per-trial seeds; derived from `seed` when empty.
  std::vector<std::uint64_t> seeds;
  std::size_t memory_capacity = 5;
  /// Run trials on separate threads.
  bool parallel_trials = true;
  OptimizerSettings optimizer;
  /// Stage table name; empty picks the task's table.
  std::string feedback_table;
  EnvironmentSettings environment;
  EpisodeProtocol validation{1, 1000};
  EpisodeProtocol evaluation{10, 4000};
  /// Also score the step-0 artifact under the evaluation protocol.
  bool evaluate_initial = true;
  /// Validation metric for tabular tasks ("f1", "accuracy", "r2", "rmse", ...);
  /// empty picks the task default.
  std::string validation_metric;
  std::optional<double> failure_score;
  std::size_t overfit_window = 5;
  DataSettings data;

  /// Seed of trial `index`.
  std::uint64_t trial_seed(std::size_t index) const;
};

/// Throws ConfigError when fields are out of range or inconsistent.
void validate_config(const ExperimentConfig& config);

/// Parses TOML text. Unknown keys and type mismatches raise ConfigError naming
/// the source and line. Overrides are "dotted.key=value" and are applied in
/// order after the file is read; the value is read as a TOML value and falls
/// back to a plain string.
ExperimentConfig parse_config(std::string_view toml_text, std::string_view source_name = "config",
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Canonical TOML for a config; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& config);

}  // namespace looplab
