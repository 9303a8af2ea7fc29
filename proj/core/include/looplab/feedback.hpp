#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "looplab/feedback_record.hpp"

namespace looplab {

/// One row of a stage table: a half-open or closed interval on the metric and
/// the message template used when the metric falls inside it.
struct StageRow {
  std::string name;
  Stage stage = Stage::info;
  std::optional<double> lower;  ///< unbounded below when empty
  bool lower_inclusive = true;
  std::optional<double> upper;  ///< unbounded above when empty
  bool upper_inclusive = false;
  std::string message_template;

  bool contains(double value) const;
};

/// Threshold table mapping a metric value to a staged message.
///
/// Rows are kept in ascending interval order. `validate` checks that the rows
/// tile the real line: the first row is unbounded below, the last unbounded
/// above, and each boundary is shared by exactly one side.
class StageTable {
 public:
  StageTable() = default;
  StageTable(std::string name, std::string metric, std::vector<StageRow> rows);

  const std::string& name() const noexcept { return name_; }
  const std::string& metric() const noexcept { return metric_; }
  const std::vector<StageRow>& rows() const noexcept { return rows_; }

  /// Throws ConfigError when the rows do not form a strictly increasing
  /// partition of the real line.
  void validate() const;

  /// The unique row containing `value`. Throws MetricError for NaN.
  const StageRow& select(double value) const;

 private:
  std::string name_;
  std::string metric_;
  std::vector<StageRow> rows_;
};

using FillValues = std::map<std::string, std::string, std::less<>>;

/// Replaces `{name}` placeholders. Throws TemplateError for a placeholder with
/// no fill value or an unterminated brace.
std::string render_template(std::string_view message_template,
                            const FillValues& fill);

FeedbackRecord staged_feedback(double metric_value, const StageTable& table,
                               const FillValues& fill);

/// Built-in tables.
namespace tables {
StageTable pong();
StageTable breakout();
StageTable invaders();
StageTable spaceship_f1();
StageTable housing_r2();
/// Lookup by name ("pong", "breakout", "invaders", "spaceship_f1",
/// "housing_r2"); nullopt when unknown.
std::optional<StageTable> by_name(std::string_view name);
}  // namespace tables

/// Fill values for the arcade tables: `score` as an integer and, for Pong and
/// Breakout, `to_win` as a counted phrase ("9 points", "1 point").
FillValues game_fill(std::string_view game, double episode_return);

/// Staged arcade feedback for one episode return.
FeedbackRecord game_feedback(std::string_view game, double episode_return,
                             const StageTable& table);

/// Trimmed exact comparison; when the gold is a "(X)" token the answer's last
/// choice token is compared instead, ignoring letter case.
bool answers_match(std::string_view answer, std::string_view gold);

/// Correct/incorrect guidance; correctness is decided by answers_match.
FeedbackRecord correctness_guide(std::string_view predicted,
                                 std::string_view gold);

/// Last "(X)" token with X a single ASCII letter; the trimmed response when
/// there is none.
std::string extract_choice(std::string_view response);

enum class TaskKind { classification, regression, episodes };

struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> rmse;
  std::optional<double> mae;
  std::optional<double> r2;
  /// Set when golds have zero variance; `r2` is then empty.
  bool r2_undefined = false;
  std::optional<double> episode_return;

  /// Value by metric name; nullopt when absent.
  std::optional<double> get(std::string_view name) const;
};

/// Classification treats `positive_label` as the positive class; other values
/// are negative. Episodes sums the predictions (per-step rewards); golds must
/// still have matching length. Throws MetricError on length mismatch or empty
/// input.
MetricSet compute_metrics(std::span<const double> predictions,
                          std::span<const double> golds, TaskKind kind,
                          double positive_label = 1.0);

/// Multi-line validation report followed by the staged suggestion from
/// `table`. Classification reports accuracy/F1/precision/recall and stages on
/// F1; regression reports RMSE/MAE/r2 and stages on r2. An undefined r2 falls
/// back to the lowest row with a diagnostic note.
FeedbackRecord ml_feedback(const MetricSet& metrics, TaskKind kind,
                           const StageTable& table, int epoch,
                           int total_epochs);

}  // namespace looplab
