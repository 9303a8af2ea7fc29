#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "looplab/harness.hpp"

namespace looplab {

/// Mean and standard error across trials at one step.
struct AggregateRow {
  std::size_t step = 0;
  std::size_t trials = 0;
  double train_mean = 0.0;
  double train_se = 0.0;
  double val_mean = 0.0;
  double val_se = 0.0;
};

/// Rows for every step present in at least one curve, in step order.
std::vector<AggregateRow> aggregate_curves(std::span<const std::vector<CurveRow>> curves);

/// "step,trials,train_mean,train_se,val_mean,val_se".
std::string aggregate_csv(std::span<const AggregateRow> rows);

/// Static SVG of the validation mean with a one-SE band and the training mean
/// as a dashed line.
std::string curve_svg(std::span<const AggregateRow> rows, std::string_view title);

/// A results table: one row label plus one value per column.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<MetricDirection> directions;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
};

/// Markdown table with the best value of each column in bold; ties go to the
/// first row.
std::string markdown_table(const ResultTable& table);

/// The sweep file as a table of final and best-validation means.
ResultTable sweep_table(std::string_view sweep_csv_text);

struct ReportOutput {
  std::vector<AggregateRow> rows;
  std::string aggregate_csv;
  std::string svg;
  std::string summary;
  std::vector<std::string> warnings;
  std::size_t curves = 0;
};

/// Collects curve.csv files from each directory (itself or its trial_*
/// subdirectories) and any sweep.csv. Malformed files are skipped with a
/// warning.
ReportOutput build_report(std::span<const std::filesystem::path> dirs);

/// The context text recorded for `step`. `dir` is a trial directory, or an
/// experiment directory combined with `trial`. Throws InvariantError when
/// nothing was recorded.
std::string replay_context(const std::filesystem::path& dir, std::size_t step,
                           std::optional<std::size_t> trial = std::nullopt);

}  // namespace looplab
