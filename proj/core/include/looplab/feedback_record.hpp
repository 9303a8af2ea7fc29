#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace looplab {

enum class Stage { low, medium, high, correct, incorrect, info };

const char* to_string(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view text) noexcept;

/// Score plus natural-language message produced by a feedback oracle.
///
/// Boolean outcomes are carried as score 1 (true) / 0 (false). `stage_name`
/// is the row label of the stage table that produced the message (e.g.
/// "poor", "promising"); it equals `to_string(stage)` for tables whose rows
/// map one-to-one onto stages.
struct FeedbackRecord {
  double score = 0.0;
  std::string message;
  Stage stage = Stage::info;
  std::string stage_name = "info";

  bool operator==(const FeedbackRecord&) const = default;
};

}  // namespace looplab
