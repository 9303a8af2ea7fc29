#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "looplab/feedback_record.hpp"
#include "looplab/trace.hpp"

namespace looplab {

enum class TemplateKind { interactive, batch, episodic };

const char* to_string(TemplateKind kind) noexcept;
std::optional<TemplateKind> parse_template_kind(std::string_view text) noexcept;

/// Transition marker between two consecutive episode members, by time index.
struct EpisodeLink {
  std::size_t from = 0;
  std::size_t to = 0;

  bool operator==(const EpisodeLink&) const = default;
};

/// Optimizer-facing composition of workflow graphs.
struct LearningGraph {
  TemplateKind kind = TemplateKind::interactive;
  std::vector<WorkflowGraph> members;
  /// Episodic only: time index of each member, strictly increasing.
  std::vector<std::size_t> times;
  /// Episodic only: one link per consecutive member pair.
  std::vector<EpisodeLink> links;
  std::optional<std::string> aggregate_output;
  std::optional<FeedbackRecord> aggregate_feedback;

  bool operator==(const LearningGraph&) const = default;
};

struct HorizonPolicy {
  enum class Mode { one_step, multi_step };

  Mode mode = Mode::one_step;
  std::size_t rollout_length = 1;

  std::size_t effective_horizon() const noexcept {
    return mode == Mode::one_step ? 1 : rollout_length;
  }
};

const char* to_string(HorizonPolicy::Mode mode) noexcept;

/// Throws TemplateError when `g` carries no feedback.
LearningGraph template_interactive(WorkflowGraph g);

/// Aggregates independent experiences. Members may themselves be interactive
/// or batch learning graphs via `batchify`; nested batches are flattened so
/// composition is associative. A one-member batch carries no aggregate
/// output, matching the interactive template.
LearningGraph template_batch(std::vector<WorkflowGraph> graphs);

/// ⊕ over learning graphs: concatenates their members in order.
LearningGraph batchify(std::span<const LearningGraph> parts);

struct TimedGraph {
  std::size_t time = 0;
  WorkflowGraph graph;
};

/// Chains episode steps. Input is sorted by time; duplicate times are
/// rejected. With `aggregate_outputs` the member outputs are also joined into
/// an aggregate output node.
LearningGraph template_episodic(std::vector<TimedGraph> steps,
                                FeedbackRecord episode_feedback,
                                bool aggregate_outputs = false);

/// Keeps the most recent window of an episodic learning graph.
LearningGraph truncate_horizon(const LearningGraph& lg,
                               const HorizonPolicy& policy);

/// ⊕ of feedback records: singleton is the identity, otherwise the messages
/// are joined under "Example i of k:" headers and the score is the mean.
FeedbackRecord join_feedback(std::span<const FeedbackRecord> parts);

/// Text of the traces section: each member's trace in order, with per-member
/// headers for batches of two or more and step headers for episodes.
std::string render_traces(const LearningGraph& lg,
                          const TraceRenderOptions& options = {});

/// Text of the feedback section. Empty when the graph carries none.
std::string render_feedback(const LearningGraph& lg);

}  // namespace looplab
