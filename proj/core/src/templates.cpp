#include "looplab/templates.hpp"

#include <algorithm>

#include "looplab/error.hpp"
#include "looplab/util.hpp"

namespace looplab {

namespace {

std::string example_header(std::size_t i, std::size_t k) {
  return "Example " + std::to_string(i + 1) + " of " + std::to_string(k) + ":\n";
}

std::string join_outputs(const std::vector<WorkflowGraph>& members) {
  if (members.size() == 1) return members.front().output_node().payload;
  std::string out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    out += example_header(i, members.size());
    out += members[i].output_node().payload;
    out += "\n";
  }
  return out;
}

std::vector<EpisodeLink> chain(const std::vector<std::size_t>& times) {
  std::vector<EpisodeLink> links;
  for (std::size_t i = 1; i < times.size(); ++i) {
    links.push_back(EpisodeLink{times[i - 1], times[i]});
  }
  return links;
}

}  // namespace

const char* to_string(TemplateKind kind) noexcept {
  switch (kind) {
    case TemplateKind::interactive:
      return "interactive";
    case TemplateKind::batch:
      return "batch";
    case TemplateKind::episodic:
      return "episodic";
  }
  return "interactive";
}

std::optional<TemplateKind> parse_template_kind(std::string_view text) noexcept {
  for (TemplateKind k :
       {TemplateKind::interactive, TemplateKind::batch, TemplateKind::episodic}) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

const char* to_string(HorizonPolicy::Mode mode) noexcept {
  return mode == HorizonPolicy::Mode::one_step ? "one_step" : "multi_step";
}

LearningGraph template_interactive(WorkflowGraph g) {
  if (!g.feedback()) {
    throw TemplateError("interactive template: graph carries no feedback");
  }
  LearningGraph lg;
  lg.kind = TemplateKind::interactive;
  lg.members.push_back(std::move(g));
  return lg;
}

FeedbackRecord join_feedback(std::span<const FeedbackRecord> parts) {
  if (parts.empty()) throw TemplateError("cannot join zero feedback records");
  if (parts.size() == 1) return parts.front();
  FeedbackRecord out;
  double total = 0;
  bool same_stage = true;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    total += parts[i].score;
    same_stage = same_stage && parts[i].stage == parts.front().stage &&
                 parts[i].stage_name == parts.front().stage_name;
    out.message += example_header(i, parts.size());
    out.message += parts[i].message;
    out.message += "\n";
  }
  out.score = total / static_cast<double>(parts.size());
  out.stage = same_stage ? parts.front().stage : Stage::info;
  out.stage_name = same_stage ? parts.front().stage_name : "mixed";
  return out;
}

LearningGraph template_batch(std::vector<WorkflowGraph> graphs) {
  if (graphs.empty()) throw TemplateError("batch template: empty batch");
  std::vector<FeedbackRecord> feedback;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (!graphs[i].feedback()) {
      throw TemplateError("batch template: member " + std::to_string(i) +
                          " carries no feedback");
    }
    feedback.push_back(*graphs[i].feedback());
  }
  LearningGraph lg;
  lg.kind = TemplateKind::batch;
  if (graphs.size() > 1) lg.aggregate_output = join_outputs(graphs);
  lg.aggregate_feedback = join_feedback(feedback);
  lg.members = std::move(graphs);
  return lg;
}

LearningGraph batchify(std::span<const LearningGraph> parts) {
  std::vector<WorkflowGraph> members;
  for (const LearningGraph& part : parts) {
    if (part.kind == TemplateKind::episodic) {
      throw TemplateError("batchify: episodic graphs cannot be batched");
    }
    members.insert(members.end(), part.members.begin(), part.members.end());
  }
  return template_batch(std::move(members));
}

LearningGraph template_episodic(std::vector<TimedGraph> steps,
                                FeedbackRecord episode_feedback,
                                bool aggregate_outputs) {
  if (steps.empty()) throw TemplateError("episodic template: empty episode");
  std::stable_sort(steps.begin(), steps.end(),
                   [](const TimedGraph& a, const TimedGraph& b) {
                     return a.time < b.time;
                   });
  LearningGraph lg;
  lg.kind = TemplateKind::episodic;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0 && steps[i].time == steps[i - 1].time) {
      throw TemplateError("episodic template: duplicate time index " +
                          std::to_string(steps[i].time));
    }
    lg.times.push_back(steps[i].time);
    lg.members.push_back(std::move(steps[i].graph));
  }
  lg.links = chain(lg.times);
  if (aggregate_outputs) lg.aggregate_output = join_outputs(lg.members);
  lg.aggregate_feedback = std::move(episode_feedback);
  return lg;
}

LearningGraph truncate_horizon(const LearningGraph& lg,
                               const HorizonPolicy& policy) {
  if (lg.kind != TemplateKind::episodic) {
    throw TemplateError("truncate_horizon: learning graph is not episodic");
  }
  if (policy.mode == HorizonPolicy::Mode::multi_step &&
      policy.rollout_length == 0) {
    throw TemplateError("truncate_horizon: rollout_length must be positive");
  }
  const std::size_t keep =
      std::min(policy.effective_horizon(), lg.members.size());
  const std::size_t first = lg.members.size() - keep;
  LearningGraph out;
  out.kind = TemplateKind::episodic;
  out.members.assign(lg.members.begin() + static_cast<std::ptrdiff_t>(first),
                     lg.members.end());
  out.times.assign(lg.times.begin() + static_cast<std::ptrdiff_t>(first),
                   lg.times.end());
  for (const EpisodeLink& link : lg.links) {
    const bool from_kept =
        std::find(out.times.begin(), out.times.end(), link.from) != out.times.end();
    const bool to_kept =
        std::find(out.times.begin(), out.times.end(), link.to) != out.times.end();
    if (from_kept && to_kept) out.links.push_back(link);
  }
  if (lg.aggregate_output) out.aggregate_output = join_outputs(out.members);
  out.aggregate_feedback = lg.aggregate_feedback;
  return out;
}

std::string render_traces(const LearningGraph& lg,
                          const TraceRenderOptions& options) {
  std::string out;
  switch (lg.kind) {
    case TemplateKind::interactive:
      return render_trace(lg.members.front(), options);
    case TemplateKind::batch:
      if (lg.members.size() == 1) return render_trace(lg.members.front(), options);
      for (std::size_t i = 0; i < lg.members.size(); ++i) {
        out += example_header(i, lg.members.size());
        out += render_trace(lg.members[i], options);
        out += "\n";
      }
      return out;
    case TemplateKind::episodic:
      for (std::size_t i = 0; i < lg.members.size(); ++i) {
        if (i > 0) {
          out += "=> step " + std::to_string(lg.times[i - 1]) + " to step " +
                 std::to_string(lg.times[i]) + "\n";
        }
        out += "Step " + std::to_string(lg.times[i]) + ":\n";
        out += render_trace(lg.members[i], options);
      }
      if (lg.aggregate_output) {
        out += "Episode outputs:\n" + *lg.aggregate_output;
        if (!out.empty() && out.back() != '\n') out += "\n";
      }
      return out;
  }
  return out;
}

std::string render_feedback(const LearningGraph& lg) {
  const FeedbackRecord* fb = nullptr;
  if (lg.aggregate_feedback) {
    fb = &*lg.aggregate_feedback;
  } else if (lg.members.size() == 1 && lg.members.front().feedback()) {
    fb = &*lg.members.front().feedback();
  }
  if (fb == nullptr) return {};
  std::string out = "[" + fb->stage_name + ", score " + format_real(fb->score) +
                    "]\n" + fb->message;
  if (out.back() != '\n') out += "\n";
  return out;
}

}  // namespace looplab
