#include "looplab/optimizer.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "looplab/util.hpp"

namespace looplab {

namespace {

std::string ensure_newline(std::string text) {
  if (!text.empty() && text.back() != '\n') text.push_back('\n');
  return text;
}

double feedback_score(const LearningGraph& lg) {
  if (lg.aggregate_feedback) return lg.aggregate_feedback->score;
  if (lg.members.size() == 1 && lg.members[0].feedback()) return lg.members[0].feedback()->score;
  throw TemplateError("the learning graph carries no feedback to optimize against");
}

}  // namespace

OptimizerMemory::OptimizerMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("memory capacity must be at least 1");
}

void OptimizerMemory::push(MemoryEntry entry) {
  entries_.push_back(std::move(entry));
  while (entries_.size() > capacity_) entries_.pop_front();
}

LearningContext render_context(const LearningGraph& lg, const Artifact& artifact,
                               const OptimizerMemory& memory, std::string_view background,
                               std::size_t step, const ContextOptions& options) {
  LearningContext ctx;
  ctx.step = step;
  ctx.current_score = feedback_score(lg);
  ctx.task_background = std::string(background);
  ctx.current_artifact = render_slots(artifact);
  if (options.initial_artifact != nullptr) {
    ctx.initial_artifact = render_slots(*options.initial_artifact);
  }
  ctx.traces = render_traces(lg, options.trace);
  ctx.feedback = render_feedback(lg);
  ctx.memory.assign(memory.entries().begin(), memory.entries().end());
  for (const Slot& s : artifact.slots()) {
    if (s.editable) ctx.current_bodies.emplace_back(s.name, s.body);
  }

  std::string& t = ctx.text;
  t += "## Task\n" + ensure_newline(ctx.task_background);
  t += "\n## Current system\n" + ctx.current_artifact;
  if (options.initial_artifact != nullptr) {
    t += "\n## Initial system\n" + ctx.initial_artifact;
  }
  t += "\n## Execution traces\n" + ensure_newline(ctx.traces);
  t += "\n## Feedback\n" + ensure_newline(ctx.feedback);
  t += "\n## Memory\n";
  if (ctx.memory.empty()) t += "No earlier updates.\n";
  for (const MemoryEntry& e : ctx.memory) {
    t += "### Update " + std::to_string(e.step) + ": " + e.change + "\n";
    t += "Result: score " + format_real(e.score) + " [" + e.stage_name + "]\n";
    t += ensure_newline(e.feedback);
  }
  return ctx;
}

std::string_view reply_format_instruction() noexcept {
  return "You revise a program built from named slots. For every slot you want to change, "
         "write one fenced block that starts with a line ```slot:<name> and ends with a line "
         "```, holding the complete new body of that slot. Signatures, documentation and "
         "the wiring between slots cannot change. Text outside the blocks is read as your "
         "rationale. If the program should stay as it is, reply with NO CHANGE.";
}

ArtifactDelta parse_reply(std::string_view reply) {
  ArtifactDelta delta;
  const std::vector<std::string> lines = split_lines(reply);
  std::string rationale;
  std::size_t blocks = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (!line.starts_with("```slot:")) {
      rationale += lines[i] + "\n";
      continue;
    }
    const std::string name(trim(line.substr(8)));
    if (name.empty()) throw OptimizerError("a slot block has no slot name", false);
    std::string body;
    bool closed = false;
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      if (trim(lines[j]) == "```") {
        closed = true;
        break;
      }
      if (j > i + 1) body += "\n";
      body += lines[j];
    }
    if (!closed) throw OptimizerError("the block for slot '" + name + "' is not closed", false);
    if (delta.bodies.count(name)) {
      throw OptimizerError("slot '" + name + "' appears in more than one block", false);
    }
    delta.bodies[name] = body;
    ++blocks;
    i = j;
  }
  delta.rationale = std::string(trim(rationale));
  if (blocks == 0 && delta.rationale.find("NO CHANGE") == std::string::npos) {
    throw OptimizerError("the reply contains neither slot blocks nor NO CHANGE", false);
  }
  return delta;
}

// ---------------------------------------------------------------- scripted

namespace {

/// Form index plus value index per parameter of that form.
using SlotPoint = std::pair<std::size_t, std::vector<std::size_t>>;
using Point = std::vector<SlotPoint>;

}  // namespace

struct ScriptedOptimizer::Index {
  Catalog catalog;
  std::vector<std::unordered_map<std::string, SlotPoint>> by_body;

  std::string render(std::size_t s, const SlotPoint& p) const {
    return render_form(catalog[s].forms[p.first], p.second);
  }

  std::optional<Point> match(const std::vector<std::pair<std::string, std::string>>& bodies,
                             bool strict) const {
    Point point;
    for (std::size_t s = 0; s < catalog.size(); ++s) {
      const auto it = std::find_if(bodies.begin(), bodies.end(),
                                   [&](const auto& b) { return b.first == catalog[s].slot; });
      if (it == bodies.end()) {
        if (strict) throw OptimizerError("slot '" + catalog[s].slot + "' is missing", false);
        return std::nullopt;
      }
      const auto hit = by_body[s].find(it->second);
      if (hit == by_body[s].end()) {
        if (strict) {
          throw OptimizerError("the body of slot '" + catalog[s].slot +
                                   "' matches no catalog entry",
                               false);
        }
        return std::nullopt;
      }
      point.push_back(hit->second);
    }
    return point;
  }

  std::string describe(std::size_t s, const SlotPoint& from, const SlotPoint& to) const {
    const SlotCatalog& sc = catalog[s];
    if (from.first != to.first) return sc.slot + " form=" + sc.forms[to.first].name;
    for (std::size_t k = 0; k < to.second.size(); ++k) {
      if (from.second[k] != to.second[k]) {
        const CatalogParam& p = sc.forms[to.first].params[k];
        return sc.slot + " " + p.name + "=" + p.values[to.second[k]];
      }
    }
    return sc.slot;
  }
};

ScriptedOptimizer::ScriptedOptimizer(Catalog catalog, std::uint64_t seed)
    : index_(std::make_unique<Index>()), seed_(seed) {
  index_->catalog = std::move(catalog);
  for (const SlotCatalog& sc : index_->catalog) {
    std::unordered_map<std::string, SlotPoint> bodies;
    for (std::size_t f = 0; f < sc.forms.size(); ++f) {
      const CatalogForm& form = sc.forms[f];
      std::vector<std::size_t> choice(form.params.size(), 0);
      while (true) {
        bodies.emplace(render_form(form, choice), SlotPoint{f, choice});
        std::size_t k = choice.size();
        bool done = true;
        while (k > 0) {
          --k;
          if (++choice[k] < form.params[k].values.size()) {
            done = false;
            break;
          }
          choice[k] = 0;
        }
        if (done) break;
      }
    }
    index_->by_body.push_back(std::move(bodies));
  }
}

ScriptedOptimizer::~ScriptedOptimizer() = default;

ArtifactDelta ScriptedOptimizer::propose(const LearningContext& ctx) {
  const Index& ix = *index_;
  const Point current = *ix.match(ctx.current_bodies, true);

  // Most recent score per point: the current artifact first, then memory
  // from newest to oldest.
  std::map<Point, double> known;
  std::vector<std::pair<Point, double>> order;
  auto remember = [&](const Point& p, double score) {
    if (known.emplace(p, score).second) order.emplace_back(p, score);
  };
  remember(current, ctx.current_score);
  for (auto it = ctx.memory.rbegin(); it != ctx.memory.rend(); ++it) {
    if (auto p = ix.match(it->bodies, false)) remember(*p, it->score);
  }

  Point base = order.front().first;
  double base_score = order.front().second;
  for (const auto& [p, score] : order) {
    if (score > base_score) {
      base = p;
      base_score = score;
    }
  }

  // Neighbors in (slot, parameter, value) order; parameter 0 is the form.
  struct Neighbor {
    Point point;
    std::size_t slot;
  };
  std::vector<Neighbor> neighbors;
  for (std::size_t s = 0; s < ix.catalog.size(); ++s) {
    const SlotCatalog& sc = ix.catalog[s];
    const SlotPoint& here = base[s];
    for (std::size_t f = 0; f < sc.forms.size(); ++f) {
      if (f == here.first) continue;
      Point p = base;
      std::vector<std::size_t> initial;
      for (const CatalogParam& param : sc.forms[f].params) initial.push_back(param.initial);
      p[s] = SlotPoint{f, initial};
      neighbors.push_back({std::move(p), s});
    }
    const CatalogForm& form = sc.forms[here.first];
    for (std::size_t k = 0; k < form.params.size(); ++k) {
      for (std::size_t v = 0; v < form.params[k].values.size(); ++v) {
        if (v == here.second[k]) continue;
        Point p = base;
        p[s].second[k] = v;
        neighbors.push_back({std::move(p), s});
      }
    }
  }

  std::vector<std::size_t> unexplored;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (!known.count(neighbors[i].point)) unexplored.push_back(i);
  }

  Point target = base;
  std::string why;
  if (!unexplored.empty()) {
    Rng rng(derive_seed(seed_, "scripted", ctx.step));
    shuffle_in_place(unexplored, rng);
    const Neighbor& n = neighbors[unexplored.front()];
    target = n.point;
    why = "explore " + ix.describe(n.slot, base[n.slot], n.point[n.slot]);
  } else {
    const Neighbor* best = nullptr;
    double best_score = 0.0;
    for (const Neighbor& n : neighbors) {
      const double score = known.at(n.point);
      if (best == nullptr || score > best_score) {
        best = &n;
        best_score = score;
      }
    }
    if (best != nullptr && best_score > base_score) {
      target = best->point;
      why = "move to best neighbor " + ix.describe(best->slot, base[best->slot],
                                                   best->point[best->slot]);
    } else {
      why = "keep best known parameters";
    }
  }

  ArtifactDelta delta;
  for (std::size_t s = 0; s < ix.catalog.size(); ++s) {
    if (target[s] != current[s]) delta.bodies[ix.catalog[s].slot] = ix.render(s, target[s]);
  }
  delta.rationale = delta.empty() ? "NO CHANGE: " + why : why;
  return delta;
}

}  // namespace looplab
