#include "looplab/trace.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>

#include "json.hpp"
#include "looplab/error.hpp"
#include "looplab/util.hpp"

namespace looplab {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string id_text(NodeId id) { return "#" + std::to_string(id.value); }

bool node_less(const Node& a, const Node& b) { return id_of(a) < id_of(b); }

}  // namespace

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::low:
      return "low";
    case Stage::medium:
      return "medium";
    case Stage::high:
      return "high";
    case Stage::correct:
      return "correct";
    case Stage::incorrect:
      return "incorrect";
    case Stage::info:
      return "info";
  }
  return "info";
}

std::optional<Stage> parse_stage(std::string_view text) noexcept {
  for (Stage s : {Stage::low, Stage::medium, Stage::high, Stage::correct,
                  Stage::incorrect, Stage::info}) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

NodeId id_of(const Node& node) {
  return std::visit([](const auto& n) { return n.id; }, node);
}

bool WorkflowGraph::contains(NodeId id) const { return find(id) != nullptr; }

const Node* WorkflowGraph::find(NodeId id) const {
  auto it = std::lower_bound(
      nodes_.begin(), nodes_.end(), id,
      [](const Node& n, NodeId key) { return id_of(n) < key; });
  if (it == nodes_.end() || id_of(*it) != id) return nullptr;
  return &*it;
}

const Node& WorkflowGraph::at(NodeId id) const {
  const Node* node = find(id);
  if (node == nullptr) {
    throw StructuralError("unknown node " + id_text(id));
  }
  return *node;
}

const ValueNode& WorkflowGraph::output_node() const {
  return std::get<ValueNode>(at(output_));
}

std::vector<NodeId> WorkflowGraph::parents_of(NodeId id) const {
  std::vector<NodeId> out;
  for (const Edge& e : edges_) {
    if (e.child == id) out.push_back(e.parent);
  }
  return out;
}

std::size_t WorkflowGraph::value_node_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) {
        return std::holds_alternative<ValueNode>(n);
      }));
}

std::size_t WorkflowGraph::param_node_count() const {
  return nodes_.size() - value_node_count();
}

GraphBuilder::GraphBuilder(std::string input_payload, SlotBodyLookup slots)
    : slots_(std::move(slots)) {
  graph_.input_payload_ = input_payload;
  graph_.nodes_.push_back(
      ValueNode{NodeId{0}, "input", std::move(input_payload), ""});
  graph_.output_ = NodeId{0};
  last_value_ = NodeId{0};
}

NodeId GraphBuilder::record_step(std::string_view op_name,
                                 std::span<const NodeId> parents,
                                 std::span<const std::string> param_slots,
                                 std::string value, std::string label) {
  for (NodeId p : parents) {
    if (!graph_.contains(p)) {
      throw StructuralError("record_step '" + std::string(op_name) +
                            "': unknown parent " + id_text(p));
    }
  }
  std::vector<std::string> snapshots;
  snapshots.reserve(param_slots.size());
  for (const std::string& slot : param_slots) {
    const std::string* body = slots_ ? slots_(slot) : nullptr;
    if (body == nullptr) {
      throw ArtifactError("record_step '" + std::string(op_name) +
                          "': unknown slot '" + slot + "'");
    }
    snapshots.push_back(*body);
  }

  auto next_id = [this] {
    return NodeId{static_cast<std::uint32_t>(graph_.nodes_.size())};
  };
  std::vector<NodeId> param_ids;
  for (std::size_t i = 0; i < param_slots.size(); ++i) {
    const NodeId pid = next_id();
    graph_.nodes_.push_back(
        ParamNode{pid, param_slots[i], std::move(snapshots[i])});
    param_ids.push_back(pid);
  }
  const NodeId vid = next_id();
  graph_.nodes_.push_back(ValueNode{
      vid, label.empty() ? std::string(op_name) : std::move(label),
      std::move(value), std::string(op_name)});
  for (NodeId p : parents) graph_.edges_.push_back(Edge{p, vid});
  for (NodeId p : param_ids) graph_.edges_.push_back(Edge{p, vid});
  graph_.output_ = vid;
  last_value_ = vid;
  return vid;
}

WorkflowGraph GraphBuilder::graph() const { return graph_; }

WorkflowGraph GraphBuilder::finish(NodeId output) const {
  const Node& node = graph_.at(output);
  if (!std::holds_alternative<ValueNode>(node)) {
    throw StructuralError("output " + id_text(output) +
                          " must be a value node");
  }
  WorkflowGraph g = graph_;
  g.output_ = output;
  return g;
}

GraphBuilder begin_graph(std::string input_payload, SlotBodyLookup slots) {
  return GraphBuilder(std::move(input_payload), std::move(slots));
}

WorkflowGraph attach_feedback(const WorkflowGraph& graph,
                              FeedbackRecord feedback) {
  if (graph.feedback_.has_value()) {
    throw InvariantError("graph already carries feedback on its output node");
  }
  if (!graph.contains(graph.output_)) {
    throw InvariantError("graph has no designated output node");
  }
  WorkflowGraph g = graph;
  g.feedback_ = std::move(feedback);
  return g;
}

WorkflowGraph backward_slice(const WorkflowGraph& graph, NodeId node) {
  graph.at(node);  // throws for unknown ids
  std::map<NodeId, std::vector<NodeId>> parents;
  for (const Edge& e : graph.edges_) parents[e.child].push_back(e.parent);

  std::vector<NodeId> keep{node};
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    auto it = parents.find(cur);
    if (it == parents.end()) continue;
    for (NodeId p : it->second) {
      if (std::find(keep.begin(), keep.end(), p) == keep.end()) {
        keep.push_back(p);
        stack.push_back(p);
      }
    }
  }
  std::sort(keep.begin(), keep.end());

  WorkflowGraph out;
  out.input_payload_ = graph.input_payload_;
  for (const Node& n : graph.nodes_) {
    if (std::binary_search(keep.begin(), keep.end(), id_of(n))) {
      out.nodes_.push_back(n);
    }
  }
  for (const Edge& e : graph.edges_) {
    if (std::binary_search(keep.begin(), keep.end(), e.child) &&
        std::binary_search(keep.begin(), keep.end(), e.parent)) {
      out.edges_.push_back(e);
    }
  }
  out.output_ = node;
  if (node == graph.output_) out.feedback_ = graph.feedback_;
  return out;
}

std::vector<NodeId> topological_order(const WorkflowGraph& graph) {
  std::map<NodeId, std::size_t> indegree;
  std::map<NodeId, std::vector<NodeId>> children;
  for (const Node& n : graph.nodes()) indegree[id_of(n)] = 0;
  for (const Edge& e : graph.edges()) {
    if (!indegree.count(e.parent) || !indegree.count(e.child)) {
      throw StructuralError("edge references a missing node");
    }
    ++indegree[e.child];
    children[e.parent].push_back(e.child);
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  std::vector<NodeId> order;
  while (!ready.empty()) {
    const NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId c : children[id]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != indegree.size()) {
    throw StructuralError("graph contains a cycle");
  }
  return order;
}

std::string render_trace(const WorkflowGraph& graph,
                         const TraceRenderOptions& options) {
  auto clip = [&](const std::string& text) {
    if (options.max_payload_chars == 0 ||
        text.size() <= options.max_payload_chars) {
      return text;
    }
    return text.substr(0, options.max_payload_chars) + "...[" +
           std::to_string(text.size() - options.max_payload_chars) +
           " more chars]";
  };

  std::ostringstream out;
  for (const Node& node : graph.nodes()) {
    const auto* value = std::get_if<ValueNode>(&node);
    if (value == nullptr) continue;
    if (value->producer_op.empty()) {
      out << value->label << " " << id_text(value->id) << " = "
          << clip(value->payload) << "\n";
      continue;
    }
    std::vector<std::string> inputs;
    std::vector<std::string> params;
    for (NodeId p : graph.parents_of(value->id)) {
      const Node& parent = graph.at(p);
      if (const auto* pn = std::get_if<ParamNode>(&parent)) {
        params.push_back(pn->slot_name);
      } else {
        inputs.push_back(id_text(p));
      }
    }
    out << value->label << " " << id_text(value->id) << " = "
        << value->producer_op << "(";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      out << (i ? ", " : "") << inputs[i];
    }
    out << ")";
    if (!params.empty()) {
      out << " [params: ";
      for (std::size_t i = 0; i < params.size(); ++i) {
        out << (i ? ", " : "") << params[i];
      }
      out << "]";
    }
    out << " -> " << clip(value->payload) << "\n";
  }
  out << "output: " << id_text(graph.output()) << "\n";
  if (options.include_feedback && graph.feedback()) {
    const FeedbackRecord& fb = *graph.feedback();
    out << "feedback [" << fb.stage_name << ", score " << format_real(fb.score)
        << "]: " << fb.message << "\n";
  }
  return out.str();
}

void write_graph(std::ostream& out, const WorkflowGraph& graph) {
  ordered_json header;
  header["schema"] = kTraceSchema;
  header["input_payload"] = graph.input_payload();
  header["output"] = graph.output().value;
  header["nodes"] = graph.nodes().size();
  header["edges"] = graph.edges().size();
  out << header.dump() << "\n";
  for (const Node& node : graph.nodes()) {
    ordered_json rec;
    if (const auto* v = std::get_if<ValueNode>(&node)) {
      rec["record"] = "value";
      rec["id"] = v->id.value;
      rec["label"] = v->label;
      rec["payload"] = v->payload;
      rec["producer_op"] = v->producer_op;
    } else {
      const auto& p = std::get<ParamNode>(node);
      rec["record"] = "param";
      rec["id"] = p.id.value;
      rec["slot"] = p.slot_name;
      rec["snapshot"] = p.snapshot;
    }
    out << rec.dump() << "\n";
  }
  for (const Edge& e : graph.edges()) {
    ordered_json rec;
    rec["record"] = "edge";
    rec["from"] = e.parent.value;
    rec["to"] = e.child.value;
    out << rec.dump() << "\n";
  }
  if (graph.feedback()) {
    const FeedbackRecord& fb = *graph.feedback();
    ordered_json rec;
    rec["record"] = "feedback";
    rec["node"] = graph.output().value;
    rec["score"] = fb.score;
    rec["stage"] = to_string(fb.stage);
    rec["stage_name"] = fb.stage_name;
    rec["message"] = fb.message;
    out << rec.dump() << "\n";
  }
}

std::string write_graph(const WorkflowGraph& graph) {
  std::ostringstream out;
  write_graph(out, graph);
  return out.str();
}

WorkflowGraph read_graph(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> StructuralError {
    return StructuralError("trace line " + std::to_string(line_no) + ": " +
                           why);
  };
  auto parse_line = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
  };

  if (!std::getline(in, line)) throw StructuralError("empty trace file");
  ++line_no;
  WorkflowGraph g;
  std::size_t declared_nodes = 0;
  std::size_t declared_edges = 0;
  try {
    const auto header = parse_line(line);
    if (header.value("schema", "") != kTraceSchema) {
      throw fail("unsupported schema");
    }
    g.input_payload_ = header.at("input_payload").get<std::string>();
    g.output_ = NodeId{header.at("output").get<std::uint32_t>()};
    declared_nodes = header.at("nodes").get<std::size_t>();
    declared_edges = header.at("edges").get<std::size_t>();

    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto rec = parse_line(line);
      const std::string kind = rec.at("record").get<std::string>();
      if (kind == "value") {
        g.nodes_.push_back(ValueNode{NodeId{rec.at("id").get<std::uint32_t>()},
                                     rec.at("label").get<std::string>(),
                                     rec.at("payload").get<std::string>(),
                                     rec.at("producer_op").get<std::string>()});
      } else if (kind == "param") {
        g.nodes_.push_back(ParamNode{NodeId{rec.at("id").get<std::uint32_t>()},
                                     rec.at("slot").get<std::string>(),
                                     rec.at("snapshot").get<std::string>()});
      } else if (kind == "edge") {
        g.edges_.push_back(Edge{NodeId{rec.at("from").get<std::uint32_t>()},
                                NodeId{rec.at("to").get<std::uint32_t>()}});
      } else if (kind == "feedback") {
        if (g.feedback_) throw fail("more than one feedback record");
        if (NodeId{rec.at("node").get<std::uint32_t>()} != g.output_) {
          throw fail("feedback must attach to the output node");
        }
        const auto stage = parse_stage(rec.at("stage").get<std::string>());
        if (!stage) throw fail("unknown stage");
        g.feedback_ = FeedbackRecord{rec.at("score").get<double>(),
                                     rec.at("message").get<std::string>(),
                                     *stage,
                                     rec.at("stage_name").get<std::string>()};
      } else {
        throw fail("unknown record kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }

  std::sort(g.nodes_.begin(), g.nodes_.end(), node_less);
  for (std::size_t i = 1; i < g.nodes_.size(); ++i) {
    if (id_of(g.nodes_[i]) == id_of(g.nodes_[i - 1])) {
      throw StructuralError("duplicate node id in trace");
    }
  }
  if (g.nodes_.size() != declared_nodes || g.edges_.size() != declared_edges) {
    throw StructuralError("trace record counts do not match header");
  }
  if (!g.contains(g.output_) ||
      !std::holds_alternative<ValueNode>(g.at(g.output_))) {
    throw StructuralError("trace output is not a value node");
  }
  topological_order(g);  // rejects dangling edges and cycles
  return g;
}

WorkflowGraph read_graph(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_graph(in);
}

}  // namespace looplab
