#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "looplab/feedback_record.hpp"

namespace looplab {

/// Run-scoped node ordinal, assigned in creation order.
struct NodeId {
  std::uint32_t value = 0;

  auto operator<=>(const NodeId&) const = default;
};

struct ValueNode {
  NodeId id;
  std::string label;
  std::string payload;
  std::string producer_op;

  bool operator==(const ValueNode&) const = default;
};

/// Snapshot of one artifact slot body as it was when the step ran.
struct ParamNode {
  NodeId id;
  std::string slot_name;
  std::string snapshot;

  bool operator==(const ParamNode&) const = default;
};

using Node = std::variant<ValueNode, ParamNode>;

NodeId id_of(const Node& node);

struct Edge {
  NodeId parent;
  NodeId child;

  auto operator<=>(const Edge&) const = default;
};

/// The trace of one execution. Immutable once built; share freely.
class WorkflowGraph {
 public:
  /// Nodes sorted by id.
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  /// Edges in creation order.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  NodeId output() const noexcept { return output_; }
  const std::string& input_payload() const noexcept { return input_payload_; }
  const std::optional<FeedbackRecord>& feedback() const noexcept {
    return feedback_;
  }

  bool contains(NodeId id) const;
  const Node* find(NodeId id) const;
  /// Throws StructuralError when `id` is unknown.
  const Node& at(NodeId id) const;
  const ValueNode& output_node() const;
  std::vector<NodeId> parents_of(NodeId id) const;

  std::size_t value_node_count() const;
  std::size_t param_node_count() const;

  bool operator==(const WorkflowGraph&) const = default;

 private:
  friend class GraphBuilder;
  friend WorkflowGraph attach_feedback(const WorkflowGraph&, FeedbackRecord);
  friend WorkflowGraph backward_slice(const WorkflowGraph&, NodeId);
  friend WorkflowGraph read_graph(std::istream&);

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  NodeId output_;
  std::optional<FeedbackRecord> feedback_;
  std::string input_payload_;
};

/// Resolves a slot name to its current body; nullptr when the slot is unknown.
using SlotBodyLookup = std::function<const std::string*(std::string_view)>;

/// Records one execution. Confined to the thread running that execution.
class GraphBuilder {
 public:
  /// Starts a graph whose only node is an input ValueNode labeled "input".
  explicit GraphBuilder(std::string input_payload, SlotBodyLookup slots = {});

  NodeId input() const noexcept { return NodeId{0}; }

  /// Adds one ValueNode, one ParamNode per slot (snapshotting its body), and
  /// edges from every parent and every new ParamNode to the new ValueNode.
  /// Throws StructuralError for an unknown parent, ArtifactError for an
  /// unknown slot; on error the builder is left unchanged.
  NodeId record_step(std::string_view op_name, std::span<const NodeId> parents,
                     std::span<const std::string> param_slots, std::string value,
                     std::string label = {});

  /// Graph so far, with the most recent value node as output.
  WorkflowGraph graph() const;
  /// Graph with an explicitly designated output value node.
  WorkflowGraph finish(NodeId output) const;

 private:
  WorkflowGraph graph_;
  SlotBodyLookup slots_;
  NodeId last_value_;
};

/// Convenience spelling of `GraphBuilder(input_payload)`.
GraphBuilder begin_graph(std::string input_payload, SlotBodyLookup slots = {});

/// Returns a copy with `feedback` on the output node. Throws InvariantError if
/// the graph already carries feedback.
WorkflowGraph attach_feedback(const WorkflowGraph& graph, FeedbackRecord feedback);

/// Induced subgraph of all ancestors of `node` (inclusive), with `node` as the
/// output. Feedback is kept only when `node` is the original output.
WorkflowGraph backward_slice(const WorkflowGraph& graph, NodeId node);

/// Ids in a topological order (Kahn elimination, ties by smallest id).
/// Throws StructuralError when a cycle is present.
std::vector<NodeId> topological_order(const WorkflowGraph& graph);

struct TraceRenderOptions {
  /// Payloads longer than this are cut with a marker; 0 keeps full text.
  std::size_t max_payload_chars = 0;
  bool include_feedback = true;
};

/// Deterministic text rendering of one trace, in node-id order.
std::string render_trace(const WorkflowGraph& graph,
                         const TraceRenderOptions& options = {});

inline constexpr std::string_view kTraceSchema = "looplab-trace/1";

/// Line-delimited JSON: a header line, then one record per node, edge and
/// feedback attachment. Field order is fixed.
void write_graph(std::ostream& out, const WorkflowGraph& graph);
std::string write_graph(const WorkflowGraph& graph);
WorkflowGraph read_graph(std::istream& in);
WorkflowGraph read_graph(std::string_view text);

}  // namespace looplab
