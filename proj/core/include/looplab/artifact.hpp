#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "looplab/dialect.hpp"
#include "looplab/error.hpp"
#include "looplab/trace.hpp"

namespace looplab {

struct Signature {
  std::vector<std::string> params;
  /// Semantic return type, free text (e.g. "int in {0, 2, 3}").
  std::string returns;

  bool operator==(const Signature&) const = default;
};

/// "(obs, ball_y) -> int"
std::string render_signature(const Signature& signature);
/// Inverse of render_signature. Throws ArtifactError on malformed text.
Signature parse_signature(std::string_view text);

struct Slot {
  std::string name;
  Signature signature;
  std::string documentation;
  std::string body;
  bool editable = true;

  bool operator==(const Slot&) const = default;
};

/// `output = slot(args...)`; arguments name the workflow input or earlier
/// call outputs.
struct SlotCall {
  std::string output;
  std::string slot;
  std::vector<std::string> args;

  bool operator==(const SlotCall&) const = default;
};

/// Fixed workflow structure: calls run in order, the result variable is the
/// artifact output.
struct Wiring {
  std::string input = "obs";
  std::vector<SlotCall> calls;
  std::string result;

  bool operator==(const Wiring&) const = default;
};

struct OutputSpec {
  enum class Kind { any, action, text, number };

  Kind kind = Kind::any;
  /// Legal integer actions when kind is action.
  std::vector<std::int64_t> actions;

  bool operator==(const OutputSpec&) const = default;
};

using ConstantMap = std::map<std::string, Value, std::less<>>;

/// The trainable system: ordered slots plus immutable wiring. Construction
/// validates the structure and parses every body; an Artifact value is
/// always executable.
class Artifact {
 public:
  Artifact(std::string name, std::vector<Slot> slots, Wiring wiring,
           OutputSpec output, ConstantMap constants = {});

  const std::string& name() const noexcept { return name_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  const Wiring& wiring() const noexcept { return wiring_; }
  const OutputSpec& output() const noexcept { return output_; }
  const ConstantMap& constants() const noexcept { return constants_; }

  const Slot* find_slot(std::string_view name) const;
  /// Throws ArtifactError for an unknown slot.
  const Slot& slot(std::string_view name) const;
  const Program& program(std::string_view name) const;

  /// Slot name to body, in declaration order.
  std::vector<std::pair<std::string, std::string>> bodies() const;

  /// Same artifact with one body replaced. Throws ExecutionError (parse) when
  /// the body does not parse and ArtifactError for an unknown slot.
  Artifact with_body(std::string_view slot, std::string body) const;

  bool operator==(const Artifact& other) const;

 private:
  std::string name_;
  std::vector<Slot> slots_;
  Wiring wiring_;
  OutputSpec output_;
  ConstantMap constants_;
  std::vector<std::shared_ptr<const Program>> programs_;
};

struct ExecOptions {
  std::uint64_t fuel_limit = 10'000;
  Rng* rng = nullptr;
  const std::map<std::string, HostFunction, std::less<>>* host = nullptr;
};

struct ExecutionOutcome {
  Value output;
  WorkflowGraph graph;
  /// Set when a slot failed or the final output is not legal. The graph then
  /// ends with a value node labeled "error" holding the diagnostic.
  std::optional<ExecutionError> error;
  /// Evaluation steps summed over all slot calls.
  std::uint64_t steps = 0;

  bool ok() const noexcept { return !error.has_value(); }
};

/// Runs the wiring on `input`, recording one value node per slot call with a
/// snapshot of that slot's body. Never throws for slot failures.
ExecutionOutcome execute_traced(const Artifact& artifact, const Value& input,
                                const ExecOptions& options = {});

struct ExecutionResult {
  Value output;
  WorkflowGraph graph;
};

/// As execute_traced, but throws the ExecutionError on failure.
ExecutionResult execute(const Artifact& artifact, const Value& input,
                        const ExecOptions& options = {});

/// Proposed replacement bodies keyed by slot name.
struct ArtifactDelta {
  std::map<std::string, std::string> bodies;
  std::string rationale;

  bool empty() const noexcept { return bodies.empty(); }
  bool operator==(const ArtifactDelta&) const = default;
};

/// Throws ValidationError (unknown slot, non-editable slot, attempt to edit a
/// signature or documentation, body that does not parse) without touching the
/// artifact.
Artifact apply_delta(const Artifact& artifact, const ArtifactDelta& delta);

/// Bodies of `to` that differ from `from`; both must share slot names.
ArtifactDelta diff_artifacts(const Artifact& from, const Artifact& to);

/// Context rendering of the slots, in declaration order.
std::string render_slots(const Artifact& artifact, bool editable_only = false);

inline constexpr std::string_view kArtifactSchema = "looplab-artifact/1";

/// Plain-text bundle with line-count-prefixed documentation and body blocks.
std::string write_artifact(const Artifact& artifact);
Artifact read_artifact(std::string_view text);

}  // namespace looplab
