#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "looplab/artifact.hpp"
#include "looplab/tasks.hpp"
#include "looplab/templates.hpp"

namespace looplab {

/// One remembered update: what changed and how the result was scored.
struct MemoryEntry {
  std::size_t step = 0;
  std::string change;
  /// Editable slot bodies of the scored artifact.
  std::vector<std::pair<std::string, std::string>> bodies;
  double score = 0.0;
  std::string stage_name;
  std::string feedback;

  bool operator==(const MemoryEntry&) const = default;
};

/// Bounded FIFO of past updates.
class OptimizerMemory {
 public:
  /// Throws ConfigError for capacity 0.
  explicit OptimizerMemory(std::size_t capacity);

  /// Appends, evicting the oldest entry when over capacity.
  void push(MemoryEntry entry);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  /// Oldest first.
  const std::deque<MemoryEntry>& entries() const noexcept { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<MemoryEntry> entries_;
};

struct ContextOptions {
  /// Shown after the current system when set.
  const Artifact* initial_artifact = nullptr;
  TraceRenderOptions trace;
};

/// Everything the optimizer sees for one update, rendered and structured.
struct LearningContext {
  std::size_t step = 0;
  std::string task_background;
  std::string current_artifact;
  std::string initial_artifact;
  std::string traces;
  std::string feedback;
  std::vector<MemoryEntry> memory;
  /// Editable slot names and bodies of the current artifact.
  std::vector<std::pair<std::string, std::string>> current_bodies;
  /// Score of the aggregate (or only) feedback.
  double current_score = 0.0;
  /// The full text sent to an optimizer.
  std::string text;
};

/// Renders background, current slots, optional initial slots, traces,
/// feedback, then memory oldest first. Throws TemplateError when the
/// learning graph carries no feedback.
LearningContext render_context(const LearningGraph& lg, const Artifact& artifact,
                               const OptimizerMemory& memory, std::string_view background,
                               std::size_t step, const ContextOptions& options = {});

/// Instruction describing the reply protocol understood by parse_reply.
std::string_view reply_format_instruction() noexcept;

/// Parses fenced "```slot:<name>" blocks into a delta; "NO CHANGE" alone is an
/// empty delta. Throws OptimizerError (not retriable) when neither is present
/// or a block is malformed.
ArtifactDelta parse_reply(std::string_view reply);

class OptimizerBackend {
 public:
  virtual ~OptimizerBackend() = default;
  virtual ArtifactDelta propose(const LearningContext& ctx) = 0;
  virtual std::string_view name() const noexcept = 0;
};

/// Deterministic hill climbing over a catalog of parameterized bodies.
class ScriptedOptimizer final : public OptimizerBackend {
 public:
  ScriptedOptimizer(Catalog catalog, std::uint64_t seed);
  ~ScriptedOptimizer() override;

  /// Throws OptimizerError when a current body matches no catalog entry.
  ArtifactDelta propose(const LearningContext& ctx) override;
  std::string_view name() const noexcept override { return "scripted"; }

 private:
  struct Index;
  std::unique_ptr<Index> index_;
  std::uint64_t seed_;
};

struct LlmConfig {
  /// "http://host:port"; https is not supported.
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  /// Name of the environment variable holding the bearer credential; empty
  /// sends no credential.
  std::string api_key_env;
  double temperature = 0.0;
  int max_attempts = 3;
  double initial_backoff_seconds = 1.0;
  int timeout_seconds = 120;
};

/// One HTTP round trip as logged for audit.
struct LlmExchange {
  std::string request;
  int status = 0;
  std::string response;
  std::string error;
};

/// Chat-completions client with bounded retries and a reformat retry.
class LlmBackend final : public OptimizerBackend {
 public:
  using Sleeper = std::function<void(double seconds)>;

  /// Throws ConfigError for an unusable configuration.
  explicit LlmBackend(LlmConfig config, Sleeper sleeper = {});

  /// Retriable OptimizerError after exhausting transport attempts;
  /// non-retriable after a failed reformat retry.
  ArtifactDelta propose(const LearningContext& ctx) override;
  std::string_view name() const noexcept override { return "llm"; }

  /// HTTP attempts made by the last propose call.
  int last_attempts() const noexcept { return last_attempts_; }
  /// Exchanges of the last propose call.
  const std::vector<LlmExchange>& last_exchanges() const noexcept { return exchanges_; }

  /// The JSON request body for a context (first attempt).
  std::string request_body(const LearningContext& ctx) const;

 private:
  std::string complete(const std::string& body);

  LlmConfig config_;
  Sleeper sleeper_;
  int last_attempts_ = 0;
  std::vector<LlmExchange> exchanges_;
};

}  // namespace looplab
