#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "looplab/artifact.hpp"
#include "looplab/feedback.hpp"

namespace looplab {

enum class ArtifactInit { one_function, many_function };

std::string_view to_string(ArtifactInit init) noexcept;
ArtifactInit parse_artifact_init(std::string_view name);

/// One tunable literal inside a body template, written `{{name}}`.
struct CatalogParam {
  std::string name;
  /// Literal dialect text for each allowed value.
  std::vector<std::string> values;
  std::size_t initial = 0;

  bool operator==(const CatalogParam&) const = default;
};

struct CatalogForm {
  std::string name;
  std::string body;
  std::vector<CatalogParam> params;

  bool operator==(const CatalogForm&) const = default;
};

/// Every body a slot may take: the forms and their parameter grids.
struct SlotCatalog {
  std::string slot;
  std::vector<CatalogForm> forms;
};

using Catalog = std::vector<SlotCatalog>;

/// Fills the holes of `form` with the chosen value indices. Throws
/// ArtifactError on a missing or unknown hole.
std::string render_form(const CatalogForm& form, std::span<const std::size_t> choice);
/// The form with every parameter at its initial value.
std::string render_initial(const CatalogForm& form);

struct SlotSpec {
  std::string name;
  Signature signature;
  std::string documentation;
  /// The first form at its initial values is the starting body.
  std::vector<CatalogForm> forms;
};

enum class TaskFamily { arcade, text, tabular };

/// Everything needed to build a starting artifact for one task.
struct TaskSpec {
  std::string name;
  TaskFamily family = TaskFamily::arcade;
  std::string background;
  /// Many-function decomposition in wiring order. Every slot but the last
  /// ends with `return <output>`, where <output> names the call result.
  std::vector<SlotSpec> slots;
  Wiring wiring;
  OutputSpec output;
  ConstantMap constants;
  std::string one_function_name;
  std::string one_function_returns;
  /// Task uses the "base_model" host function.
  bool uses_base_model = false;
  /// Feedback table name (arcade and tabular tasks).
  std::string table;
  TaskKind metric_kind = TaskKind::episodes;
};

/// Documentation of all slots, joined with a blank line.
std::string join_documentation(std::span<const Slot> slots);

Artifact init_many_function(const TaskSpec& spec);
/// A single editable slot whose body inlines the per-slot bodies and whose
/// documentation is join_documentation of the many-function slots.
Artifact init_one_function(const TaskSpec& spec);
Artifact init_artifact(const TaskSpec& spec, ArtifactInit init);

/// Inlines per-slot bodies (wiring order) into one body.
std::string compose_one_function(const TaskSpec& spec, std::span<const std::string> bodies);

Catalog many_function_catalog(const TaskSpec& spec);
/// Product of the per-slot forms, composed; parameter names become
/// "<slot>.<param>".
Catalog one_function_catalog(const TaskSpec& spec);
Catalog task_catalog(const TaskSpec& spec, ArtifactInit init);

/// Built-in tasks: pong, breakout, invaders, bbeh, spaceship, housing.
const TaskSpec& builtin_task(std::string_view name);
std::span<const std::string_view> builtin_task_names() noexcept;

using HostMap = std::map<std::string, HostFunction, std::less<>>;
/// Host functions a task's slots may call (empty for most tasks).
HostMap task_host_functions(const TaskSpec& spec);

/// One row of a synthetic tabular dataset.
struct TabularExample {
  Value row;
  double target = 0.0;
};

/// Synthetic data for the spaceship (binary) and housing (regression) tasks.
std::vector<TabularExample> generate_tabular_dataset(std::string_view task, std::size_t count,
                                                     std::uint64_t seed);

}  // namespace looplab
