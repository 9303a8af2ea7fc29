#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "looplab/error.hpp"
#include "looplab/util.hpp"

namespace looplab {

enum class TextTaskKind { bracket_completion, boolean_eval, multiple_choice };

std::string_view to_string(TextTaskKind kind) noexcept;
/// Throws ConfigError for an unknown name.
TextTaskKind parse_text_task_kind(std::string_view name);

struct TextTask {
  TextTaskKind kind = TextTaskKind::bracket_completion;
  std::string question;
  std::string gold;

  bool operator==(const TextTask&) const = default;
};

/// Deterministic task from a seed.
TextTask generate_text_task(TextTaskKind kind, std::uint64_t seed);

/// `count` tasks of one kind; task i uses derive_seed(seed, kind, i).
std::vector<TextTask> generate_text_suite(TextTaskKind kind, std::size_t count,
                                          std::uint64_t seed);

/// Recomputes the gold answer from the question text alone; nullopt when the
/// text is not a recognizable task.
std::optional<std::string> solve_text_question(std::string_view question);

enum class SplitProtocol { bbeh, pipeline };

std::string_view to_string(SplitProtocol protocol) noexcept;
SplitProtocol parse_split_protocol(std::string_view name);

inline constexpr std::size_t kBbehTrain = 15;
inline constexpr std::size_t kBbehValidation = 10;

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

/// Index form of the split. bbeh: first 15 train, next 10 validation, the rest
/// test, in dataset order; needs at least 26 items. pipeline: seeded shuffle,
/// 80% train and 20% validation, no test part; needs at least 2 items.
/// Throws SplitError otherwise.
DatasetSplit<std::size_t> split_indices(std::size_t count, SplitProtocol protocol,
                                        std::uint64_t seed);

template <typename T>
DatasetSplit<T> split_dataset(const std::vector<T>& items, SplitProtocol protocol,
                              std::uint64_t seed = 0) {
  const DatasetSplit<std::size_t> idx = split_indices(items.size(), protocol, seed);
  DatasetSplit<T> out;
  for (std::size_t i : idx.train) out.train.push_back(items[i]);
  for (std::size_t i : idx.validation) out.validation.push_back(items[i]);
  for (std::size_t i : idx.test) out.test.push_back(items[i]);
  return out;
}

/// Stand-in for a language model answering prompts that embed one question
/// after a "Question:" marker. Accuracy depends on instructions present in
/// the prompt; answers are a pure function of the prompt text.
std::string simulated_base_model(std::string_view prompt);

}  // namespace looplab
