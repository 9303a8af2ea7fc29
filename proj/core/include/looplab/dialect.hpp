#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "looplab/util.hpp"

namespace looplab {

class Value;
using List = std::vector<Value>;
/// Insertion-ordered key/value pairs with unique keys.
using Record = std::vector<std::pair<std::string, Value>>;

/// Immutable dynamically typed value of the slot dialect. Lists and records
/// share structure on copy.
class Value {
 public:
  enum class Type { none, boolean, integer, real, string, list, record };

  Value() = default;
  Value(bool b) : data_(b) {}
  Value(int v) : data_(static_cast<std::int64_t>(v)) {}
  Value(std::int64_t v) : data_(v) {}
  Value(double v) : data_(v) {}
  Value(const char* s) : data_(std::string(s)) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(List items) : data_(std::make_shared<const List>(std::move(items))) {}
  Value(Record fields)
      : data_(std::make_shared<const Record>(std::move(fields))) {}

  Type type() const noexcept { return static_cast<Type>(data_.index()); }
  bool is_none() const noexcept { return type() == Type::none; }
  bool is_number() const noexcept {
    return type() == Type::integer || type() == Type::real;
  }

  bool as_bool() const { return std::get<bool>(data_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_real() const { return std::get<double>(data_); }
  /// Integer or real widened to double.
  double as_number() const;
  const std::string& as_string() const { return std::get<std::string>(data_); }
  const List& as_list() const { return *std::get<std::shared_ptr<const List>>(data_); }
  const Record& as_record() const {
    return *std::get<std::shared_ptr<const Record>>(data_);
  }

  /// Field of a record; nullptr when absent or not a record.
  const Value* field(std::string_view key) const;

  bool truthy() const;

  /// Structural equality; integers and reals compare numerically.
  friend bool operator==(const Value& a, const Value& b);

 private:
  std::variant<std::monostate, bool, std::int64_t, double, std::string,
               std::shared_ptr<const List>, std::shared_ptr<const Record>>
      data_;
};

const char* type_name(Value::Type type) noexcept;

/// JSON text of a value (records keep field order). Reals always carry a
/// decimal point or exponent so they read back as reals.
std::string to_json(const Value& value);
/// Parses JSON text; objects become records in document order.
Value value_from_json(std::string_view text);

/// Payload text for traces: strings verbatim, everything else as JSON.
std::string to_display(const Value& value);

namespace dialect {
struct Block;
}

/// Parsed slot body. Cheap to copy; immutable.
class Program {
 public:
  const std::string& slot() const noexcept { return slot_; }
  const std::vector<std::string>& params() const noexcept { return params_; }
  std::size_t variable_count() const noexcept { return variables_.size(); }
  const std::vector<std::string>& variables() const noexcept {
    return variables_;
  }
  const dialect::Block& body() const { return *body_; }

 private:
  friend Program parse_program(std::string_view, std::string_view,
                               std::span<const std::string>);
  std::string slot_;
  std::vector<std::string> params_;
  std::vector<std::string> variables_;
  std::shared_ptr<const dialect::Block> body_;
};

/// Parses a slot body whose parameters are bound to `params`. Throws
/// ExecutionError of kind parse with the offending line and column.
Program parse_program(std::string_view source, std::string_view slot,
                      std::span<const std::string> params);

using HostFunction = std::function<Value(std::span<const Value>)>;

/// Per-call evaluation environment.
struct EvalContext {
  std::uint64_t fuel_limit = 10'000;
  /// Source of randomness for random_* builtins; required only when used.
  Rng* rng = nullptr;
  /// Named read-only values (action constants and task constants).
  const std::map<std::string, Value, std::less<>>* constants = nullptr;
  /// Extra callable names, e.g. a language-model stub.
  const std::map<std::string, HostFunction, std::less<>>* host = nullptr;
};

struct EvalResult {
  Value value;
  std::uint64_t steps = 0;
};

/// Runs `program` with positional `args`. Throws ExecutionError (type,
/// runtime or fuel) naming the slot and the failing position.
EvalResult evaluate(const Program& program, std::span<const Value> args,
                    const EvalContext& context);

/// Names accepted in call position without a host binding.
std::span<const std::string_view> builtin_names();

}  // namespace looplab
