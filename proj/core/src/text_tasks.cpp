#include "looplab/text_tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>

namespace looplab {

namespace {

constexpr std::string_view kBracketPrompt = "Close every open bracket in this sequence: ";
constexpr std::string_view kBooleanPrompt = "Evaluate the boolean expression: ";
constexpr std::string_view kChoicePrompt = "Which option equals ";

constexpr std::string_view kOpens = "([{<";
constexpr std::string_view kCloses = ")]}>";

std::string closing_of(std::string_view prefix) {
  std::string stack;
  for (char c : prefix) {
    const auto o = kOpens.find(c);
    if (o != std::string_view::npos) {
      stack.push_back(kCloses[o]);
    } else if (kCloses.find(c) != std::string_view::npos) {
      if (stack.empty() || stack.back() != c) return {};
      stack.pop_back();
    } else {
      return {};
    }
  }
  return {stack.rbegin(), stack.rend()};
}

TextTask make_bracket(Rng& rng) {
  const std::size_t length = 3 + uniform_index(rng, 8);
  std::string prefix;
  std::string stack;
  for (std::size_t i = 0; i < length; ++i) {
    if (!stack.empty() && uniform_index(rng, 10) < 3) {
      prefix.push_back(stack.back());
      stack.pop_back();
    } else {
      const std::size_t k = uniform_index(rng, kOpens.size());
      prefix.push_back(kOpens[k]);
      stack.push_back(kCloses[k]);
    }
  }
  if (stack.empty()) {
    prefix.push_back('(');
    stack.push_back(')');
  }
  return {TextTaskKind::bracket_completion, std::string(kBracketPrompt) + prefix,
          std::string(stack.rbegin(), stack.rend())};
}

struct BoolGen {
  Rng& rng;

  std::pair<std::string, bool> expr(int depth) {
    const std::size_t pick = depth <= 0 ? 0 : uniform_index(rng, 4);
    if (pick == 0) {
      const bool v = uniform_index(rng, 2) == 1;
      return {v ? "True" : "False", v};
    }
    if (pick == 1) {
      auto [t, v] = expr(depth - 1);
      return {"not " + t, !v};
    }
    auto [a, va] = expr(depth - 1);
    auto [b, vb] = expr(depth - 1);
    if (pick == 2) return {"( " + a + " and " + b + " )", va && vb};
    return {"( " + a + " or " + b + " )", va || vb};
  }
};

TextTask make_boolean(Rng& rng) {
  BoolGen g{rng};
  auto [text, value] = g.expr(3);
  return {TextTaskKind::boolean_eval, std::string(kBooleanPrompt) + text,
          value ? "True" : "False"};
}

TextTask make_choice(Rng& rng) {
  const int a = 10 + static_cast<int>(uniform_index(rng, 90));
  const int b = 10 + static_cast<int>(uniform_index(rng, 90));
  const bool plus = uniform_index(rng, 2) == 0;
  const int answer = plus ? a + b : a - b;
  std::vector<int> options{answer};
  while (options.size() < 4) {
    const int delta = static_cast<int>(uniform_index(rng, 21)) - 10;
    const int candidate = answer + delta;
    if (std::find(options.begin(), options.end(), candidate) == options.end()) {
      options.push_back(candidate);
    }
  }
  shuffle_in_place(options, rng);
  std::string q = std::string(kChoicePrompt) + std::to_string(a) + (plus ? " + " : " - ") +
                  std::to_string(b) + "?";
  std::string gold;
  for (std::size_t i = 0; i < options.size(); ++i) {
    const std::string letter = std::string("(") + static_cast<char>('A' + i) + ")";
    q += "\n" + letter + " " + std::to_string(options[i]);
    if (options[i] == answer) gold = letter;
  }
  return {TextTaskKind::multiple_choice, q, gold};
}

// Recursive-descent evaluator over the generated boolean grammar.
struct BoolParser {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  bool ok = true;

  const std::string& peek() const {
    static const std::string end;
    return i < tokens.size() ? tokens[i] : end;
  }

  bool or_expr() {
    bool v = and_expr();
    while (peek() == "or") {
      ++i;
      const bool r = and_expr();
      v = v || r;
    }
    return v;
  }
  bool and_expr() {
    bool v = not_expr();
    while (peek() == "and") {
      ++i;
      const bool r = not_expr();
      v = v && r;
    }
    return v;
  }
  bool not_expr() {
    if (peek() == "not") {
      ++i;
      return !not_expr();
    }
    return atom();
  }
  bool atom() {
    const std::string t = peek();
    ++i;
    if (t == "True") return true;
    if (t == "False") return false;
    if (t == "(") {
      const bool v = or_expr();
      if (peek() != ")") ok = false;
      ++i;
      return v;
    }
    ok = false;
    return false;
  }
};

std::optional<std::string> solve_boolean(std::string_view text) {
  BoolParser p;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) p.tokens.push_back(cur);
      cur.clear();
      if (c == '(' || c == ')') p.tokens.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) p.tokens.push_back(cur);
  if (p.tokens.empty()) return std::nullopt;
  const bool v = p.or_expr();
  if (!p.ok || p.i != p.tokens.size()) return std::nullopt;
  return std::string(v ? "True" : "False");
}

std::optional<std::string> solve_choice(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) return std::nullopt;
  int a = 0, b = 0;
  char op = 0;
  const std::string& head = lines[0];
  if (std::sscanf(head.c_str() + kChoicePrompt.size(), "%d %c %d", &a, &op, &b) != 3) {
    return std::nullopt;
  }
  const int answer = op == '+' ? a + b : a - b;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.size() < 5 || line[0] != '(') continue;
    if (std::atoi(line.c_str() + 4) == answer) return line.substr(0, 3);
  }
  return std::nullopt;
}

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool mentions(std::string_view text, std::string_view needle) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.find(needle) != std::string::npos;
}

std::string wrong_answer(std::string_view question, const std::string& gold) {
  if (question.starts_with(kBooleanPrompt)) return gold == "True" ? "False" : "True";
  if (question.starts_with(kChoicePrompt)) {
    const char next = gold[1] == 'D' ? 'A' : static_cast<char>(gold[1] + 1);
    return std::string("(") + next + ")";
  }
  return gold.size() > 1 ? gold.substr(0, gold.size() - 1) : gold + gold;
}

}  // namespace

std::string_view to_string(TextTaskKind kind) noexcept {
  switch (kind) {
    case TextTaskKind::bracket_completion:
      return "bracket_completion";
    case TextTaskKind::boolean_eval:
      return "boolean_eval";
    case TextTaskKind::multiple_choice:
      return "multiple_choice";
  }
  return "bracket_completion";
}

TextTaskKind parse_text_task_kind(std::string_view name) {
  for (auto k : {TextTaskKind::bracket_completion, TextTaskKind::boolean_eval,
                 TextTaskKind::multiple_choice}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown text task kind '" + std::string(name) + "'");
}

TextTask generate_text_task(TextTaskKind kind, std::uint64_t seed) {
  Rng rng(seed);
  switch (kind) {
    case TextTaskKind::bracket_completion:
      return make_bracket(rng);
    case TextTaskKind::boolean_eval:
      return make_boolean(rng);
    case TextTaskKind::multiple_choice:
      return make_choice(rng);
  }
  return make_bracket(rng);
}

std::vector<TextTask> generate_text_suite(TextTaskKind kind, std::size_t count,
                                          std::uint64_t seed) {
  std::vector<TextTask> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_text_task(kind, derive_seed(seed, to_string(kind), i)));
  }
  return out;
}

std::optional<std::string> solve_text_question(std::string_view question) {
  if (question.starts_with(kBracketPrompt)) {
    const std::string_view prefix = trim(question.substr(kBracketPrompt.size()));
    std::string closing = closing_of(prefix);
    if (closing.empty()) return std::nullopt;
    return closing;
  }
  if (question.starts_with(kBooleanPrompt)) {
    return solve_boolean(question.substr(kBooleanPrompt.size()));
  }
  if (question.starts_with(kChoicePrompt)) return solve_choice(question);
  return std::nullopt;
}

std::string_view to_string(SplitProtocol protocol) noexcept {
  return protocol == SplitProtocol::bbeh ? "bbeh" : "pipeline";
}

SplitProtocol parse_split_protocol(std::string_view name) {
  if (name == "bbeh") return SplitProtocol::bbeh;
  if (name == "pipeline") return SplitProtocol::pipeline;
  throw ConfigError("unknown split protocol '" + std::string(name) + "'");
}

DatasetSplit<std::size_t> split_indices(std::size_t count, SplitProtocol protocol,
                                        std::uint64_t seed) {
  DatasetSplit<std::size_t> out;
  if (protocol == SplitProtocol::bbeh) {
    if (count <= kBbehTrain + kBbehValidation) {
      throw SplitError("the bbeh protocol needs more than " +
                       std::to_string(kBbehTrain + kBbehValidation) + " examples, got " +
                       std::to_string(count));
    }
    for (std::size_t i = 0; i < count; ++i) {
      (i < kBbehTrain ? out.train
                      : i < kBbehTrain + kBbehValidation ? out.validation : out.test)
          .push_back(i);
    }
    return out;
  }
  if (count < 2) {
    throw SplitError("the pipeline protocol needs at least 2 examples, got " +
                     std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "pipeline-split"));
  shuffle_in_place(order, rng);
  const std::size_t n_val = std::max<std::size_t>(1, (count + 2) / 5);
  out.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  out.validation.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return out;
}

std::string simulated_base_model(std::string_view prompt) {
  const auto marker = prompt.rfind("Question:");
  if (marker == std::string_view::npos) return "There is no question to answer.";
  const std::string_view question = trim(prompt.substr(marker + 9));
  const std::optional<std::string> gold = solve_text_question(question);
  if (!gold) return "I cannot tell what is being asked.";

  double skill = 0.35;
  if (mentions(prompt, "step by step")) skill += 0.25;
  if (mentions(prompt, "double-check") || mentions(prompt, "verify")) skill += 0.15;
  if (mentions(prompt, "innermost") || mentions(prompt, "precedence") ||
      mentions(prompt, "compute the value")) {
    skill += 0.1;
  }
  const double u = static_cast<double>(mix(fnv1a(prompt)) >> 11) * 0x1.0p-53;
  const std::string answer = u < skill ? *gold : wrong_answer(question, *gold);

  std::string reply;
  if (mentions(prompt, "step by step")) reply = "Working through the question one piece at a time.\n";
  if (mentions(prompt, "answer:")) return reply + "Answer: " + answer;
  return reply + "I believe the result is " + answer + ".";
}

}  // namespace looplab
