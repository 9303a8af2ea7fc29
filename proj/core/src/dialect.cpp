#include "looplab/dialect.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <unordered_map>

#include "json.hpp"
#include "looplab/error.hpp"

namespace looplab {

// ---------------------------------------------------------------------------
// Values

double Value::as_number() const {
  if (type() == Type::integer) return static_cast<double>(as_int());
  return as_real();
}

const Value* Value::field(std::string_view key) const {
  if (type() != Type::record) return nullptr;
  for (const auto& [k, v] : as_record()) {
    if (k == key) return &v;
  }
  return nullptr;
}

bool Value::truthy() const {
  switch (type()) {
    case Type::none:
      return false;
    case Type::boolean:
      return as_bool();
    case Type::integer:
      return as_int() != 0;
    case Type::real:
      return as_real() != 0.0;
    case Type::string:
      return !as_string().empty();
    case Type::list:
      return !as_list().empty();
    case Type::record:
      return !as_record().empty();
  }
  return false;
}

bool operator==(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) {
    if (a.type() == Value::Type::integer && b.type() == Value::Type::integer) {
      return a.as_int() == b.as_int();
    }
    return a.as_number() == b.as_number();
  }
  if (a.type() != b.type()) return false;
  switch (a.type()) {
    case Value::Type::none:
      return true;
    case Value::Type::boolean:
      return a.as_bool() == b.as_bool();
    case Value::Type::string:
      return a.as_string() == b.as_string();
    case Value::Type::list:
      return a.as_list() == b.as_list();
    case Value::Type::record:
      return a.as_record() == b.as_record();
    default:
      return false;
  }
}

const char* type_name(Value::Type type) noexcept {
  switch (type) {
    case Value::Type::none:
      return "none";
    case Value::Type::boolean:
      return "bool";
    case Value::Type::integer:
      return "int";
    case Value::Type::real:
      return "real";
    case Value::Type::string:
      return "string";
    case Value::Type::list:
      return "list";
    case Value::Type::record:
      return "record";
  }
  return "none";
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json_tree(const Value& v) {
  switch (v.type()) {
    case Value::Type::none:
      return nullptr;
    case Value::Type::boolean:
      return v.as_bool();
    case Value::Type::integer:
      return v.as_int();
    case Value::Type::real: {
      const double d = v.as_real();
      if (!std::isfinite(d)) return nullptr;
      return d;
    }
    case Value::Type::string:
      return v.as_string();
    case Value::Type::list: {
      ordered_json arr = ordered_json::array();
      for (const Value& item : v.as_list()) arr.push_back(to_json_tree(item));
      return arr;
    }
    case Value::Type::record: {
      ordered_json obj = ordered_json::object();
      for (const auto& [k, item] : v.as_record()) obj[k] = to_json_tree(item);
      return obj;
    }
  }
  return nullptr;
}

Value from_json_tree(const ordered_json& j) {
  if (j.is_null()) return Value();
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number_integer()) {
    if (j.is_number_unsigned() &&
        j.get<std::uint64_t>() >
            static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      return Value(j.get<double>());
    }
    return Value(j.get<std::int64_t>());
  }
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  if (j.is_array()) {
    List items;
    for (const auto& e : j) items.push_back(from_json_tree(e));
    return Value(std::move(items));
  }
  Record fields;
  for (auto it = j.begin(); it != j.end(); ++it) {
    fields.emplace_back(it.key(), from_json_tree(it.value()));
  }
  return Value(std::move(fields));
}

}  // namespace

std::string to_json(const Value& value) { return to_json_tree(value).dump(); }

Value value_from_json(std::string_view text) {
  try {
    return from_json_tree(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid JSON value: ") + e.what());
  }
}

std::string to_display(const Value& value) {
  if (value.type() == Value::Type::string) return value.as_string();
  return to_json(value);
}

// ---------------------------------------------------------------------------
// Syntax tree

namespace dialect {

struct Pos {
  std::size_t line = 1;
  std::size_t column = 1;
};

enum class Builtin {
  abs_, min_, max_, len_, has_, get_, keys_, values_, starts_with_,
  ends_with_, contains_, find_, split_, trim_, lower_, upper_, replace_,
  join_, str_, int_, float_, floor_, ceil_, round_, sign_, clamp_, range_,
  sum_, append_, set_, slice_, lines_, type_, random_choice_, random_int_,
  random_bool_, random_real_, count_
};

constexpr std::string_view kBuiltinNames[] = {
    "abs",        "min",         "max",        "len",      "has",
    "get",        "keys",        "values",     "starts_with", "ends_with",
    "contains",   "find",        "split",      "trim",     "lower",
    "upper",      "replace",     "join",       "str",      "int",
    "float",      "floor",       "ceil",       "round",    "sign",
    "clamp",      "range",       "sum",        "append",   "set",
    "slice",      "lines",       "type",       "random_choice",
    "random_int", "random_bool", "random_real"};
static_assert(std::size(kBuiltinNames) == static_cast<std::size_t>(Builtin::count_));

std::optional<Builtin> find_builtin(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kBuiltinNames); ++i) {
    if (kBuiltinNames[i] == name) return static_cast<Builtin>(i);
  }
  return std::nullopt;
}

enum class ExprKind {
  literal, variable, global, negate, logical_not, binary, logical_and,
  logical_or, call, field, index, list_literal, record_literal
};

enum class BinOp { add, sub, mul, div, floordiv, mod, eq, ne, lt, le, gt, ge };

struct Expr {
  ExprKind kind = ExprKind::literal;
  Pos pos;
  Value literal;
  std::string name;  // variable/global/call/field name
  int slot = -1;     // variable slot
  std::optional<Builtin> builtin;
  BinOp op = BinOp::add;
  std::vector<std::unique_ptr<Expr>> kids;
  std::vector<std::string> keys;  // record literal keys
};

struct Stmt;

struct Block {
  std::vector<std::unique_ptr<Stmt>> stmts;
};

enum class StmtKind { assign, if_, while_, for_, return_, break_, continue_, expr };

struct Stmt {
  StmtKind kind = StmtKind::expr;
  Pos pos;
  std::string target;
  int slot = -1;
  std::unique_ptr<Expr> expr;  // value, condition, iterable or return value
  std::vector<std::pair<std::unique_ptr<Expr>, Block>> branches;  // if/elif
  Block body;                                                     // while/for/else
  bool has_else = false;
};

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { ident, keyword, integer, real, string, punct, newline, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  Pos pos;
  std::int64_t int_value = 0;
  double real_value = 0;
};

constexpr std::string_view kKeywords[] = {"let",   "if",     "elif",  "else",
                                          "while", "for",    "in",    "return",
                                          "break", "continue", "and", "or",
                                          "not",   "true",   "false", "none"};

class Lexer {
 public:
  Lexer(std::string_view src, std::string_view slot) : src_(src), slot_(slot) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments();
      Token t;
      t.pos = Pos{line_, col_};
      if (i_ >= src_.size()) {
        t.kind = Tok::end;
        out.push_back(t);
        return out;
      }
      const char c = src_[i_];
      if (c == '\n' || c == ';') {
        t.kind = Tok::newline;
        t.text = std::string(1, c);
        advance();
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        number(t);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = i_;
        while (i_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) {
          advance();
        }
        t.text = std::string(src_.substr(start, i_ - start));
        t.kind = std::find(std::begin(kKeywords), std::end(kKeywords), t.text) !=
                         std::end(kKeywords)
                     ? Tok::keyword
                     : Tok::ident;
      } else if (c == '"' || c == '\'') {
        string(t, c);
      } else {
        punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  [[noreturn]] void fail(Pos p, const std::string& why) const {
    throw ExecutionError(ExecutionError::Kind::parse, std::string(slot_), p.line,
                         p.column, why);
  }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_space_and_comments() {
    while (i_ < src_.size()) {
      const char c = src_[i_];
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '\\' && i_ + 1 < src_.size() && src_[i_ + 1] == '\n') {
        advance();
        advance();
      } else if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  void number(Token& t) {
    const std::size_t start = i_;
    bool is_real = false;
    while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    if (i_ + 1 < src_.size() && src_[i_] == '.' &&
        std::isdigit(static_cast<unsigned char>(src_[i_ + 1]))) {
      is_real = true;
      advance();
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      std::size_t save_i = i_, save_line = line_, save_col = col_;
      advance();
      if (i_ < src_.size() && (src_[i_] == '+' || src_[i_] == '-')) advance();
      if (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        is_real = true;
        while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
      } else {
        i_ = save_i;
        line_ = save_line;
        col_ = save_col;
      }
    }
    t.text = std::string(src_.substr(start, i_ - start));
    if (is_real) {
      t.kind = Tok::real;
      t.real_value = std::strtod(t.text.c_str(), nullptr);
    } else {
      t.kind = Tok::integer;
      errno = 0;
      const long long v = std::strtoll(t.text.c_str(), nullptr, 10);
      if (errno == ERANGE) fail(t.pos, "integer literal out of range");
      t.int_value = v;
    }
  }

  void string(Token& t, char quote) {
    advance();
    std::string out;
    while (true) {
      if (i_ >= src_.size() || src_[i_] == '\n') fail(t.pos, "unterminated string");
      const char c = src_[i_];
      if (c == quote) {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (i_ >= src_.size()) fail(t.pos, "unterminated string");
        const char e = src_[i_];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '\\': out.push_back('\\'); break;
          case '"': out.push_back('"'); break;
          case '\'': out.push_back('\''); break;
          default: fail(Pos{line_, col_}, std::string("unknown escape \\") + e);
        }
        advance();
        continue;
      }
      out.push_back(c);
      advance();
    }
    t.kind = Tok::string;
    t.text = std::move(out);
  }

  void punct(Token& t) {
    static constexpr std::string_view two[] = {"==", "!=", "<=", ">=", "//"};
    for (std::string_view op : two) {
      if (src_.substr(i_, 2) == op) {
        t.kind = Tok::punct;
        t.text = std::string(op);
        advance();
        advance();
        return;
      }
    }
    static constexpr std::string_view one = "+-*/%<>=(){}[],.:";
    if (one.find(src_[i_]) == std::string_view::npos) {
      fail(t.pos, std::string("unexpected character '") + src_[i_] + "'");
    }
    t.kind = Tok::punct;
    t.text = std::string(1, src_[i_]);
    advance();
  }

  std::string_view src_;
  std::string_view slot_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::string_view slot)
      : toks_(std::move(tokens)), slot_(slot) {}

  Block program() {
    Block b = statements(/*in_block=*/false);
    if (peek().kind != Tok::end) fail(peek().pos, "unexpected '" + peek().text + "'");
    return b;
  }

  std::vector<std::string> assigned;  // names targeted by assignment or for

 private:
  [[noreturn]] void fail(Pos p, const std::string& why) const {
    throw ExecutionError(ExecutionError::Kind::parse, std::string(slot_), p.line,
                         p.column, why);
  }

  const Token& peek() {
    if (nest_ > 0) {
      while (toks_[i_].kind == Tok::newline) ++i_;
    }
    return toks_[i_];
  }
  Token take() {
    const Token& t = peek();
    Token copy = t;
    if (t.kind != Tok::end) ++i_;
    return copy;
  }
  bool is(Tok kind, std::string_view text) {
    const Token& t = peek();
    return t.kind == kind && t.text == text;
  }
  bool accept(Tok kind, std::string_view text) {
    if (!is(kind, text)) return false;
    take();
    return true;
  }
  Token expect(Tok kind, std::string_view text) {
    if (!is(kind, text)) {
      const Token& t = peek();
      fail(t.pos, "expected '" + std::string(text) + "' but found " + describe(t));
    }
    return take();
  }
  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::end:
        return "end of input";
      case Tok::newline:
        return "end of line";
      case Tok::string:
        return "string literal";
      default:
        return "'" + t.text + "'";
    }
  }
  void skip_newlines() {
    while (toks_[i_].kind == Tok::newline) ++i_;
  }

  void note_assigned(const std::string& name) {
    if (std::find(assigned.begin(), assigned.end(), name) == assigned.end()) {
      assigned.push_back(name);
    }
  }

  Block statements(bool in_block) {
    Block b;
    const int saved = nest_;
    nest_ = 0;
    while (true) {
      skip_newlines();
      const Token& t = peek();
      if (t.kind == Tok::end) break;
      if (in_block && t.kind == Tok::punct && t.text == "}") break;
      b.stmts.push_back(statement());
      const Token& after = peek();
      if (after.kind == Tok::newline) continue;
      if (after.kind == Tok::end) break;
      if (in_block && after.kind == Tok::punct && after.text == "}") break;
      fail(after.pos, "expected end of statement but found " + describe(after));
    }
    nest_ = saved;
    return b;
  }

  Block braced_block() {
    expect(Tok::punct, "{");
    Block b = statements(true);
    expect(Tok::punct, "}");
    return b;
  }

  std::unique_ptr<Stmt> statement() {
    auto s = std::make_unique<Stmt>();
    const Token& t = peek();
    s->pos = t.pos;
    if (t.kind == Tok::keyword) {
      if (t.text == "let") {
        take();
        const Token name = take();
        if (name.kind != Tok::ident) fail(name.pos, "expected a variable name after 'let'");
        if (find_builtin(name.text)) fail(name.pos, "'" + name.text + "' is a builtin");
        expect(Tok::punct, "=");
        s->kind = StmtKind::assign;
        s->target = name.text;
        s->expr = expression();
        note_assigned(name.text);
        return s;
      }
      if (t.text == "if") {
        take();
        s->kind = StmtKind::if_;
        auto cond = expression();
        s->branches.emplace_back(std::move(cond), braced_block());
        while (true) {
          const std::size_t save = i_;
          skip_newlines();
          if (accept(Tok::keyword, "elif")) {
            auto c = expression();
            s->branches.emplace_back(std::move(c), braced_block());
            continue;
          }
          if (accept(Tok::keyword, "else")) {
            s->has_else = true;
            s->body = braced_block();
            break;
          }
          i_ = save;
          break;
        }
        return s;
      }
      if (t.text == "while") {
        take();
        s->kind = StmtKind::while_;
        s->expr = expression();
        ++loop_depth_;
        s->body = braced_block();
        --loop_depth_;
        return s;
      }
      if (t.text == "for") {
        take();
        const Token name = take();
        if (name.kind != Tok::ident) fail(name.pos, "expected a loop variable");
        expect(Tok::keyword, "in");
        s->kind = StmtKind::for_;
        s->target = name.text;
        note_assigned(name.text);
        s->expr = expression();
        ++loop_depth_;
        s->body = braced_block();
        --loop_depth_;
        return s;
      }
      if (t.text == "return") {
        take();
        s->kind = StmtKind::return_;
        const Token& n = peek();
        const bool bare = n.kind == Tok::newline || n.kind == Tok::end ||
                          (n.kind == Tok::punct && n.text == "}");
        if (!bare) s->expr = expression();
        return s;
      }
      if (t.text == "break" || t.text == "continue") {
        const Token kw = take();
        if (loop_depth_ == 0) fail(kw.pos, "'" + kw.text + "' outside a loop");
        s->kind = kw.text == "break" ? StmtKind::break_ : StmtKind::continue_;
        return s;
      }
    }
    if (t.kind == Tok::ident && toks_[i_ + 1].kind == Tok::punct &&
        toks_[i_ + 1].text == "=") {
      const Token name = take();
      if (find_builtin(name.text)) fail(name.pos, "'" + name.text + "' is a builtin");
      take();
      s->kind = StmtKind::assign;
      s->target = name.text;
      s->expr = expression();
      note_assigned(name.text);
      return s;
    }
    s->kind = StmtKind::expr;
    s->expr = expression();
    return s;
  }

  std::unique_ptr<Expr> make(ExprKind kind, Pos pos) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->pos = pos;
    return e;
  }

  std::unique_ptr<Expr> expression() { return or_expr(); }

  std::unique_ptr<Expr> or_expr() {
    auto left = and_expr();
    while (is(Tok::keyword, "or")) {
      auto e = make(ExprKind::logical_or, take().pos);
      e->kids.push_back(std::move(left));
      e->kids.push_back(and_expr());
      left = std::move(e);
    }
    return left;
  }

  std::unique_ptr<Expr> and_expr() {
    auto left = not_expr();
    while (is(Tok::keyword, "and")) {
      auto e = make(ExprKind::logical_and, take().pos);
      e->kids.push_back(std::move(left));
      e->kids.push_back(not_expr());
      left = std::move(e);
    }
    return left;
  }

  std::unique_ptr<Expr> not_expr() {
    if (is(Tok::keyword, "not")) {
      auto e = make(ExprKind::logical_not, take().pos);
      e->kids.push_back(not_expr());
      return e;
    }
    return comparison();
  }

  std::unique_ptr<Expr> comparison() {
    auto left = additive();
    static const std::pair<std::string_view, BinOp> ops[] = {
        {"==", BinOp::eq}, {"!=", BinOp::ne}, {"<", BinOp::lt},
        {"<=", BinOp::le}, {">", BinOp::gt},  {">=", BinOp::ge}};
    for (const auto& [text, op] : ops) {
      if (is(Tok::punct, text)) {
        auto e = make(ExprKind::binary, take().pos);
        e->op = op;
        e->kids.push_back(std::move(left));
        e->kids.push_back(additive());
        for (const auto& [t2, op2] : ops) {
          (void)op2;
          if (is(Tok::punct, t2)) fail(peek().pos, "comparisons cannot be chained");
        }
        return e;
      }
    }
    return left;
  }

  std::unique_ptr<Expr> additive() {
    auto left = multiplicative();
    while (is(Tok::punct, "+") || is(Tok::punct, "-")) {
      const Token op = take();
      auto e = make(ExprKind::binary, op.pos);
      e->op = op.text == "+" ? BinOp::add : BinOp::sub;
      e->kids.push_back(std::move(left));
      e->kids.push_back(multiplicative());
      left = std::move(e);
    }
    return left;
  }

  std::unique_ptr<Expr> multiplicative() {
    auto left = unary();
    while (is(Tok::punct, "*") || is(Tok::punct, "/") || is(Tok::punct, "//") ||
           is(Tok::punct, "%")) {
      const Token op = take();
      auto e = make(ExprKind::binary, op.pos);
      e->op = op.text == "*"    ? BinOp::mul
              : op.text == "/"  ? BinOp::div
              : op.text == "//" ? BinOp::floordiv
                                : BinOp::mod;
      e->kids.push_back(std::move(left));
      e->kids.push_back(unary());
      left = std::move(e);
    }
    return left;
  }

  std::unique_ptr<Expr> unary() {
    if (is(Tok::punct, "-")) {
      const Token op = take();
      const Token& n = peek();
      if (n.kind == Tok::integer) {
        auto e = make(ExprKind::literal, op.pos);
        e->literal = Value(-take().int_value);
        return postfix(std::move(e));
      }
      if (n.kind == Tok::real) {
        auto e = make(ExprKind::literal, op.pos);
        e->literal = Value(-take().real_value);
        return postfix(std::move(e));
      }
      auto e = make(ExprKind::negate, op.pos);
      e->kids.push_back(unary());
      return e;
    }
    return postfix(primary());
  }

  std::unique_ptr<Expr> postfix(std::unique_ptr<Expr> base) {
    while (true) {
      if (is(Tok::punct, ".")) {
        const Token dot = take();
        const Token name = take();
        if (name.kind != Tok::ident && name.kind != Tok::keyword) {
          fail(name.pos, "expected a field name after '.'");
        }
        auto e = make(ExprKind::field, dot.pos);
        e->name = name.text;
        e->kids.push_back(std::move(base));
        base = std::move(e);
      } else if (is(Tok::punct, "[")) {
        const Token open = take();
        ++nest_;
        auto e = make(ExprKind::index, open.pos);
        e->kids.push_back(std::move(base));
        e->kids.push_back(expression());
        expect(Tok::punct, "]");
        --nest_;
        base = std::move(e);
      } else {
        return base;
      }
    }
  }

  std::unique_ptr<Expr> primary() {
    const Token t = take();
    switch (t.kind) {
      case Tok::integer: {
        auto e = make(ExprKind::literal, t.pos);
        e->literal = Value(t.int_value);
        return e;
      }
      case Tok::real: {
        auto e = make(ExprKind::literal, t.pos);
        e->literal = Value(t.real_value);
        return e;
      }
      case Tok::string: {
        auto e = make(ExprKind::literal, t.pos);
        e->literal = Value(t.text);
        return e;
      }
      case Tok::keyword: {
        auto e = make(ExprKind::literal, t.pos);
        if (t.text == "true") e->literal = Value(true);
        else if (t.text == "false") e->literal = Value(false);
        else if (t.text == "none") e->literal = Value();
        else fail(t.pos, "unexpected keyword '" + t.text + "'");
        return e;
      }
      case Tok::ident: {
        if (is(Tok::punct, "(")) return call(t);
        auto e = make(ExprKind::variable, t.pos);
        e->name = t.text;
        if (find_builtin(t.text)) fail(t.pos, "builtin '" + t.text + "' must be called");
        return e;
      }
      case Tok::punct:
        if (t.text == "(") {
          ++nest_;
          auto e = expression();
          expect(Tok::punct, ")");
          --nest_;
          return e;
        }
        if (t.text == "[") {
          ++nest_;
          auto e = make(ExprKind::list_literal, t.pos);
          if (!is(Tok::punct, "]")) {
            do {
              if (is(Tok::punct, "]")) break;
              e->kids.push_back(expression());
            } while (accept(Tok::punct, ","));
          }
          expect(Tok::punct, "]");
          --nest_;
          return e;
        }
        if (t.text == "{") {
          ++nest_;
          auto e = make(ExprKind::record_literal, t.pos);
          if (!is(Tok::punct, "}")) {
            do {
              if (is(Tok::punct, "}")) break;
              const Token key = take();
              if (key.kind != Tok::ident && key.kind != Tok::string) {
                fail(key.pos, "expected a record key");
              }
              if (std::find(e->keys.begin(), e->keys.end(), key.text) != e->keys.end()) {
                fail(key.pos, "duplicate record key '" + key.text + "'");
              }
              expect(Tok::punct, ":");
              e->keys.push_back(key.text);
              e->kids.push_back(expression());
            } while (accept(Tok::punct, ","));
          }
          expect(Tok::punct, "}");
          --nest_;
          return e;
        }
        break;
      default:
        break;
    }
    fail(t.pos, "expected an expression but found " + describe(t));
  }

  std::unique_ptr<Expr> call(const Token& name) {
    auto e = make(ExprKind::call, name.pos);
    e->name = name.text;
    e->builtin = find_builtin(name.text);
    expect(Tok::punct, "(");
    ++nest_;
    if (!is(Tok::punct, ")")) {
      do {
        if (is(Tok::punct, ")")) break;
        e->kids.push_back(expression());
      } while (accept(Tok::punct, ","));
    }
    expect(Tok::punct, ")");
    --nest_;
    return e;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  int nest_ = 0;
  int loop_depth_ = 0;
  std::string_view slot_;
};

void resolve(Expr& e, const std::vector<std::string>& vars) {
  if (e.kind == ExprKind::variable) {
    auto it = std::find(vars.begin(), vars.end(), e.name);
    if (it == vars.end()) {
      e.kind = ExprKind::global;
    } else {
      e.slot = static_cast<int>(it - vars.begin());
    }
  }
  for (auto& k : e.kids) resolve(*k, vars);
}

void resolve(Block& b, const std::vector<std::string>& vars);

void resolve(Stmt& s, const std::vector<std::string>& vars) {
  if (!s.target.empty()) {
    s.slot = static_cast<int>(
        std::find(vars.begin(), vars.end(), s.target) - vars.begin());
  }
  if (s.expr) resolve(*s.expr, vars);
  for (auto& [cond, block] : s.branches) {
    resolve(*cond, vars);
    resolve(block, vars);
  }
  resolve(s.body, vars);
}

void resolve(Block& b, const std::vector<std::string>& vars) {
  for (auto& s : b.stmts) resolve(*s, vars);
}

// ---------------------------------------------------------------------------
// Evaluator

enum class Flow { normal, brk, cont, ret };

constexpr std::size_t kMaxCollection = 100'000;

class Machine {
 public:
  Machine(const Program& p, const EvalContext& ctx)
      : p_(p), ctx_(ctx), vars_(p.variable_count()), set_(p.variable_count(), false) {}

  Value run(std::span<const Value> args) {
    if (args.size() != p_.params().size()) {
      fail(ExecutionError::Kind::type, Pos{},
           "expected " + std::to_string(p_.params().size()) + " argument(s), got " +
               std::to_string(args.size()));
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
      vars_[i] = args[i];
      set_[i] = true;
    }
    const Flow f = block(p_.body());
    return f == Flow::ret ? std::move(ret_) : Value();
  }

  std::uint64_t steps() const noexcept { return steps_; }

 private:
  [[noreturn]] void fail(ExecutionError::Kind kind, Pos pos,
                         const std::string& why) const {
    throw ExecutionError(kind, p_.slot(), pos.line, pos.column, why, steps_);
  }
  [[noreturn]] void type_error(Pos pos, const std::string& why) const {
    fail(ExecutionError::Kind::type, pos, why);
  }
  [[noreturn]] void runtime_error(Pos pos, const std::string& why) const {
    fail(ExecutionError::Kind::runtime, pos, why);
  }

  void tick(Pos pos, std::uint64_t cost = 1) {
    if (cost == 0) return;
    if (ctx_.fuel_limit - steps_ < cost || steps_ >= ctx_.fuel_limit) {
      steps_ = ctx_.fuel_limit;
      fail(ExecutionError::Kind::fuel, pos,
           "evaluation exceeded " + std::to_string(ctx_.fuel_limit) + " steps");
    }
    steps_ += cost;
  }

  Flow block(const Block& b) {
    for (const auto& s : b.stmts) {
      const Flow f = stmt(*s);
      if (f != Flow::normal) return f;
    }
    return Flow::normal;
  }

  Flow stmt(const Stmt& s) {
    tick(s.pos);
    switch (s.kind) {
      case StmtKind::assign:
        vars_[static_cast<std::size_t>(s.slot)] = eval(*s.expr);
        set_[static_cast<std::size_t>(s.slot)] = true;
        return Flow::normal;
      case StmtKind::if_:
        for (const auto& [cond, body] : s.branches) {
          if (eval(*cond).truthy()) return block(body);
        }
        if (s.has_else) return block(s.body);
        return Flow::normal;
      case StmtKind::while_:
        while (eval(*s.expr).truthy()) {
          const Flow f = block(s.body);
          if (f == Flow::brk) break;
          if (f == Flow::ret) return f;
        }
        return Flow::normal;
      case StmtKind::for_: {
        const Value seq = eval(*s.expr);
        List items;
        if (seq.type() == Value::Type::list) {
          items = seq.as_list();
        } else if (seq.type() == Value::Type::record) {
          for (const auto& [k, v] : seq.as_record()) items.emplace_back(k);
        } else if (seq.type() == Value::Type::string) {
          for (char c : seq.as_string()) items.emplace_back(std::string(1, c));
        } else {
          type_error(s.expr->pos, std::string("cannot iterate over ") +
                                      type_name(seq.type()));
        }
        for (Value& item : items) {
          vars_[static_cast<std::size_t>(s.slot)] = std::move(item);
          set_[static_cast<std::size_t>(s.slot)] = true;
          const Flow f = block(s.body);
          if (f == Flow::brk) break;
          if (f == Flow::ret) return f;
        }
        return Flow::normal;
      }
      case StmtKind::return_:
        ret_ = s.expr ? eval(*s.expr) : Value();
        return Flow::ret;
      case StmtKind::break_:
        return Flow::brk;
      case StmtKind::continue_:
        return Flow::cont;
      case StmtKind::expr:
        eval(*s.expr);
        return Flow::normal;
    }
    return Flow::normal;
  }

  Value eval(const Expr& e) {
    tick(e.pos);
    switch (e.kind) {
      case ExprKind::literal:
        return e.literal;
      case ExprKind::variable: {
        const auto slot = static_cast<std::size_t>(e.slot);
        if (!set_[slot]) runtime_error(e.pos, "variable '" + e.name + "' used before assignment");
        return vars_[slot];
      }
      case ExprKind::global: {
        if (ctx_.constants) {
          auto it = ctx_.constants->find(e.name);
          if (it != ctx_.constants->end()) return it->second;
        }
        runtime_error(e.pos, "unknown name '" + e.name + "'");
      }
      case ExprKind::negate: {
        const Value v = eval(*e.kids[0]);
        if (v.type() == Value::Type::integer) {
          if (v.as_int() == std::numeric_limits<std::int64_t>::min()) {
            runtime_error(e.pos, "integer overflow");
          }
          return Value(-v.as_int());
        }
        if (v.type() == Value::Type::real) return Value(-v.as_real());
        type_error(e.pos, std::string("cannot negate ") + type_name(v.type()));
      }
      case ExprKind::logical_not:
        return Value(!eval(*e.kids[0]).truthy());
      case ExprKind::logical_and: {
        Value l = eval(*e.kids[0]);
        if (!l.truthy()) return l;
        return eval(*e.kids[1]);
      }
      case ExprKind::logical_or: {
        Value l = eval(*e.kids[0]);
        if (l.truthy()) return l;
        return eval(*e.kids[1]);
      }
      case ExprKind::binary:
        return binary(e, eval(*e.kids[0]), eval(*e.kids[1]));
      case ExprKind::field: {
        const Value base = eval(*e.kids[0]);
        if (base.type() != Value::Type::record) {
          type_error(e.pos, "cannot read field '" + e.name + "' of " +
                                type_name(base.type()));
        }
        const Value* f = base.field(e.name);
        if (f == nullptr) runtime_error(e.pos, "record has no field '" + e.name + "'");
        return *f;
      }
      case ExprKind::index:
        return index(e, eval(*e.kids[0]), eval(*e.kids[1]));
      case ExprKind::list_literal: {
        List items;
        items.reserve(e.kids.size());
        for (const auto& k : e.kids) items.push_back(eval(*k));
        return Value(std::move(items));
      }
      case ExprKind::record_literal: {
        Record fields;
        for (std::size_t i = 0; i < e.kids.size(); ++i) {
          fields.emplace_back(e.keys[i], eval(*e.kids[i]));
        }
        return Value(std::move(fields));
      }
      case ExprKind::call: {
        std::vector<Value> args;
        args.reserve(e.kids.size());
        for (const auto& k : e.kids) args.push_back(eval(*k));
        if (e.builtin) return builtin(e, *e.builtin, args);
        if (ctx_.host) {
          auto it = ctx_.host->find(e.name);
          if (it != ctx_.host->end()) {
            try {
              return it->second(args);
            } catch (const ExecutionError&) {
              throw;
            } catch (const std::exception& ex) {
              runtime_error(e.pos, "'" + e.name + "' failed: " + ex.what());
            }
          }
        }
        runtime_error(e.pos, "unknown function '" + e.name + "'");
      }
    }
    return Value();
  }

  static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  Value binary(const Expr& e, const Value& l, const Value& r) {
    using T = Value::Type;
    switch (e.op) {
      case BinOp::eq:
        return Value(l == r);
      case BinOp::ne:
        return Value(!(l == r));
      case BinOp::lt:
      case BinOp::le:
      case BinOp::gt:
      case BinOp::ge: {
        int cmp = 0;
        if (l.is_number() && r.is_number()) {
          if (l.type() == T::integer && r.type() == T::integer) {
            cmp = l.as_int() < r.as_int() ? -1 : (l.as_int() > r.as_int() ? 1 : 0);
          } else {
            const double a = l.as_number(), b = r.as_number();
            if (std::isnan(a) || std::isnan(b)) return Value(false);
            cmp = a < b ? -1 : (a > b ? 1 : 0);
          }
        } else if (l.type() == T::string && r.type() == T::string) {
          const int c = l.as_string().compare(r.as_string());
          cmp = c < 0 ? -1 : (c > 0 ? 1 : 0);
        } else {
          type_error(e.pos, std::string("cannot order ") + type_name(l.type()) +
                                " and " + type_name(r.type()));
        }
        switch (e.op) {
          case BinOp::lt: return Value(cmp < 0);
          case BinOp::le: return Value(cmp <= 0);
          case BinOp::gt: return Value(cmp > 0);
          default: return Value(cmp >= 0);
        }
      }
      default:
        break;
    }
    if (e.op == BinOp::add) {
      if (l.type() == T::string && r.type() == T::string) {
        tick(e.pos, (l.as_string().size() + r.as_string().size()) / 64);
        return Value(l.as_string() + r.as_string());
      }
      if (l.type() == T::list && r.type() == T::list) {
        List out = l.as_list();
        out.insert(out.end(), r.as_list().begin(), r.as_list().end());
        if (out.size() > kMaxCollection) runtime_error(e.pos, "list too long");
        return Value(std::move(out));
      }
    }
    if (!l.is_number() || !r.is_number()) {
      type_error(e.pos, std::string("unsupported operand types ") +
                            type_name(l.type()) + " and " + type_name(r.type()));
    }
    if (l.type() == T::integer && r.type() == T::integer) {
      const std::int64_t a = l.as_int(), b = r.as_int();
      std::int64_t out = 0;
      switch (e.op) {
        case BinOp::add:
          if (__builtin_add_overflow(a, b, &out)) runtime_error(e.pos, "integer overflow");
          return Value(out);
        case BinOp::sub:
          if (__builtin_sub_overflow(a, b, &out)) runtime_error(e.pos, "integer overflow");
          return Value(out);
        case BinOp::mul:
          if (__builtin_mul_overflow(a, b, &out)) runtime_error(e.pos, "integer overflow");
          return Value(out);
        case BinOp::div:
          if (b == 0) runtime_error(e.pos, "division by zero");
          return Value(static_cast<double>(a) / static_cast<double>(b));
        case BinOp::floordiv:
          if (b == 0) runtime_error(e.pos, "division by zero");
          if (a == std::numeric_limits<std::int64_t>::min() && b == -1) {
            runtime_error(e.pos, "integer overflow");
          }
          return Value(floor_div(a, b));
        case BinOp::mod:
          if (b == 0) runtime_error(e.pos, "modulo by zero");
          if (b == -1) return Value(std::int64_t{0});
          return Value(a - floor_div(a, b) * b);
        default:
          break;
      }
    }
    const double a = l.as_number(), b = r.as_number();
    switch (e.op) {
      case BinOp::add: return Value(a + b);
      case BinOp::sub: return Value(a - b);
      case BinOp::mul: return Value(a * b);
      case BinOp::div:
        if (b == 0) runtime_error(e.pos, "division by zero");
        return Value(a / b);
      case BinOp::floordiv:
        if (b == 0) runtime_error(e.pos, "division by zero");
        return Value(std::floor(a / b));
      case BinOp::mod: {
        if (b == 0) runtime_error(e.pos, "modulo by zero");
        const double m = std::fmod(a, b);
        return Value((m != 0 && ((m < 0) != (b < 0))) ? m + b : m);
      }
      default:
        break;
    }
    return Value();
  }

  std::int64_t checked_index(const Expr& e, const Value& idx, std::size_t size) {
    if (idx.type() != Value::Type::integer) {
      type_error(e.pos, std::string("index must be int, not ") + type_name(idx.type()));
    }
    std::int64_t i = idx.as_int();
    const auto n = static_cast<std::int64_t>(size);
    if (i < 0) i += n;
    if (i < 0 || i >= n) {
      runtime_error(e.pos, "index " + std::to_string(idx.as_int()) +
                               " out of range for length " + std::to_string(n));
    }
    return i;
  }

  Value index(const Expr& e, const Value& base, const Value& idx) {
    switch (base.type()) {
      case Value::Type::list:
        return base.as_list()[static_cast<std::size_t>(
            checked_index(e, idx, base.as_list().size()))];
      case Value::Type::string:
        return Value(std::string(
            1, base.as_string()[static_cast<std::size_t>(
                   checked_index(e, idx, base.as_string().size()))]));
      case Value::Type::record: {
        if (idx.type() != Value::Type::string) {
          type_error(e.pos, "record key must be a string");
        }
        const Value* f = base.field(idx.as_string());
        if (f == nullptr) {
          runtime_error(e.pos, "record has no field '" + idx.as_string() + "'");
        }
        return *f;
      }
      default:
        type_error(e.pos, std::string("cannot index ") + type_name(base.type()));
    }
  }

  void arity(const Expr& e, std::span<const Value> args, std::size_t lo,
             std::size_t hi) const {
    if (args.size() < lo || args.size() > hi) {
      std::string expect = lo == hi ? std::to_string(lo)
                                    : std::to_string(lo) + ".." + std::to_string(hi);
      type_error(e.pos, e.name + "() takes " + expect + " argument(s), got " +
                            std::to_string(args.size()));
    }
  }

  const std::string& str_arg(const Expr& e, const Value& v) const {
    if (v.type() != Value::Type::string) {
      type_error(e.pos, e.name + "() expects a string, got " + type_name(v.type()));
    }
    return v.as_string();
  }
  const List& list_arg(const Expr& e, const Value& v) const {
    if (v.type() != Value::Type::list) {
      type_error(e.pos, e.name + "() expects a list, got " + type_name(v.type()));
    }
    return v.as_list();
  }
  const Record& record_arg(const Expr& e, const Value& v) const {
    if (v.type() != Value::Type::record) {
      type_error(e.pos, e.name + "() expects a record, got " + type_name(v.type()));
    }
    return v.as_record();
  }
  double num_arg(const Expr& e, const Value& v) const {
    if (!v.is_number()) {
      type_error(e.pos, e.name + "() expects a number, got " + type_name(v.type()));
    }
    return v.as_number();
  }
  std::int64_t int_arg(const Expr& e, const Value& v) const {
    if (v.type() != Value::Type::integer) {
      type_error(e.pos, e.name + "() expects an int, got " + type_name(v.type()));
    }
    return v.as_int();
  }
  Rng& rng(const Expr& e) const {
    if (ctx_.rng == nullptr) runtime_error(e.pos, e.name + "() has no random source");
    return *ctx_.rng;
  }

  static Value to_int_value(double d) {
    return Value(static_cast<std::int64_t>(d));
  }

  Value extreme(const Expr& e, std::span<const Value> args, bool want_max) {
    std::span<const Value> items = args;
    if (args.size() == 1) items = list_arg(e, args[0]);
    if (items.empty()) runtime_error(e.pos, e.name + "() of an empty sequence");
    const Value* best = &items[0];
    for (const Value& v : items) {
      num_arg(e, v);
      if (want_max ? v.as_number() > best->as_number()
                   : v.as_number() < best->as_number()) {
        best = &v;
      }
    }
    return *best;
  }

  Value builtin(const Expr& e, Builtin b, std::span<const Value> a) {
    using T = Value::Type;
    switch (b) {
      case Builtin::abs_:
        arity(e, a, 1, 1);
        if (a[0].type() == T::integer) {
          if (a[0].as_int() == std::numeric_limits<std::int64_t>::min()) {
            runtime_error(e.pos, "integer overflow");
          }
          return Value(a[0].as_int() < 0 ? -a[0].as_int() : a[0].as_int());
        }
        return Value(std::abs(num_arg(e, a[0])));
      case Builtin::min_:
        arity(e, a, 1, 64);
        return extreme(e, a, false);
      case Builtin::max_:
        arity(e, a, 1, 64);
        return extreme(e, a, true);
      case Builtin::len_:
        arity(e, a, 1, 1);
        switch (a[0].type()) {
          case T::string: return Value(static_cast<std::int64_t>(a[0].as_string().size()));
          case T::list: return Value(static_cast<std::int64_t>(a[0].as_list().size()));
          case T::record: return Value(static_cast<std::int64_t>(a[0].as_record().size()));
          default: type_error(e.pos, std::string("len() of ") + type_name(a[0].type()));
        }
      case Builtin::has_:
        arity(e, a, 2, 2);
        record_arg(e, a[0]);
        return Value(a[0].field(str_arg(e, a[1])) != nullptr);
      case Builtin::get_: {
        arity(e, a, 2, 3);
        if (a[0].is_none()) return a.size() == 3 ? a[2] : Value();
        record_arg(e, a[0]);
        const Value* f = a[0].field(str_arg(e, a[1]));
        if (f) return *f;
        return a.size() == 3 ? a[2] : Value();
      }
      case Builtin::keys_: {
        arity(e, a, 1, 1);
        List out;
        for (const auto& [k, v] : record_arg(e, a[0])) out.emplace_back(k);
        return Value(std::move(out));
      }
      case Builtin::values_: {
        arity(e, a, 1, 1);
        List out;
        for (const auto& [k, v] : record_arg(e, a[0])) out.push_back(v);
        return Value(std::move(out));
      }
      case Builtin::starts_with_:
        arity(e, a, 2, 2);
        return Value(str_arg(e, a[0]).starts_with(str_arg(e, a[1])));
      case Builtin::ends_with_:
        arity(e, a, 2, 2);
        return Value(str_arg(e, a[0]).ends_with(str_arg(e, a[1])));
      case Builtin::contains_:
        arity(e, a, 2, 2);
        if (a[0].type() == T::string) {
          return Value(a[0].as_string().find(str_arg(e, a[1])) != std::string::npos);
        }
        if (a[0].type() == T::list) {
          const List& l = a[0].as_list();
          return Value(std::find(l.begin(), l.end(), a[1]) != l.end());
        }
        if (a[0].type() == T::record) return Value(a[0].field(str_arg(e, a[1])) != nullptr);
        type_error(e.pos, std::string("contains() on ") + type_name(a[0].type()));
      case Builtin::find_: {
        arity(e, a, 2, 2);
        const auto pos = str_arg(e, a[0]).find(str_arg(e, a[1]));
        return Value(pos == std::string::npos ? std::int64_t{-1}
                                              : static_cast<std::int64_t>(pos));
      }
      case Builtin::split_: {
        arity(e, a, 1, 2);
        const std::string& s = str_arg(e, a[0]);
        List out;
        if (a.size() == 1) {
          std::size_t i = 0;
          while (i < s.size()) {
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            std::size_t j = i;
            while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j > i) out.emplace_back(s.substr(i, j - i));
            i = j;
          }
        } else {
          const std::string& sep = str_arg(e, a[1]);
          if (sep.empty()) runtime_error(e.pos, "split() separator is empty");
          std::size_t start = 0;
          while (true) {
            const auto pos = s.find(sep, start);
            if (pos == std::string::npos) {
              out.emplace_back(s.substr(start));
              break;
            }
            out.emplace_back(s.substr(start, pos - start));
            start = pos + sep.size();
          }
        }
        tick(e.pos, out.size());
        return Value(std::move(out));
      }
      case Builtin::trim_:
        arity(e, a, 1, 1);
        return Value(std::string(trim(str_arg(e, a[0]))));
      case Builtin::lower_:
      case Builtin::upper_: {
        arity(e, a, 1, 1);
        std::string s = str_arg(e, a[0]);
        for (char& c : s) {
          c = static_cast<char>(b == Builtin::lower_
                                    ? std::tolower(static_cast<unsigned char>(c))
                                    : std::toupper(static_cast<unsigned char>(c)));
        }
        return Value(std::move(s));
      }
      case Builtin::replace_: {
        arity(e, a, 3, 3);
        std::string s = str_arg(e, a[0]);
        const std::string& from = str_arg(e, a[1]);
        const std::string& to = str_arg(e, a[2]);
        if (from.empty()) runtime_error(e.pos, "replace() pattern is empty");
        std::string out;
        std::size_t start = 0;
        while (true) {
          const auto pos = s.find(from, start);
          if (pos == std::string::npos) break;
          out.append(s, start, pos - start);
          out += to;
          start = pos + from.size();
        }
        out.append(s, start, std::string::npos);
        return Value(std::move(out));
      }
      case Builtin::join_: {
        arity(e, a, 1, 2);
        const List& items = list_arg(e, a[0]);
        const std::string sep = a.size() == 2 ? str_arg(e, a[1]) : std::string();
        std::string out;
        for (std::size_t i = 0; i < items.size(); ++i) {
          if (i) out += sep;
          out += to_display(items[i]);
        }
        tick(e.pos, items.size());
        return Value(std::move(out));
      }
      case Builtin::str_:
        arity(e, a, 1, 1);
        if (a[0].type() == T::real) return Value(format_real(a[0].as_real()));
        return Value(to_display(a[0]));
      case Builtin::int_: {
        arity(e, a, 1, 1);
        if (a[0].type() == T::integer) return a[0];
        if (a[0].type() == T::boolean) return Value(std::int64_t{a[0].as_bool() ? 1 : 0});
        if (a[0].type() == T::real) {
          const double d = a[0].as_real();
          if (!std::isfinite(d) || std::abs(d) > 9.2e18) runtime_error(e.pos, "int() out of range");
          return to_int_value(std::trunc(d));
        }
        const std::string s(trim(str_arg(e, a[0])));
        std::int64_t v = 0;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
          runtime_error(e.pos, "int() cannot parse '" + s + "'");
        }
        return Value(v);
      }
      case Builtin::float_: {
        arity(e, a, 1, 1);
        if (a[0].is_number()) return Value(a[0].as_number());
        const std::string s(trim(str_arg(e, a[0])));
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) {
          runtime_error(e.pos, "float() cannot parse '" + s + "'");
        }
        return Value(d);
      }
      case Builtin::floor_:
      case Builtin::ceil_:
      case Builtin::round_: {
        arity(e, a, 1, b == Builtin::round_ ? 2 : 1);
        if (a[0].type() == T::integer && a.size() == 1) return a[0];
        const double d = num_arg(e, a[0]);
        if (b == Builtin::round_ && a.size() == 2) {
          const double scale = std::pow(10.0, static_cast<double>(int_arg(e, a[1])));
          return Value(std::round(d * scale) / scale);
        }
        const double r = b == Builtin::floor_  ? std::floor(d)
                         : b == Builtin::ceil_ ? std::ceil(d)
                                               : std::round(d);
        if (!std::isfinite(r) || std::abs(r) > 9.2e18) runtime_error(e.pos, "value out of range");
        return to_int_value(r);
      }
      case Builtin::sign_: {
        arity(e, a, 1, 1);
        const double d = num_arg(e, a[0]);
        return Value(std::int64_t{d > 0 ? 1 : (d < 0 ? -1 : 0)});
      }
      case Builtin::clamp_: {
        arity(e, a, 3, 3);
        num_arg(e, a[0]);
        num_arg(e, a[1]);
        num_arg(e, a[2]);
        if (a[2].as_number() < a[1].as_number()) runtime_error(e.pos, "clamp() bounds reversed");
        if (a[0].as_number() < a[1].as_number()) return a[1];
        if (a[0].as_number() > a[2].as_number()) return a[2];
        return a[0];
      }
      case Builtin::range_: {
        arity(e, a, 1, 3);
        std::int64_t start = 0, stop = 0, step = 1;
        if (a.size() == 1) {
          stop = int_arg(e, a[0]);
        } else {
          start = int_arg(e, a[0]);
          stop = int_arg(e, a[1]);
          if (a.size() == 3) step = int_arg(e, a[2]);
        }
        if (step == 0) runtime_error(e.pos, "range() step is zero");
        List out;
        for (std::int64_t i = start; step > 0 ? i < stop : i > stop; i += step) {
          if (out.size() >= kMaxCollection) runtime_error(e.pos, "range() too long");
          out.emplace_back(i);
        }
        tick(e.pos, out.size());
        return Value(std::move(out));
      }
      case Builtin::sum_: {
        arity(e, a, 1, 1);
        bool all_int = true;
        std::int64_t isum = 0;
        double dsum = 0;
        for (const Value& v : list_arg(e, a[0])) {
          num_arg(e, v);
          if (v.type() == T::integer && all_int) {
            if (__builtin_add_overflow(isum, v.as_int(), &isum)) {
              runtime_error(e.pos, "integer overflow");
            }
          } else {
            all_int = false;
          }
          dsum += v.as_number();
        }
        return all_int ? Value(isum) : Value(dsum);
      }
      case Builtin::append_: {
        arity(e, a, 2, 2);
        List out = list_arg(e, a[0]);
        if (out.size() >= kMaxCollection) runtime_error(e.pos, "list too long");
        out.push_back(a[1]);
        return Value(std::move(out));
      }
      case Builtin::set_: {
        arity(e, a, 3, 3);
        Record out = record_arg(e, a[0]);
        const std::string& key = str_arg(e, a[1]);
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& kv) { return kv.first == key; });
        if (it != out.end()) {
          it->second = a[2];
        } else {
          out.emplace_back(key, a[2]);
        }
        return Value(std::move(out));
      }
      case Builtin::slice_: {
        arity(e, a, 2, 3);
        auto bounds = [&](std::size_t n) {
          auto norm = [&](std::int64_t i) {
            const auto sn = static_cast<std::int64_t>(n);
            if (i < 0) i += sn;
            return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, sn));
          };
          const std::size_t lo = norm(int_arg(e, a[1]));
          const std::size_t hi =
              a.size() == 3 ? norm(int_arg(e, a[2])) : n;
          return std::pair{lo, std::max(lo, hi)};
        };
        if (a[0].type() == T::string) {
          const auto [lo, hi] = bounds(a[0].as_string().size());
          return Value(a[0].as_string().substr(lo, hi - lo));
        }
        const List& l = list_arg(e, a[0]);
        const auto [lo, hi] = bounds(l.size());
        return Value(List(l.begin() + static_cast<std::ptrdiff_t>(lo),
                          l.begin() + static_cast<std::ptrdiff_t>(hi)));
      }
      case Builtin::lines_: {
        arity(e, a, 1, 1);
        List out;
        for (auto& line : split_lines(str_arg(e, a[0]))) out.emplace_back(std::move(line));
        tick(e.pos, out.size());
        return Value(std::move(out));
      }
      case Builtin::type_:
        arity(e, a, 1, 1);
        return Value(type_name(a[0].type()));
      case Builtin::random_choice_: {
        arity(e, a, 1, 1);
        const List& l = list_arg(e, a[0]);
        if (l.empty()) runtime_error(e.pos, "random_choice() of an empty list");
        return l[uniform_index(rng(e), l.size())];
      }
      case Builtin::random_int_: {
        arity(e, a, 2, 2);
        const std::int64_t lo = int_arg(e, a[0]);
        const std::int64_t hi = int_arg(e, a[1]);
        if (hi < lo) runtime_error(e.pos, "random_int() bounds reversed");
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return Value(lo + static_cast<std::int64_t>(uniform_index(rng(e), span)));
      }
      case Builtin::random_bool_:
        arity(e, a, 0, 0);
        return Value(uniform_index(rng(e), 2) == 1);
      case Builtin::random_real_:
        arity(e, a, 0, 0);
        return Value(uniform_unit(rng(e)));
      case Builtin::count_:
        break;
    }
    runtime_error(e.pos, "unknown builtin");
  }

  const Program& p_;
  const EvalContext& ctx_;
  std::vector<Value> vars_;
  std::vector<bool> set_;
  Value ret_;
  std::uint64_t steps_ = 0;
};

}  // namespace dialect

Program parse_program(std::string_view source, std::string_view slot,
                      std::span<const std::string> params) {
  dialect::Lexer lexer(source, slot);
  dialect::Parser parser(lexer.run(), slot);
  auto body = std::make_shared<dialect::Block>(parser.program());
  Program p;
  p.slot_ = std::string(slot);
  p.params_.assign(params.begin(), params.end());
  p.variables_ = p.params_;
  for (const std::string& name : parser.assigned) {
    if (std::find(p.variables_.begin(), p.variables_.end(), name) ==
        p.variables_.end()) {
      p.variables_.push_back(name);
    }
  }
  dialect::resolve(*body, p.variables_);
  p.body_ = std::move(body);
  return p;
}

EvalResult evaluate(const Program& program, std::span<const Value> args,
                    const EvalContext& context) {
  if (context.fuel_limit == 0) {
    throw ExecutionError(ExecutionError::Kind::fuel, program.slot(), 0, 0,
                         "fuel limit must be positive");
  }
  dialect::Machine m(program, context);
  Value v = m.run(args);
  return EvalResult{std::move(v), m.steps()};
}

std::span<const std::string_view> builtin_names() {
  return dialect::kBuiltinNames;
}

}  // namespace looplab
