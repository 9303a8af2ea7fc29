#include "looplab/artifact.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "looplab/util.hpp"

namespace looplab {

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

// Splits on '\n' keeping a trailing empty piece, so joining with '\n' is an
// exact inverse. The empty text has zero pieces.
std::vector<std::string> pieces(std::string_view text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
}

std::string output_line(const OutputSpec& o) {
  switch (o.kind) {
    case OutputSpec::Kind::any:
      return "any";
    case OutputSpec::Kind::text:
      return "text";
    case OutputSpec::Kind::number:
      return "number";
    case OutputSpec::Kind::action: {
      std::string s = "action";
      for (auto a : o.actions) s += " " + std::to_string(a);
      return s;
    }
  }
  return "any";
}

std::string check_output(const OutputSpec& spec, const Value& v) {
  switch (spec.kind) {
    case OutputSpec::Kind::any:
      return {};
    case OutputSpec::Kind::text:
      if (v.type() != Value::Type::string) {
        return std::string("output must be text, got ") + type_name(v.type());
      }
      return {};
    case OutputSpec::Kind::number:
      if (!v.is_number()) {
        return std::string("output must be a number, got ") + type_name(v.type());
      }
      return {};
    case OutputSpec::Kind::action: {
      const bool legal =
          v.type() == Value::Type::integer &&
          std::find(spec.actions.begin(), spec.actions.end(), v.as_int()) !=
              spec.actions.end();
      if (!legal) {
        std::string allowed;
        for (auto a : spec.actions) allowed += (allowed.empty() ? "" : ", ") + std::to_string(a);
        return "output " + to_display(v) + " is not a legal action {" + allowed + "}";
      }
      return {};
    }
  }
  return {};
}

}  // namespace

std::string render_signature(const Signature& signature) {
  std::string out = "(";
  for (std::size_t i = 0; i < signature.params.size(); ++i) {
    if (i) out += ", ";
    out += signature.params[i];
  }
  out += ") -> " + signature.returns;
  return out;
}

Signature parse_signature(std::string_view text) {
  const auto close = text.find(')');
  if (text.empty() || text[0] != '(' || close == std::string_view::npos) {
    throw ArtifactError("malformed signature '" + std::string(text) + "'");
  }
  Signature s;
  const std::string_view inner = text.substr(1, close - 1);
  if (!trim(inner).empty()) {
    std::size_t start = 0;
    while (true) {
      const auto comma = inner.find(',', start);
      const std::string_view part =
          trim(inner.substr(start, comma == std::string_view::npos ? inner.npos
                                                                   : comma - start));
      if (!is_identifier(part)) {
        throw ArtifactError("malformed signature parameter '" + std::string(part) + "'");
      }
      s.params.emplace_back(part);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  std::string_view rest = trim(text.substr(close + 1));
  if (!rest.starts_with("->")) {
    throw ArtifactError("signature lacks '->': '" + std::string(text) + "'");
  }
  s.returns = std::string(trim(rest.substr(2)));
  return s;
}

Artifact::Artifact(std::string name, std::vector<Slot> slots, Wiring wiring,
                   OutputSpec output, ConstantMap constants)
    : name_(std::move(name)),
      slots_(std::move(slots)),
      wiring_(std::move(wiring)),
      output_(std::move(output)),
      constants_(std::move(constants)) {
  auto bad = [&](const std::string& why) {
    return ArtifactError("artifact '" + name_ + "': " + why);
  };
  if (slots_.empty()) throw bad("no slots");
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!is_identifier(slots_[i].name)) throw bad("invalid slot name '" + slots_[i].name + "'");
    for (std::size_t j = 0; j < i; ++j) {
      if (slots_[j].name == slots_[i].name) throw bad("duplicate slot '" + slots_[i].name + "'");
    }
  }
  if (!is_identifier(wiring_.input)) throw bad("invalid input variable");
  std::vector<std::string> defined{wiring_.input};
  std::vector<std::string> used;
  for (const SlotCall& call : wiring_.calls) {
    const Slot* s = find_slot(call.slot);
    if (s == nullptr) throw bad("wiring calls unknown slot '" + call.slot + "'");
    if (call.args.size() != s->signature.params.size()) {
      throw bad("wiring passes " + std::to_string(call.args.size()) +
                " argument(s) to '" + call.slot + "' which takes " +
                std::to_string(s->signature.params.size()));
    }
    for (const std::string& a : call.args) {
      if (std::find(defined.begin(), defined.end(), a) == defined.end()) {
        throw bad("wiring argument '" + a + "' is not defined before '" + call.slot + "'");
      }
    }
    if (!is_identifier(call.output) ||
        std::find(defined.begin(), defined.end(), call.output) != defined.end()) {
      throw bad("wiring output '" + call.output + "' is invalid or reused");
    }
    defined.push_back(call.output);
    used.push_back(call.slot);
  }
  for (const Slot& s : slots_) {
    if (std::find(used.begin(), used.end(), s.name) == used.end()) {
      throw bad("slot '" + s.name + "' is never called by the wiring");
    }
  }
  if (std::find(defined.begin(), defined.end(), wiring_.result) == defined.end()) {
    throw bad("result variable '" + wiring_.result + "' is never defined");
  }
  if (output_.kind == OutputSpec::Kind::action && output_.actions.empty()) {
    throw bad("action output needs at least one legal action");
  }
  for (const auto& [k, v] : constants_) {
    if (!is_identifier(k)) throw bad("invalid constant name '" + k + "'");
  }
  programs_.reserve(slots_.size());
  for (const Slot& s : slots_) {
    programs_.push_back(std::make_shared<const Program>(
        parse_program(s.body, s.name, s.signature.params)));
  }
}

const Slot* Artifact::find_slot(std::string_view name) const {
  for (const Slot& s : slots_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Slot& Artifact::slot(std::string_view name) const {
  const Slot* s = find_slot(name);
  if (s == nullptr) {
    throw ArtifactError("artifact '" + name_ + "' has no slot '" + std::string(name) + "'");
  }
  return *s;
}

const Program& Artifact::program(std::string_view name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return *programs_[i];
  }
  throw ArtifactError("artifact '" + name_ + "' has no slot '" + std::string(name) + "'");
}

std::vector<std::pair<std::string, std::string>> Artifact::bodies() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Slot& s : slots_) out.emplace_back(s.name, s.body);
  return out;
}

Artifact Artifact::with_body(std::string_view slot_name, std::string body) const {
  Artifact copy = *this;
  for (std::size_t i = 0; i < copy.slots_.size(); ++i) {
    if (copy.slots_[i].name == slot_name) {
      copy.programs_[i] = std::make_shared<const Program>(
          parse_program(body, copy.slots_[i].name, copy.slots_[i].signature.params));
      copy.slots_[i].body = std::move(body);
      return copy;
    }
  }
  throw ArtifactError("artifact '" + name_ + "' has no slot '" + std::string(slot_name) + "'");
}

bool Artifact::operator==(const Artifact& other) const {
  return name_ == other.name_ && slots_ == other.slots_ &&
         wiring_ == other.wiring_ && output_ == other.output_ &&
         constants_ == other.constants_;
}

ExecutionOutcome execute_traced(const Artifact& artifact, const Value& input,
                                const ExecOptions& options) {
  const SlotBodyLookup lookup = [&artifact](std::string_view name) -> const std::string* {
    const Slot* s = artifact.find_slot(name);
    return s ? &s->body : nullptr;
  };
  GraphBuilder builder(to_display(input), lookup);
  struct Bound {
    std::string name;
    Value value;
    NodeId node;
  };
  std::vector<Bound> env{{artifact.wiring().input, input, builder.input()}};
  auto find = [&env](const std::string& name) -> const Bound& {
    for (const Bound& b : env) {
      if (b.name == name) return b;
    }
    return env.front();  // unreachable: wiring is validated
  };

  ExecutionOutcome out;
  EvalContext ctx;
  ctx.fuel_limit = options.fuel_limit;
  ctx.rng = options.rng;
  ctx.constants = &artifact.constants();
  ctx.host = options.host;

  for (const SlotCall& call : artifact.wiring().calls) {
    std::vector<Value> args;
    std::vector<NodeId> parents;
    for (const std::string& a : call.args) {
      const Bound& b = find(a);
      args.push_back(b.value);
      if (std::find(parents.begin(), parents.end(), b.node) == parents.end()) {
        parents.push_back(b.node);
      }
    }
    const std::vector<std::string> params{call.slot};
    try {
      EvalResult r = evaluate(artifact.program(call.slot), args, ctx);
      out.steps += r.steps;
      const NodeId id =
          builder.record_step(call.slot, parents, params, to_display(r.value), call.output);
      env.push_back(Bound{call.output, std::move(r.value), id});
    } catch (const ExecutionError& e) {
      out.steps += e.steps();
      builder.record_step(call.slot, parents, params, std::string("error: ") + e.what(),
                          "error");
      out.error = e;
      out.graph = builder.graph();
      return out;
    }
  }

  const Bound& result = find(artifact.wiring().result);
  const std::string problem = check_output(artifact.output(), result.value);
  if (!problem.empty()) {
    const std::string& last =
        artifact.wiring().calls.empty() ? artifact.wiring().result
                                        : artifact.wiring().calls.back().slot;
    ExecutionError e(ExecutionError::Kind::type, last, 0, 0, problem);
    const std::vector<NodeId> parents{result.node};
    builder.record_step("check_output", parents, {}, std::string("error: ") + e.what(),
                        "error");
    out.error = e;
    out.graph = builder.graph();
    return out;
  }
  out.output = result.value;
  out.graph = builder.finish(result.node);
  return out;
}

ExecutionResult execute(const Artifact& artifact, const Value& input,
                        const ExecOptions& options) {
  ExecutionOutcome o = execute_traced(artifact, input, options);
  if (o.error) throw *o.error;
  return ExecutionResult{std::move(o.output), std::move(o.graph)};
}

Artifact apply_delta(const Artifact& artifact, const ArtifactDelta& delta) {
  for (const auto& [key, body] : delta.bodies) {
    if (key.find('.') != std::string::npos) {
      throw ValidationError("cannot edit '" + key +
                            "': only slot bodies are editable; signatures and "
                            "documentation are fixed");
    }
    const Slot* s = artifact.find_slot(key);
    if (s == nullptr) {
      throw ValidationError("the artifact has no slot named '" + key + "'");
    }
    if (!s->editable) throw ValidationError("slot '" + key + "' is not editable");
  }
  Artifact out = artifact;
  for (const auto& [key, body] : delta.bodies) {
    try {
      out = out.with_body(key, body);
    } catch (const ExecutionError& e) {
      throw ValidationError("the proposed body for slot '" + key +
                            "' does not parse: " + e.what());
    }
  }
  return out;
}

ArtifactDelta diff_artifacts(const Artifact& from, const Artifact& to) {
  ArtifactDelta d;
  for (const Slot& s : to.slots()) {
    const Slot& before = from.slot(s.name);
    if (before.body != s.body) d.bodies[s.name] = s.body;
  }
  return d;
}

std::string render_slots(const Artifact& artifact, bool editable_only) {
  std::string out;
  for (const Slot& s : artifact.slots()) {
    if (editable_only && !s.editable) continue;
    out += "### slot " + s.name + (s.editable ? "" : " (fixed)") + "\n";
    out += "signature: " + render_signature(s.signature) + "\n";
    out += "documentation:\n" + s.documentation;
    if (!s.documentation.empty() && s.documentation.back() != '\n') out += "\n";
    out += "body:\n```\n" + s.body;
    if (!s.body.empty() && s.body.back() != '\n') out += "\n";
    out += "```\n";
  }
  return out;
}

std::string write_artifact(const Artifact& artifact) {
  std::ostringstream out;
  out << kArtifactSchema << "\n";
  out << "name " << artifact.name() << "\n";
  out << "input " << artifact.wiring().input << "\n";
  for (const SlotCall& c : artifact.wiring().calls) {
    out << "call " << c.output << " = " << c.slot << "(";
    for (std::size_t i = 0; i < c.args.size(); ++i) out << (i ? ", " : "") << c.args[i];
    out << ")\n";
  }
  out << "result " << artifact.wiring().result << "\n";
  out << "output " << output_line(artifact.output()) << "\n";
  for (const auto& [k, v] : artifact.constants()) {
    out << "constant " << k << " " << to_json(v) << "\n";
  }
  for (const Slot& s : artifact.slots()) {
    out << "slot " << s.name << "\n";
    out << "editable " << (s.editable ? "true" : "false") << "\n";
    out << "signature " << render_signature(s.signature) << "\n";
    const auto doc = pieces(s.documentation);
    out << "doc " << doc.size() << "\n";
    for (const auto& line : doc) out << line << "\n";
    const auto body = pieces(s.body);
    out << "body " << body.size() << "\n";
    for (const auto& line : body) out << line << "\n";
    out << "end\n";
  }
  return out.str();
}

Artifact read_artifact(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      const auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) {
        lines.emplace_back(text.substr(start));
        break;
      }
      lines.emplace_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  std::size_t i = 0;
  auto fail = [&](const std::string& why) {
    return ArtifactError("artifact file line " + std::to_string(i + 1) + ": " + why);
  };
  auto next = [&]() -> const std::string& {
    if (i >= lines.size()) throw fail("unexpected end of file");
    return lines[i++];
  };
  auto keyed = [&](std::string_view key) -> std::string {
    const std::string& line = next();
    if (!line.starts_with(std::string(key) + " ") && line != key) {
      --i;
      throw fail("expected '" + std::string(key) + "'");
    }
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
  };
  auto block = [&](std::string_view key) {
    const std::string count_text = keyed(key);
    std::size_t n = 0;
    try {
      n = std::stoul(count_text);
    } catch (const std::exception&) {
      throw fail("bad line count '" + count_text + "'");
    }
    std::string out;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) out += "\n";
      out += next();
    }
    return out;
  };

  if (next() != kArtifactSchema) {
    i = 0;
    throw fail("unsupported artifact schema");
  }
  const std::string name = keyed("name");
  Wiring wiring;
  wiring.input = keyed("input");
  while (i < lines.size() && lines[i].starts_with("call ")) {
    const std::string spec = next().substr(5);
    const auto eq = spec.find(" = ");
    const auto open = spec.find('(');
    const auto close = spec.rfind(')');
    if (eq == std::string::npos || open == std::string::npos || close == std::string::npos ||
        open < eq || close < open) {
      --i;
      throw fail("malformed call");
    }
    SlotCall call;
    call.output = spec.substr(0, eq);
    call.slot = std::string(trim(std::string_view(spec).substr(eq + 3, open - eq - 3)));
    const std::string_view args = std::string_view(spec).substr(open + 1, close - open - 1);
    std::size_t start = 0;
    while (!trim(args).empty()) {
      const auto comma = args.find(',', start);
      call.args.emplace_back(
          trim(args.substr(start, comma == std::string_view::npos ? args.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    wiring.calls.push_back(std::move(call));
  }
  wiring.result = keyed("result");
  OutputSpec output;
  {
    std::istringstream words(keyed("output"));
    std::string kind;
    words >> kind;
    if (kind == "any") output.kind = OutputSpec::Kind::any;
    else if (kind == "text") output.kind = OutputSpec::Kind::text;
    else if (kind == "number") output.kind = OutputSpec::Kind::number;
    else if (kind == "action") {
      output.kind = OutputSpec::Kind::action;
      std::int64_t a = 0;
      while (words >> a) output.actions.push_back(a);
    } else {
      throw fail("unknown output kind '" + kind + "'");
    }
  }
  ConstantMap constants;
  while (i < lines.size() && lines[i].starts_with("constant ")) {
    const std::string spec = next().substr(9);
    const auto sp = spec.find(' ');
    if (sp == std::string::npos) throw fail("malformed constant");
    try {
      constants[spec.substr(0, sp)] = value_from_json(spec.substr(sp + 1));
    } catch (const Error& e) {
      throw fail(e.what());
    }
  }
  std::vector<Slot> slots;
  while (i < lines.size() && !(i + 1 == lines.size() && lines[i].empty())) {
    Slot s;
    s.name = keyed("slot");
    const std::string editable = keyed("editable");
    if (editable != "true" && editable != "false") throw fail("editable must be true or false");
    s.editable = editable == "true";
    s.signature = parse_signature(keyed("signature"));
    s.documentation = block("doc");
    s.body = block("body");
    keyed("end");
    slots.push_back(std::move(s));
  }
  return Artifact(name, std::move(slots), std::move(wiring), std::move(output),
                  std::move(constants));
}

}  // namespace looplab
