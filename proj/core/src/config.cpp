#include "looplab/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "looplab/environments.hpp"
#include "looplab/feedback.hpp"
#include "looplab/util.hpp"
#include "tomlplusplus/toml.hpp"

namespace looplab {

std::uint64_t ExperimentConfig::trial_seed(std::size_t index) const {
  if (index < seeds.size()) return seeds[index];
  return derive_seed(seed, "trial", index);
}

namespace {

constexpr std::string_view kTabularMetrics[] = {"f1",  "accuracy", "precision", "recall",
                                                "r2",  "rmse",     "mae"};

constexpr std::string_view kOverrideSource = "override";

std::string where(const toml::node& node, std::string_view source) {
  const auto& src = node.source();
  if (src.begin.line == 0 || (src.path && *src.path == kOverrideSource)) return "override";
  return std::string(source) + ":" + std::to_string(src.begin.line) + ":" +
         std::to_string(src.begin.column);
}

/// Reads one TOML table, remembering which keys were consumed.
class Reader {
 public:
  Reader(const toml::table& table, std::string prefix, std::string_view source)
      : table_(table), prefix_(std::move(prefix)), source_(source) {}

  void text(std::string_view key, std::string& out) {
    if (const toml::node* n = take(key)) {
      const auto v = n->value<std::string>();
      if (!n->is_string() || !v) fail(*n, key, "expected a string");
      out = *v;
    }
  }

  void integer(std::string_view key, std::int64_t& out) {
    if (const toml::node* n = take(key)) {
      if (!n->is_integer()) fail(*n, key, "expected an integer");
      out = *n->value<std::int64_t>();
    }
  }

  template <typename T>
  void count(std::string_view key, T& out) {
    std::int64_t v = static_cast<std::int64_t>(out);
    if (const toml::node* n = peek(key)) {
      integer(key, v);
      if (v < 0) fail(*n, key, "must not be negative");
      out = static_cast<T>(v);
    }
  }

  void seed(std::string_view key, std::uint64_t& out) {
    if (const toml::node* n = peek(key)) {
      std::int64_t v = 0;
      integer(key, v);
      if (v < 0) fail(*n, key, "must not be negative");
      out = static_cast<std::uint64_t>(v);
    }
  }

  void real(std::string_view key, double& out) {
    if (const toml::node* n = take(key)) {
      if (!n->is_number()) fail(*n, key, "expected a number");
      out = *n->value<double>();
    }
  }

  void optional_real(std::string_view key, std::optional<double>& out) {
    if (peek(key)) {
      double v = 0.0;
      real(key, v);
      out = v;
    }
  }

  void boolean(std::string_view key, bool& out) {
    if (const toml::node* n = take(key)) {
      if (!n->is_boolean()) fail(*n, key, "expected true or false");
      out = *n->value<bool>();
    }
  }

  void seeds(std::string_view key, std::vector<std::uint64_t>& out) {
    if (const toml::node* n = take(key)) {
      const toml::array* arr = n->as_array();
      if (arr == nullptr) fail(*n, key, "expected an array of integers");
      out.clear();
      for (const toml::node& item : *arr) {
        if (!item.is_integer() || *item.value<std::int64_t>() < 0) {
          fail(item, key, "expected non-negative integers");
        }
        out.push_back(static_cast<std::uint64_t>(*item.value<std::int64_t>()));
      }
    }
  }

  /// Parses an enumerated string with `parse`, reporting failures here.
  template <typename T, typename Parse>
  void choice(std::string_view key, T& out, Parse parse) {
    if (const toml::node* n = peek(key)) {
      std::string s;
      text(key, s);
      try {
        out = parse(s);
      } catch (const ConfigError& e) {
        fail(*n, key, e.what());
      }
    }
  }

  bool has(std::string_view key) const { return peek(key) != nullptr; }

  std::optional<Reader> sub(std::string_view key) {
    if (const toml::node* n = take(key)) {
      const toml::table* t = n->as_table();
      if (t == nullptr) fail(*n, key, "expected a table");
      return Reader(*t, prefix_ + std::string(key) + ".", source_);
    }
    return std::nullopt;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [k, node] : table_) {
      if (!seen_.count(std::string(k.str()))) {
        const auto& src = k.source();
        const std::string at = src.begin.line == 0 || (src.path && *src.path == kOverrideSource)
                                   ? where(node, source_)
                                   : std::string(source_) + ":" + std::to_string(src.begin.line) +
                                         ":" + std::to_string(src.begin.column);
        throw ConfigError(at + ": unknown key '" + prefix_ + std::string(k.str()) + "'");
      }
    }
  }

 private:
  const toml::node* peek(std::string_view key) const { return table_.get(key); }

  const toml::node* take(std::string_view key) {
    seen_.insert(std::string(key));
    return table_.get(key);
  }

  [[noreturn]] void fail(const toml::node& n, std::string_view key, std::string_view msg) const {
    throw ConfigError(where(n, source_) + ": " + prefix_ + std::string(key) + ": " +
                      std::string(msg));
  }

  const toml::table& table_;
  std::string prefix_;
  std::string_view source_;
  std::set<std::string> seen_;
};

void apply_override(toml::table& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key(trim(std::string_view(assignment).substr(0, eq)));
  const std::string value(trim(std::string_view(assignment).substr(eq + 1)));
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw ConfigError("override '" + assignment + "' has an empty key part");
    parts.push_back(p);
  }
  if (parts.empty()) throw ConfigError("override '" + assignment + "' has no key");

  toml::table* cur = &root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    toml::node* n = cur->get(parts[i]);
    if (n == nullptr) {
      cur->insert(parts[i], toml::table{});
      n = cur->get(parts[i]);
    }
    cur = n->as_table();
    if (cur == nullptr) {
      throw ConfigError("override '" + assignment + "': '" + parts[i] + "' is not a table");
    }
  }

  // A bare word such as `task=breakout` is read as a string.
  try {
    toml::table parsed = toml::parse("v = " + value, std::string(kOverrideSource));
    cur->insert_or_assign(parts.back(), std::move(*parsed.get("v")));
  } catch (const toml::parse_error&) {
    cur->insert_or_assign(parts.back(), value);
  }
}

HorizonPolicy::Mode parse_mode(std::string_view s) {
  if (s == "one_step") return HorizonPolicy::Mode::one_step;
  if (s == "multi_step") return HorizonPolicy::Mode::multi_step;
  throw ConfigError("unknown horizon mode '" + std::string(s) +
                    "' (expected one_step or multi_step)");
}

TemplateKind parse_template(std::string_view s) {
  if (auto k = parse_template_kind(s)) return *k;
  throw ConfigError("unknown template '" + std::string(s) +
                    "' (expected interactive, batch or episodic)");
}

ExperimentConfig read_table(const toml::table& root, std::string_view source) {
  ExperimentConfig c;
  Reader r(root, "", source);
  r.text("name", c.name);
  r.text("task", c.task);
  r.choice("artifact_init", c.artifact_init, parse_artifact_init);
  r.choice("template", c.template_kind, parse_template);
  r.count("batch_size", c.batch_size);
  r.count("total_updates", c.total_updates);
  r.count("trials", c.trials);
  r.seed("seed", c.seed);
  r.seeds("seeds", c.seeds);
  r.count("memory_capacity", c.memory_capacity);
  r.boolean("parallel_trials", c.parallel_trials);
  r.text("feedback_table", c.feedback_table);
  r.boolean("evaluate_initial", c.evaluate_initial);
  r.text("validation_metric", c.validation_metric);
  r.optional_real("failure_score", c.failure_score);
  r.count("overfit_window", c.overfit_window);

  if (auto h = r.sub("horizon")) {
    h->choice("mode", c.horizon.mode, parse_mode);
    h->count("rollout_length", c.horizon.rollout_length);
    h->finish();
  }
  if (auto o = r.sub("optimizer")) {
    o->text("backend", c.optimizer.backend);
    o->boolean("show_initial", c.optimizer.show_initial);
    o->count("max_payload_chars", c.optimizer.max_payload_chars);
    if (auto l = o->sub("llm")) {
      LlmConfig& llm = c.optimizer.llm;
      l->text("base_url", llm.base_url);
      l->text("path", llm.path);
      l->text("model", llm.model);
      l->text("api_key_env", llm.api_key_env);
      l->real("temperature", llm.temperature);
      l->count("max_attempts", llm.max_attempts);
      l->real("initial_backoff_seconds", llm.initial_backoff_seconds);
      l->count("timeout_seconds", llm.timeout_seconds);
      l->finish();
    }
    o->finish();
  }
  if (auto e = r.sub("environment")) {
    e->count("action_repeat", c.environment.action_repeat);
    e->real("sticky_action_prob", c.environment.sticky_action_prob);
    e->count("enemy_speed_cap", c.environment.enemy_speed_cap);
    e->count("train_max_steps", c.environment.train_max_steps);
    e->finish();
  }
  for (auto [key, proto] : {std::pair{"validation", &c.validation},
                            std::pair{"evaluation", &c.evaluation}}) {
    if (auto p = r.sub(key)) {
      p->count("episodes", proto->episodes);
      p->count("max_steps", proto->max_steps);
      p->finish();
    }
  }
  if (auto d = r.sub("data")) {
    d->choice("text_kind", c.data.text_kind, parse_text_task_kind);
    d->count("size", c.data.size);
    SplitProtocol split = SplitProtocol::bbeh;
    if (d->has("split")) {
      d->choice("split", split, parse_split_protocol);
      c.data.split = split;
    }
    d->count("test_size", c.data.test_size);
    d->finish();
  }
  r.finish();
  return c;
}

std::string quoted(std::string_view s) {
  std::ostringstream out;
  out << toml::value<std::string>(std::string(s));
  return out.str();
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  const TaskSpec& spec = builtin_task(c.task);
  if (c.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  if (c.memory_capacity < 1) throw ConfigError("memory_capacity must be at least 1");
  if (!c.seeds.empty() && c.seeds.size() != c.trials) {
    throw ConfigError("seeds lists " + std::to_string(c.seeds.size()) + " values for " +
                      std::to_string(c.trials) + " trials");
  }
  if (c.horizon.rollout_length < 1) throw ConfigError("horizon.rollout_length must be at least 1");
  if (c.template_kind == TemplateKind::episodic && spec.family != TaskFamily::arcade) {
    throw ConfigError("the episodic template needs an arcade task, not '" + c.task + "'");
  }
  if (c.optimizer.backend != "scripted" && c.optimizer.backend != "llm") {
    throw ConfigError("optimizer.backend must be scripted or llm, not '" + c.optimizer.backend +
                      "'");
  }
  if (c.optimizer.backend == "llm") {
    if (!c.optimizer.llm.base_url.starts_with("http://")) {
      throw ConfigError("optimizer.llm.base_url must start with http://");
    }
    if (c.optimizer.llm.model.empty()) throw ConfigError("optimizer.llm.model must be set");
    if (c.optimizer.llm.max_attempts < 1) {
      throw ConfigError("optimizer.llm.max_attempts must be at least 1");
    }
  }
  const EnvironmentSettings& e = c.environment;
  if (e.action_repeat < 1) throw ConfigError("environment.action_repeat must be at least 1");
  if (!(e.sticky_action_prob >= 0.0 && e.sticky_action_prob <= 1.0)) {
    throw ConfigError("environment.sticky_action_prob must lie in [0, 1]");
  }
  if (e.train_max_steps < 1) throw ConfigError("environment.train_max_steps must be at least 1");
  for (auto [name, p] : {std::pair{"validation", &c.validation},
                         std::pair{"evaluation", &c.evaluation}}) {
    if (p->episodes < 1 || p->max_steps < 1) {
      throw ConfigError(std::string(name) + ".episodes and max_steps must be at least 1");
    }
  }
  if (!c.feedback_table.empty() && !tables::by_name(c.feedback_table)) {
    throw ConfigError("unknown feedback_table '" + c.feedback_table + "'");
  }
  if (!c.validation_metric.empty()) {
    bool known = false;
    if (spec.family == TaskFamily::tabular) {
      for (std::string_view m : kTabularMetrics) known = known || m == c.validation_metric;
    } else if (spec.family == TaskFamily::arcade) {
      known = c.validation_metric == "mean_return";
    } else {
      known = c.validation_metric == "accuracy";
    }
    if (!known) {
      throw ConfigError("validation_metric '" + c.validation_metric + "' does not apply to task '" +
                        c.task + "'");
    }
  }
  if (c.overfit_window < 2) throw ConfigError("overfit_window must be at least 2");
  if (spec.family != TaskFamily::arcade) {
    if (c.data.size < 2) throw ConfigError("data.size must be at least 2");
    if (spec.family == TaskFamily::tabular && c.data.test_size < 1) {
      throw ConfigError("data.test_size must be at least 1");
    }
  }
}

ExperimentConfig parse_config(std::string_view toml_text, std::string_view source_name,
                              const std::vector<std::string>& overrides) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source_name);
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw ConfigError(std::string(source_name) + ":" + std::to_string(src.begin.line) + ":" +
                      std::to_string(src.begin.column) + ": " + std::string(e.description()));
  }
  for (const std::string& o : overrides) apply_override(root, o);
  ExperimentConfig c = read_table(root, source_name);
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), overrides);
}

std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream o;
  auto num = [](double v) { return format_real(v); };
  o << "name = " << quoted(c.name) << "\n";
  o << "task = " << quoted(c.task) << "\n";
  o << "artifact_init = " << quoted(to_string(c.artifact_init)) << "\n";
  o << "template = " << quoted(to_string(c.template_kind)) << "\n";
  o << "batch_size = " << c.batch_size << "\n";
  o << "total_updates = " << c.total_updates << "\n";
  o << "trials = " << c.trials << "\n";
  o << "seed = " << c.seed << "\n";
  o << "seeds = [";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? ", " : "") << c.seeds[i];
  o << "]\n";
  o << "memory_capacity = " << c.memory_capacity << "\n";
  o << "parallel_trials = " << (c.parallel_trials ? "true" : "false") << "\n";
  o << "feedback_table = " << quoted(c.feedback_table) << "\n";
  o << "evaluate_initial = " << (c.evaluate_initial ? "true" : "false") << "\n";
  o << "validation_metric = " << quoted(c.validation_metric) << "\n";
  if (c.failure_score) o << "failure_score = " << num(*c.failure_score) << "\n";
  o << "overfit_window = " << c.overfit_window << "\n";
  o << "\n[horizon]\nmode = " << quoted(to_string(c.horizon.mode)) << "\n";
  o << "rollout_length = " << c.horizon.rollout_length << "\n";
  o << "\n[optimizer]\nbackend = " << quoted(c.optimizer.backend) << "\n";
  o << "show_initial = " << (c.optimizer.show_initial ? "true" : "false") << "\n";
  o << "max_payload_chars = " << c.optimizer.max_payload_chars << "\n";
  const LlmConfig& l = c.optimizer.llm;
  o << "\n[optimizer.llm]\nbase_url = " << quoted(l.base_url) << "\n";
  o << "path = " << quoted(l.path) << "\n";
  o << "model = " << quoted(l.model) << "\n";
  o << "api_key_env = " << quoted(l.api_key_env) << "\n";
  o << "temperature = " << num(l.temperature) << "\n";
  o << "max_attempts = " << l.max_attempts << "\n";
  o << "initial_backoff_seconds = " << num(l.initial_backoff_seconds) << "\n";
  o << "timeout_seconds = " << l.timeout_seconds << "\n";
  o << "\n[environment]\naction_repeat = " << c.environment.action_repeat << "\n";
  o << "sticky_action_prob = " << num(c.environment.sticky_action_prob) << "\n";
  o << "enemy_speed_cap = " << c.environment.enemy_speed_cap << "\n";
  o << "train_max_steps = " << c.environment.train_max_steps << "\n";
  o << "\n[validation]\nepisodes = " << c.validation.episodes << "\n";
  o << "max_steps = " << c.validation.max_steps << "\n";
  o << "\n[evaluation]\nepisodes = " << c.evaluation.episodes << "\n";
  o << "max_steps = " << c.evaluation.max_steps << "\n";
  o << "\n[data]\ntext_kind = " << quoted(to_string(c.data.text_kind)) << "\n";
  o << "size = " << c.data.size << "\n";
  if (c.data.split) o << "split = " << quoted(to_string(*c.data.split)) << "\n";
  o << "test_size = " << c.data.test_size << "\n";
  return o.str();
}

}  // namespace looplab
