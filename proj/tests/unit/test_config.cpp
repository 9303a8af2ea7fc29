#include <string>
#include <vector>

#include "doctest.h"
#include "looplab/config.hpp"

using namespace looplab;

namespace {

std::string error_of(std::string_view text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, "exp.toml", overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("dump and parse round-trip") {
  ExperimentConfig c;
  CHECK(dump_config(parse_config(dump_config(c))) == dump_config(c));

  c.name = "a \"quoted\" name";
  c.task = "bbeh";
  c.template_kind = TemplateKind::batch;
  c.batch_size = 3;
  c.trials = 2;
  c.seeds = {4, 9};
  c.failure_score = -2.5;
  c.data.split = SplitProtocol::bbeh;
  c.optimizer.llm.temperature = 0.7;
  const ExperimentConfig back = parse_config(dump_config(c));
  CHECK(dump_config(back) == dump_config(c));
  CHECK(back.seeds == std::vector<std::uint64_t>{4, 9});
  CHECK(back.trial_seed(1) == 9);
  CHECK(back.failure_score == doctest::Approx(-2.5));
  CHECK(back.name == c.name);
}

TEST_CASE("unknown keys and bad types name their location") {
  CHECK(error_of("task = \"pong\"\nbatchsize = 3\n").starts_with("exp.toml:2:1: unknown key"));
  const std::string nested = error_of("task = \"pong\"\n[horizon]\nmode = \"one_step\"\nlength = 4\n");
  CHECK(nested.find("exp.toml:4") != std::string::npos);
  CHECK(nested.find("horizon.length") != std::string::npos);
  CHECK(error_of("trials = \"two\"\n").find("exp.toml:1") != std::string::npos);
  CHECK(error_of("template = \"tree\"\n").find("template") != std::string::npos);
  CHECK(error_of("task = [\n").starts_with("exp.toml:"));
}

TEST_CASE("dotted overrides apply in order") {
  const std::string base = "task = \"bbeh\"\ntemplate = \"batch\"\n";
  ExperimentConfig c = parse_config(base, "exp.toml", {"batch_size=3"});
  CHECK(c.batch_size == 3);
  c = parse_config(base, "exp.toml", {"batch_size=3", "batch_size=5"});
  CHECK(c.batch_size == 5);
  c = parse_config(base, "exp.toml", {"optimizer.llm.model=local-model", "data.size=60"});
  CHECK(c.optimizer.llm.model == "local-model");
  CHECK(c.data.size == 60);
  CHECK(error_of(base, {"batch_size"}).find("key=value") != std::string::npos);
  CHECK(error_of(base, {"task.x=1"}).find("not a table") != std::string::npos);
  CHECK(error_of(base, {"data.sise=3"}).starts_with("override"));
}

TEST_CASE("inconsistent configs are rejected") {
  CHECK_FALSE(error_of("task = \"bbeh\"\ntemplate = \"episodic\"\n").empty());
  CHECK_FALSE(error_of("trials = 2\nseeds = [1]\n").empty());
  CHECK_FALSE(error_of("trials = 0\n").empty());
  CHECK_FALSE(error_of("batch_size = 0\n").empty());
  CHECK_FALSE(error_of("memory_capacity = 0\n").empty());
  CHECK_FALSE(error_of("task = \"chess\"\n").empty());
  CHECK_FALSE(error_of("[optimizer]\nbackend = \"llm\"\n").empty());
  CHECK_FALSE(error_of("[environment]\nsticky_action_prob = 1.5\n").empty());
  CHECK_FALSE(error_of("task = \"spaceship\"\nvalidation_metric = \"accuracy_top5\"\n").empty());
  CHECK_FALSE(error_of("task = \"pong\"\nvalidation_metric = \"f1\"\n").empty());
  CHECK(error_of("task = \"housing\"\nvalidation_metric = \"rmse\"\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/x.toml"), ConfigError);
}
