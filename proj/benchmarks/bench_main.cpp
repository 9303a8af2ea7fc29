#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "looplab/artifact.hpp"
#include "looplab/environments.hpp"
#include "looplab/feedback.hpp"
#include "looplab/optimizer.hpp"
#include "looplab/tasks.hpp"
#include "looplab/templates.hpp"
#include "looplab/util.hpp"

using namespace looplab;

namespace {

void BM_EnvironmentStep(benchmark::State& state) {
  EnvConfig cfg{static_cast<Game>(state.range(0))};
  cfg.seed = 1;
  Environment env(cfg);
  env.reset();
  const auto legal = legal_actions(cfg.game);
  Rng rng(2);
  for (auto _ : state) {
    if (env.done()) env.reset();
    benchmark::DoNotOptimize(env.step(legal[uniform_index(rng, legal.size())]));
  }
}
BENCHMARK(BM_EnvironmentStep)->Arg(0)->Arg(1)->Arg(2);

void BM_ExecutePongPolicy(benchmark::State& state) {
  const TaskSpec& spec = builtin_task("pong");
  const Artifact artifact = init_artifact(spec, static_cast<ArtifactInit>(state.range(0)));
  const HostMap host = task_host_functions(spec);
  EnvConfig cfg{Game::pong};
  Environment env(cfg);
  const Value obs = to_value(env.reset());
  Rng rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(execute_traced(artifact, obs, ExecOptions{10'000, &rng, &host}));
  }
}
BENCHMARK(BM_ExecutePongPolicy)->Arg(0)->Arg(1);

WorkflowGraph small_trace(std::size_t i) {
  GraphBuilder b = begin_graph("question " + std::to_string(i));
  const std::vector<NodeId> parents{b.input()};
  b.record_step("solve", parents, {}, "(A)", "answer");
  return attach_feedback(b.graph(), FeedbackRecord{1, "Correct.", Stage::correct, "correct"});
}

void BM_BatchifyRender(benchmark::State& state) {
  std::vector<LearningGraph> parts;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    parts.push_back(template_interactive(small_trace(static_cast<std::size_t>(i))));
  }
  for (auto _ : state) {
    const LearningGraph lg = batchify(parts);
    benchmark::DoNotOptimize(render_traces(lg));
    benchmark::DoNotOptimize(render_feedback(lg));
  }
}
BENCHMARK(BM_BatchifyRender)->Arg(1)->Arg(5)->Arg(25);

void BM_RenderContext(benchmark::State& state) {
  const TaskSpec& spec = builtin_task("pong");
  const Artifact artifact = init_many_function(spec);
  std::vector<WorkflowGraph> gs;
  for (std::size_t i = 0; i < 5; ++i) gs.push_back(small_trace(i));
  const LearningGraph lg = template_batch(gs);
  OptimizerMemory memory(5);
  for (std::size_t i = 0; i < 5; ++i) memory.push(MemoryEntry{i, "edit", {}, 1.0, "low", "Try again."});
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_context(lg, artifact, memory, spec.background, 5));
  }
}
BENCHMARK(BM_RenderContext);

void BM_ClassificationMetrics(benchmark::State& state) {
  Rng rng(4);
  std::vector<double> preds(static_cast<std::size_t>(state.range(0))), golds(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i] = static_cast<double>(uniform_index(rng, 2));
    golds[i] = static_cast<double>(uniform_index(rng, 2));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_metrics(preds, golds, TaskKind::classification));
  }
}
BENCHMARK(BM_ClassificationMetrics)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
