#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "looplab/config.hpp"
#include "looplab/harness.hpp"
#include "looplab/report.hpp"
#include "looplab/util.hpp"

namespace fs = std::filesystem;
using namespace looplab;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "Experiment TOML file")->required();
    cmd->add_option("--set", sets, "Override a config key, e.g. --set batch_size=3")
        ->take_all()
        ->allow_extra_args(false);
    cmd->add_option("--trials", trials, "Number of trials");
    cmd->add_option("--seed", seed, "Experiment seed");
  }

  ExperimentConfig load() const {
    std::vector<std::string> overrides = sets;
    if (trials) overrides.push_back("trials=" + std::to_string(*trials));
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    return load_config(config, overrides);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

RunOptions run_options(const std::string& out, bool quiet) {
  RunOptions o;
  o.out_dir = out;
  if (!quiet) o.log = [](const std::string& line) { std::cerr << line << "\n"; };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"looplab: learning loops over programs with named slots"};
  app.require_subcommand(1);

  ConfigArgs run_args;
  std::string run_out;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  run_args.add(run);
  run->add_option("--out", run_out, "Run directory")->required();
  run->add_flag("--quiet", quiet, "No progress output");

  ConfigArgs sweep_args;
  std::string sweep_out, axis;
  std::vector<std::string> values;
  CLI::App* sw = app.add_subcommand("sweep", "Run one experiment per value of an axis");
  sweep_args.add(sw);
  sw->add_option("--out", sweep_out, "Sweep directory")->required();
  sw->add_option("--axis", axis, "batch_size, horizon or artifact_init")->required();
  sw->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sw->add_flag("--quiet", quiet, "No progress output");

  ConfigArgs eval_args;
  std::string artifact_path;
  CLI::App* ev = app.add_subcommand("eval", "Score an artifact on the held-out protocol");
  eval_args.add(ev);
  ev->add_option("--artifact", artifact_path, "Artifact file; the task's starting artifact if omitted");

  std::vector<std::string> report_dirs;
  std::string report_out;
  CLI::App* rep = app.add_subcommand("report", "Aggregate curves from run directories");
  rep->add_option("dirs", report_dirs, "Run, trial or sweep directories")->required();
  rep->add_option("--out", report_out, "Directory for the aggregate CSV, SVG and summary")
      ->required();

  std::string replay_dir;
  std::size_t replay_step = 0;
  std::optional<std::size_t> replay_trial;
  CLI::App* rp = app.add_subcommand("replay", "Print the learning context sent at a step");
  rp->add_option("dir", replay_dir, "Trial directory, or run directory with --trial")->required();
  rp->add_option("--step", replay_step, "Update step")->required();
  rp->add_option("--trial", replay_trial, "Trial index inside a run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      const ExperimentConfig config = run_args.load();
      const ExperimentReport report = run_experiment(config, run_options(run_out, quiet));
      std::cout << experiment_summary(report);
      for (const TrialReport& t : report.trials) {
        if (!t.failed) return kOk;
      }
      std::cerr << "error: every trial failed\n";
      return kRuntime;
    }
    if (*sw) {
      const ExperimentConfig config = sweep_args.load();
      const SweepAxis a = parse_sweep_axis(axis);
      for (const std::string& v : values) apply_sweep_value(config, a, v);
      const SweepReport report = sweep(config, a, values, run_options(sweep_out, quiet));
      std::cout << markdown_table(sweep_table(sweep_csv(report)));
      for (const SweepCell& c : report.cells) {
        if (c.report) return kOk;
      }
      std::cerr << "error: every sweep cell failed\n";
      return kRuntime;
    }
    if (*ev) {
      const ExperimentConfig config = eval_args.load();
      const ExperimentContext ctx(config);
      Artifact artifact = init_artifact(ctx.task(), config.artifact_init);
      if (!artifact_path.empty()) {
        std::ifstream in(artifact_path, std::ios::binary);
        if (!in) {
          std::cerr << "error: cannot open " << artifact_path << "\n";
          return kUsage;
        }
        std::ostringstream text;
        text << in.rdbuf();
        artifact = read_artifact(text.str());
      }
      const FinalScore s = evaluate_final(ctx, artifact);
      std::cout << validation_metric(config).name << " " << format_fixed(s.value, 4) << " +/- "
                << format_fixed(s.standard_error, 4) << " over " << s.samples << " samples\n";
      if (s.error) {
        std::cerr << "error: artifact failed: " << *s.error << "\n";
        return kRuntime;
      }
      return kOk;
    }
    if (*rep) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      const ReportOutput out = build_report(dirs);
      for (const std::string& w : out.warnings) std::cerr << "warning: " << w << "\n";
      if (out.curves == 0 && out.summary.find("Sweep ") == std::string::npos) {
        std::cerr << "error: no usable curve files\n";
        return kRuntime;
      }
      write_text(fs::path(report_out) / "aggregate.csv", out.aggregate_csv);
      write_text(fs::path(report_out) / "curves.svg", out.svg);
      write_text(fs::path(report_out) / "summary.md", out.summary);
      std::cout << out.summary;
      return kOk;
    }
    if (*rp) {
      std::cout << replay_context(replay_dir, replay_step, replay_trial);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
