// avbench command-line entry point.

#include <CLI11.hpp>

#include <fmt/format.h>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "avbench/error.hpp"
#include "avbench/experiment.hpp"
#include "avbench/mocap_io.hpp"
#include "avbench/synthetic.hpp"

namespace {

using namespace avbench;

ExperimentConfig load_config(const std::string& path, const std::optional<std::string>& out) {
  ExperimentConfig config = parse_experiment_config(read_file(path));
  if (out) config.output_dir = *out;
  return config;
}

int finish(const RunOutcome& outcome) {
  for (const std::string& f : outcome.written_files) fmt::print("wrote {}\n", f);
  for (const std::string& e : outcome.errors) fmt::print(stderr, "error: {}\n", e);
  if (!outcome.ok()) fmt::print(stderr, "{} error(s); completed work was kept\n", outcome.errors.size());
  return outcome.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"avbench: artifact sensitivity benchmark for sparse-input avatar reconstruction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> reference;
  std::string reference_model = "avatarposer";
  std::size_t jobs = 1;

  auto* simulate = app.add_subcommand("simulate", "Write sparse and Cartesian streams for every clip");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  simulate->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Evaluate the degradation grid and write report.csv, report.md, run_manifest.json");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--reference", reference, "Reference table CSV for delta columns")->check(CLI::ExistingFile);

  std::vector<std::string> reports;
  auto* report = app.add_subcommand("report", "Merge report CSVs into one comparison report");
  report->add_option("reports", reports, "report.csv files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out_dir, "Output directory")->required();
  report->add_option("--reference", reference, "Reference table CSV for delta columns")->check(CLI::ExistingFile);
  report->add_option("--reference-model", reference_model, "Model column of the reference table to compare against");

  auto* validate = app.add_subcommand("validate-config", "Check a config and print the expanded grid");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::size_t count = 1;
  double seconds = 60.0;
  double fps = 60.0;
  std::uint64_t seed = 0;
  std::string format = "bvh";
  auto* synth = app.add_subcommand("synthesize", "Write a procedural motion corpus");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--count", count, "Number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--seconds", seconds, "Clip length in seconds")->check(CLI::PositiveNumber);
  synth->add_option("--fps", fps, "Frame rate")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Corpus seed");
  synth->add_option("--format", format, "bvh or json")->check(CLI::IsMember({"bvh", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return finish(run_simulate(load_config(config_path, out_dir), jobs));
    if (*sweep) {
      ExperimentConfig config = load_config(config_path, out_dir);
      return finish(run_sweep(config, jobs, reference));
    }
    if (*report) return finish(run_report(reports, *out_dir, reference, reference_model));
    if (*validate) {
      const ExperimentConfig config = load_config(config_path, std::nullopt);
      const auto points = expand_grid(config.grid, config.full_product);
      fmt::print("config ok: {} grid point(s), {} seed(s), {} reconstructor(s)\n", points.size(), config.seeds.size(),
                 config.reconstructors.size());
      for (const GridPoint& p : points) {
        fmt::print("  {} {}{}\n", p.condition, format_level(p.level), p.stochastic() ? " (stochastic)" : "");
      }
      return 0;
    }
    if (*synth) {
      std::filesystem::create_directories(*out_dir);
      for (const MotionClip& clip : synthesize_corpus(count, seed, SyntheticMotionOptions{seconds, fps})) {
        const auto path = std::filesystem::path(*out_dir) / (clip.name() + "." + format);
        write_file(path.string(), format == "bvh" ? serialize_bvh(clip, 1.0) : save_clip_json(clip));
        fmt::print("wrote {}\n", path.string());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
