#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "gbsg/error.hpp"
#include "gbsg/pipeline.hpp"
#include "gbsg/synth.hpp"

namespace fs = std::filesystem;
using namespace gbsg;

namespace {

constexpr int kExitUsage = 1, kExitData = 2, kExitNumerical = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string grading_mode;
};

pipeline::PipelineConfig load(const Globals& g, bool required) {
  pipeline::PipelineConfig cfg;
  if (!g.config.empty()) cfg = pipeline::read_config(g.config);
  else if (required) throw Error(ErrorCode::ConfigError, "--config is required for this command");
  if (g.seed) cfg.seed = *g.seed;
  if (!g.grading_mode.empty()) cfg.grading.method = pipeline::parse_search_method(g.grading_mode);
  return cfg;
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stoi(item));
  return out;
}

int exit_code(ErrorCode c) {
  switch (kind_of(c)) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Numerical: return kExitNumerical;
    case ErrorKind::Data: return kExitData;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph of brain structures grading"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Config file (key=value)");
  app.add_option("--seed", g.seed, "Master seed, overrides the config");
  app.add_option("--threads", g.threads, "Worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_option("--grading-mode", g.grading_mode, "Search method")->check(CLI::IsMember({"exact", "patchmatch"}));

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory (default: directory of paths.manifest)");

  auto* grade = app.add_subcommand("grade", "Grade every subject of the manifest");
  auto* graph = app.add_subcommand("graph", "Build one graph per subject");
  auto* features = app.add_subcommand("features", "Age-correct, z-score and select features");
  auto* train = app.add_subcommand("train", "Train the classifiers on CN/AD");
  auto* eval = app.add_subcommand("eval", "Evaluate on sMCI/pMCI");
  auto* run = app.add_subcommand("run", "All stages, then the report");
  auto* report = app.add_subcommand("report", "Write the report from the work directory");

  auto* bench = app.add_subcommand("bench", "Time exact and patch-match grading");
  pipeline::BenchSpec bs;
  std::uint32_t side = 64;
  std::string thread_list = "1";
  bool no_exact = false;
  bench->add_option("--size", side, "Cube side")->check(CLI::Range(8u, 512u));
  bench->add_option("--templates", bs.templates)->check(CLI::PositiveNumber);
  bench->add_option("--k", bs.k)->check(CLI::PositiveNumber);
  bench->add_option("--radius", bs.patch_radius)->check(CLI::PositiveNumber);
  bench->add_option("--window", bs.search_window)->check(CLI::NonNegativeNumber);
  bench->add_option("--pm-iterations", bs.pm_iterations)->check(CLI::PositiveNumber);
  bench->add_option("--thread-list", thread_list, "Comma-separated worker counts");
  bench->add_option("--repeats", bs.repeats)->check(CLI::PositiveNumber);
  bench->add_flag("--no-exact", no_exact, "Skip exact mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    const grading::ExecOptions exec{g.threads};
    if (synth->parsed()) {
      auto cfg = load(g, false);
      fs::path out = synth_out;
      if (out.empty()) out = cfg.manifest.empty() ? fs::path("cohort") : cfg.manifest.parent_path();
      std::cout << pipeline::synth_cohort(pipeline::synth_spec(cfg), out).string() << '\n';
    } else if (bench->parsed()) {
      bs.dims = {side, side, side};
      bs.threads = parse_list(thread_list);
      bs.include_exact = !no_exact;
      if (g.seed) bs.seed = *g.seed;
      auto rows = pipeline::benchmark_grading(bs);
      std::cout << pipeline::format_bench(bs, rows);
    } else {
      const auto cfg = load(g, true);
      if (grade->parsed()) pipeline::stage_grade(cfg, exec);
      else if (graph->parsed()) pipeline::stage_graph(cfg, exec);
      else if (features->parsed()) pipeline::stage_features(cfg);
      else if (train->parsed()) pipeline::stage_train(cfg);
      else if (eval->parsed()) pipeline::stage_eval(cfg);
      else if (report->parsed()) std::cout << pipeline::stage_report(cfg);
      else if (run->parsed()) std::cout << pipeline::run_pipeline(cfg, exec).report;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
