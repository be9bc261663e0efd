// Serial reference vs OpenMP exact vs patch-match grading on synthetic volumes.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "gbsg/pipeline.hpp"
#include "gbsg/reference/grading_serial.hpp"
#include "gbsg/synth.hpp"

using namespace gbsg;

int main(int argc, char** argv) {
  CLI::App app{"grading benchmark"};
  pipeline::BenchSpec spec;
  std::uint32_t side = 32;
  std::string threads = "1,2,4";
  bool serial = true;
  app.add_option("--size", side)->check(CLI::Range(8u, 512u));
  app.add_option("--templates", spec.templates)->check(CLI::PositiveNumber);
  app.add_option("--k", spec.k)->check(CLI::PositiveNumber);
  app.add_option("--radius", spec.patch_radius)->check(CLI::PositiveNumber);
  app.add_option("--window", spec.search_window)->check(CLI::NonNegativeNumber);
  app.add_option("--repeats", spec.repeats)->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Comma-separated worker counts");
  app.add_option("--serial", serial, "Time the serial reference too");
  CLI11_PARSE(app, argc, argv);

  spec.dims = {side, side, side};
  spec.threads.clear();
  std::stringstream in(threads);
  for (std::string t; std::getline(in, t, ',');) spec.threads.push_back(std::stoi(t));

  const auto rows = pipeline::benchmark_grading(spec);
  std::cout << pipeline::format_bench(spec, rows);

  if (serial) {
    // Same volumes as benchmark_grading.
    pipeline::SynthSpec s;
    s.dims = spec.dims;
    s.structures = 8;
    s.perturbation[1] = {0.0, 0.5, 1.5, 2.0};
    s.seed = spec.seed;
    std::vector<grading::TemplateEntry> entries;
    for (int t = 0; t < spec.templates; ++t) {
      const Group g = t % 2 ? Group::AD : Group::CN;
      auto subj = pipeline::synth_subject(s, g, t);
      entries.push_back({std::move(subj.volume), std::move(subj.labels),
                         g == Group::AD ? grading::Status::AD : grading::Status::CN});
    }
    const grading::TrainingLibrary lib(std::move(entries));
    const auto q = pipeline::synth_subject(s, Group::pMCI, 0);
    grading::GradingParams params;
    params.k = spec.k;
    params.patch_radius = spec.patch_radius;
    params.search_window = spec.search_window;
    const auto t0 = std::chrono::steady_clock::now();
    const auto map = reference::grade_volume_serial(q.volume, q.labels, lib, params);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    const auto h = pipeline::hash_bytes(map.grades.data.data(), map.grades.data.size() * sizeof(float));
    std::printf("%-11s %7d %11.3f %11s %16s %13s   %016llx\n", "serial", 1, dt.count(), "-", "-", "-",
                static_cast<unsigned long long>(h));
  }
  return 0;
}
