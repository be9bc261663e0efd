#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "gbsg/pipeline.hpp"
#include "gbsg/synth.hpp"

namespace gbsg::pipeline {

namespace {

struct BenchData {
  grading::TrainingLibrary library;
  Volume3D query;
  LabelMap labels;
};

BenchData bench_data(const BenchSpec& spec) {
  SynthSpec s;
  s.dims = spec.dims;
  s.structures = 8;
  s.perturbation[1] = {0.0, 0.5, 1.5, 2.0};
  s.seed = spec.seed;
  std::vector<grading::TemplateEntry> entries;
  for (int t = 0; t < spec.templates; ++t) {
    const Group g = t % 2 ? Group::AD : Group::CN;
    auto subj = synth_subject(s, g, t);
    entries.push_back({std::move(subj.volume), std::move(subj.labels),
                       g == Group::AD ? grading::Status::AD : grading::Status::CN});
  }
  auto q = synth_subject(s, Group::pMCI, 0);
  return {grading::TrainingLibrary(std::move(entries)), std::move(q.volume), std::move(q.labels)};
}

}  // namespace

std::vector<BenchRow> benchmark_grading(const BenchSpec& spec) {
  const auto data = bench_data(spec);
  grading::GradingParams params;
  params.k = spec.k;
  params.patch_radius = spec.patch_radius;
  params.search_window = spec.search_window;
  params.pm_iterations = spec.pm_iterations;
  params.seed = spec.seed;

  std::vector<BenchRow> rows;
  auto run = [&](grading::SearchMethod method, int threads) {
    params.method = method;
    BenchRow row;
    row.mode = to_string(method);
    row.threads = threads;
    for (int rep = 0; rep < std::max(1, spec.repeats); ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto map = grading::grade_volume(data.query, data.labels, data.library, params, {threads});
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      row.all_seconds.push_back(dt.count());
      row.distance_evaluations = map.distance_evaluations;
      row.graded_voxels = static_cast<std::size_t>(std::count(map.mask.labels.begin(), map.mask.labels.end(), 1u));
      row.output_hash = hash_bytes(map.grades.data.data(), map.grades.data.size() * sizeof(float));
    }
    row.seconds = *std::min_element(row.all_seconds.begin(), row.all_seconds.end());
    rows.push_back(row);
  };
  for (int t : spec.threads) {
    if (spec.include_exact) run(grading::SearchMethod::Exact, t);
    run(grading::SearchMethod::PatchMatch, t);
  }
  return rows;
}

std::string format_bench(const BenchSpec& spec, const std::vector<BenchRow>& rows) {
  std::ostringstream o;
  o << "dims=" << spec.dims[0] << 'x' << spec.dims[1] << 'x' << spec.dims[2] << " templates=" << spec.templates
    << " K=" << spec.k << " r=" << spec.patch_radius << " s=" << spec.search_window
    << " pm_iterations=" << spec.pm_iterations << " repeats=" << spec.repeats << '\n';
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-11s %7s %11s %11s %16s %13s %18s\n", "mode", "threads", "seconds", "spread",
                "distance_evals", "graded_voxels", "output_hash");
  o << buf;
  for (const auto& r : rows) {
    const auto [lo, hi] = std::minmax_element(r.all_seconds.begin(), r.all_seconds.end());
    const double spread = *lo > 0 ? (*hi - *lo) / *lo : 0.0;
    std::snprintf(buf, sizeof buf, "%-11s %7d %11.3f %10.1f%% %16llu %13zu   %016llx\n", r.mode.c_str(), r.threads,
                  r.seconds, 100.0 * spread, static_cast<unsigned long long>(r.distance_evaluations), r.graded_voxels,
                  static_cast<unsigned long long>(r.output_hash));
    o << buf;
  }
  return o.str();
}

}  // namespace gbsg::pipeline
