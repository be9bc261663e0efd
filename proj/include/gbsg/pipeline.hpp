#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gbsg/classify.hpp"
#include "gbsg/config.hpp"
#include "gbsg/featsel.hpp"
#include "gbsg/grading.hpp"

namespace gbsg::pipeline {

/// File locations inside the work directory.
struct WorkDir {
  std::filesystem::path root;

  std::filesystem::path grade(const std::string& id) const { return root / "grades" / (id + ".vol"); }
  std::filesystem::path graph(const std::string& id) const { return root / "graphs" / (id + ".csv"); }
  std::filesystem::path grading_stats() const { return root / "grading_stats.csv"; }
  std::filesystem::path features_raw() const { return root / "features_raw.csv"; }
  std::filesystem::path imputation() const { return root / "imputation.csv"; }
  std::filesystem::path features() const { return root / "features_selected.csv"; }
  std::filesystem::path age_model() const { return root / "age_model.txt"; }
  std::filesystem::path zscore_model() const { return root / "zscore_model.txt"; }
  std::filesystem::path selection() const { return root / "selection.txt"; }
  std::filesystem::path svm() const { return root / "svm.txt"; }
  std::filesystem::path svm_cv() const { return root / "svm_cv.txt"; }
  std::filesystem::path forests() const { return root / "forests.txt"; }
  std::filesystem::path metrics() const { return root / "metrics.txt"; }
  std::filesystem::path rf_runs() const { return root / "rf_runs.csv"; }
  std::filesystem::path predictions() const { return root / "predictions.csv"; }
  std::filesystem::path fits() const { return root / "fits.txt"; }
  std::filesystem::path timing() const { return root / "timing.txt"; }
};

/// One parameter fit and the subjects whose rows it read.
struct FitRecord {
  std::string stage;
  std::vector<std::string> subject_ids;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;
void write_key_values(const KeyValues& kv, const std::filesystem::path& path);
KeyValues read_key_values(const std::filesystem::path& path);

std::vector<FitRecord> read_fit_log(const std::filesystem::path& path);

void stage_grade(const PipelineConfig& cfg, const grading::ExecOptions& exec = {});
void stage_graph(const PipelineConfig& cfg, const grading::ExecOptions& exec = {});
void stage_features(const PipelineConfig& cfg);
void stage_train(const PipelineConfig& cfg);
void stage_eval(const PipelineConfig& cfg);
/// Assembles the report from the work directory, writes it, and returns its text.
std::string stage_report(const PipelineConfig& cfg);

struct PipelineResult {
  std::optional<classify::Metrics> svm;
  std::optional<classify::EvalReport> rf;
  featsel::SelectionMask selection;
  std::vector<FitRecord> fits;
  std::string report;
  KeyValues stage_seconds;
};

/// grade -> graph -> features -> train -> eval -> report.
PipelineResult run_pipeline(const PipelineConfig& cfg, const grading::ExecOptions& exec = {});

struct BenchSpec {
  Dims dims{64, 64, 64};
  int templates = 10;
  int k = 50;
  int patch_radius = 2;
  int search_window = 3;
  int pm_iterations = 4;
  std::vector<int> threads{1};
  int repeats = 1;
  bool include_exact = true;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string mode;  // serial, exact, patchmatch
  int threads = 1;
  double seconds = 0.0;  // best of repeats
  std::vector<double> all_seconds;
  std::uint64_t distance_evaluations = 0;
  std::size_t graded_voxels = 0;
  std::uint64_t output_hash = 0;  // FNV-1a of the grade bytes
};

std::vector<BenchRow> benchmark_grading(const BenchSpec& spec);
std::string format_bench(const BenchSpec& spec, const std::vector<BenchRow>& rows);

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace gbsg::pipeline
