#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gbsg/brain_graph.hpp"
#include "gbsg/classify.hpp"
#include "gbsg/featsel.hpp"
#include "gbsg/grading.hpp"
#include "gbsg/volume.hpp"

namespace gbsg::pipeline {

enum class ClassifierKind { Svm, Rf, Both };

struct SynthSpec {
  Dims dims{32, 32, 32};
  Spacing spacing{1.0f, 1.0f, 1.0f};
  int structures = 10;
  int box_size = 0;  // 0: fill each layout cell minus a margin
  // structure id -> offset per group, indexed CN, sMCI, pMCI, AD (in noise sd units)
  std::map<std::uint32_t, std::array<double, 4>> perturbation;
  double noise_sd = 1.0;
  std::array<int, 4> counts{40, 20, 20, 40};
  double age_mean = 73.0;
  double age_sd = 6.0;
  double age_effect = 0.02;  // intensity change per year, in noise sd units
  std::uint64_t seed = 0;

  void validate() const;
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path templates;  // empty: every CN/AD subject of the manifest
  std::filesystem::path work_dir = "work";
  std::filesystem::path report;     // empty: <work_dir>/report.txt
  grading::GradingParams grading;
  graph::GraphParams graph;
  featsel::ElasticNetParams en;
  ClassifierKind classifier = ClassifierKind::Both;
  classify::ForestParams forest;
  int rf_runs = 30;
  int cv_folds = 5;
  std::uint64_t seed = 0;
  SynthSpec synth;

  void validate(bool check_paths) const;
  std::filesystem::path report_path() const { return report.empty() ? work_dir / "report.txt" : report; }
};

/// Flat `key=value` text; `#` starts a comment. Unknown keys are rejected.
/// Relative paths resolve against base_dir.
PipelineConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig read_config(const std::filesystem::path& path);

/// Every key with its effective value, one per line in a fixed order.
std::string config_to_text(const PipelineConfig& cfg);

std::string to_string(ClassifierKind k);
std::string to_string(grading::SearchMethod m);
grading::SearchMethod parse_search_method(const std::string& s);

}  // namespace gbsg::pipeline
