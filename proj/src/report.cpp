#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "gbsg/error.hpp"
#include "gbsg/pipeline.hpp"
#include "gbsg/rng.hpp"
#include "gbsg/synth.hpp"
#include "gbsg/volio.hpp"

#ifndef GBSG_VERSION
#define GBSG_VERSION "0.0.0"
#endif

namespace gbsg::pipeline {

namespace fs = std::filesystem;

namespace {

std::string file_hash(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::MissingFile, p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_bytes(bytes.data(), bytes.size())));
  return buf;
}

std::string percent(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::string percent_sd(double v, double sd) {
  if (std::isnan(v)) return "n/a";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.1f +/- %.1f", 100.0 * v, 100.0 * sd);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s + ' ' : s + std::string(w - s.size(), ' '); }

// Subjects with structures missing from their graph and the entries filled in.
std::string imputation_summary(const WorkDir& wd) {
  std::ifstream f(wd.imputation());
  if (!f) throw Error(ErrorCode::MissingFile, wd.imputation().string());
  std::string line;
  std::getline(f, line);
  std::set<std::uint32_t> missing;
  std::uint64_t subjects = 0, entries = 0;
  while (std::getline(f, line)) {
    std::istringstream row(line);
    std::string id, ids, count;
    std::getline(row, id, ',');
    std::getline(row, ids, ',');
    std::getline(row, count, ',');
    ++subjects;
    entries += std::stoull(count);
    std::istringstream each(ids);
    for (std::uint32_t id; each >> id;) missing.insert(id);
  }
  std::ostringstream o;
  o << "imputed_subjects=" << subjects << '\n' << "imputed_entries=" << entries << '\n' << "missing_structures=";
  bool first = true;
  for (auto id : missing) o << (std::exchange(first, false) ? "" : ",") << id;
  o << '\n';
  return o.str();
}

}  // namespace

std::string stage_report(const PipelineConfig& cfg) {
  try {
    const WorkDir wd{cfg.work_dir};
    std::ostringstream o;

    o << "[config]\n" << config_to_text(cfg);

    const auto raw = read_feature_table(wd.features_raw());
    const auto mask = featsel::read_selection(wd.selection(), raw.col_names);
    std::vector<std::string> chosen;
    for (std::size_t j = 0; j < mask.selected.size(); ++j)
      if (mask.selected[j]) chosen.push_back(mask.col_names[j]);
    o << "\n[selection]\n"
      << "candidates=" << raw.col_names.size() << '\n'
      << "count=" << chosen.size() << '\n'
      << "lambda1=" << format_double(mask.lambda1) << '\n'
      << "lambda2=" << format_double(mask.lambda2) << '\n'
      << "iterations=" << mask.iterations << '\n'
      << "converged=" << (mask.converged ? "true" : "false") << '\n'
      << "age_correction=all_features\n"
      << imputation_summary(wd)
      << "features=";
    for (std::size_t i = 0; i < chosen.size(); ++i) o << (i ? "," : "") << chosen[i];
    o << '\n';

    const auto metrics = read_key_values(wd.metrics());
    std::map<std::string, std::string> m(metrics.begin(), metrics.end());
    o << "\n[metrics]\n";
    for (const auto& [k, v] : metrics) o << k << '=' << v << '\n';

    // Deterministic work counters; wall-clock times live in timing.txt.
    std::ifstream stats(wd.grading_stats());
    if (!stats) throw Error(ErrorCode::MissingFile, wd.grading_stats().string());
    std::string line;
    std::getline(stats, line);
    std::uint64_t subjects = 0, voxels = 0, evaluations = 0, loo = 0;
    while (std::getline(stats, line)) {
      std::istringstream row(line);
      std::string id, vox, ev, lib;
      std::getline(row, id, ',');
      std::getline(row, vox, ',');
      std::getline(row, ev, ',');
      std::getline(row, lib, ',');
      ++subjects;
      voxels += std::stoull(vox);
      evaluations += std::stoull(ev);
      loo += lib == "leave-one-out";
    }
    o << "\n[timing]\n"
      << "subjects_graded=" << subjects << '\n'
      << "subjects_leave_one_out=" << loo << '\n'
      << "graded_voxels=" << voxels << '\n'
      << "distance_evaluations=" << evaluations << '\n'
      << "en_sweeps=" << mask.iterations << '\n'
      << "wall_clock=" << wd.timing().filename().string() << '\n';

    o << "\n[provenance]\n"
      << "version=" << GBSG_VERSION << '\n'
      << "compiler=" << __VERSION__ << '\n'
      << "eigen=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n'
      << "seed.master=" << cfg.seed << '\n'
      << "seed.synth=" << synth_spec(cfg).seed << '\n'
      << "seed.grading=derive(master, grading, subject_id)\n"
      << "seed.svm_cv=" << derive_seed(cfg.seed, {seed_tag("svm-cv")}) << '\n'
      << "seed.rf=" << derive_seed(cfg.seed, {seed_tag("rf")}) << '\n'
      << "manifest.fnv1a=" << file_hash(cfg.manifest) << '\n'
      << "labels=CN:+1,AD:-1,sMCI:+1,pMCI:-1\n"
      << "positive_class=pMCI\n";

    o << "\n[table]\n"
      << pad("Method", 8) << pad("Classifier", 12) << pad("ACC", 16) << pad("SEN", 16) << "SPE\n";
    auto get = [&](const std::string& k) { return parse_double(m.at(k)); };
    if (m.count("svm.acc"))
      o << pad("GBSG", 8) << pad("SVM", 12) << pad(percent(get("svm.acc")), 16) << pad(percent(get("svm.sen")), 16)
        << percent(get("svm.spe")) << '\n';
    if (m.count("rf.acc"))
      o << pad("GBSG", 8) << pad("RF", 12) << pad(percent_sd(get("rf.acc"), get("rf.acc_sd")), 16)
        << pad(percent_sd(get("rf.sen"), get("rf.sen_sd")), 16) << percent_sd(get("rf.spe"), get("rf.spe_sd")) << '\n';

    const std::string text = o.str();
    const fs::path out = cfg.report_path();
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out, std::ios::trunc | std::ios::binary);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + out.string());
    f << text;
    if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + out.string());
    return text;
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage report: ") + e.detail());
  }
}

}  // namespace gbsg::pipeline
