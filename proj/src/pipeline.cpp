#include "gbsg/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gbsg/brain_graph.hpp"
#include "gbsg/error.hpp"
#include "gbsg/rng.hpp"
#include "gbsg/volio.hpp"

namespace gbsg::pipeline {

namespace fs = std::filesystem;

namespace {

template <class F>
auto in_stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.detail());
  }
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + p.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return f;
}

// Runs body(i) for i in [0, n) over subjects; the first failure (by index) is rethrown.
template <class F>
void for_each_subject(std::size_t n, int threads, F&& body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

int resolve_threads(const grading::ExecOptions& exec) { return exec.threads > 0 ? exec.threads : omp_get_max_threads(); }

grading::Status status_of(Group g) {
  if (g == Group::CN) return grading::Status::CN;
  if (g == Group::AD) return grading::Status::AD;
  throw Error(ErrorCode::InvalidParams, "template subjects must be CN or AD, got " + to_string(g));
}

// Labels for the test partition: sMCI on the CN side (+1), pMCI on the AD side (-1).
int test_label(Group g) { return g == Group::pMCI ? -1 : 1; }
constexpr int kPositive = -1;

std::uint64_t subject_seed(std::uint64_t master, const std::string& id) {
  return derive_seed(master, {seed_tag("grading"), seed_tag(id.c_str())});
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

void log_fit(const WorkDir& wd, const std::string& stage, const std::vector<std::string>& ids, bool truncate) {
  std::ofstream f(wd.fits(), truncate ? std::ios::trunc : std::ios::app);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + wd.fits().string());
  f << stage << ':' << join(ids, ',') << '\n';
}

struct CohortFeatures {
  Cohort cohort;
  featsel::FeatureMatrix x;
  std::vector<Group> groups;
  std::vector<double> ages;
};

CohortFeatures load_features(const PipelineConfig& cfg, const fs::path& table) {
  CohortFeatures cf;
  cf.cohort = read_manifest(cfg.manifest, false);
  cf.x = featsel::FeatureMatrix::from_table(read_feature_table(table));
  if (cf.x.subject_ids.size() != cf.cohort.records.size())
    throw Error(ErrorCode::LengthMismatch, "feature table rows differ from the manifest");
  for (std::size_t i = 0; i < cf.cohort.records.size(); ++i) {
    if (cf.x.subject_ids[i] != cf.cohort.records[i].subject_id)
      throw Error(ErrorCode::LengthMismatch, "feature table row " + std::to_string(i) + " is not " +
                                                 cf.cohort.records[i].subject_id);
    cf.groups.push_back(cf.cohort.records[i].group);
    cf.ages.push_back(cf.cohort.records[i].age);
  }
  return cf;
}

struct TestRows {
  Eigen::MatrixXd x;
  std::vector<int> truth;
  std::vector<std::string> ids;
};

TestRows test_rows(const CohortFeatures& cf) {
  std::vector<std::size_t> keep;
  TestRows t;
  for (std::size_t i = 0; i < cf.groups.size(); ++i)
    if (!is_training_group(cf.groups[i])) {
      keep.push_back(i);
      t.truth.push_back(test_label(cf.groups[i]));
      t.ids.push_back(cf.x.subject_ids[i]);
    }
  if (keep.empty()) throw Error(ErrorCode::TooFewSubjects, "cohort has no sMCI or pMCI subjects");
  t.x = cf.x.subset_rows(keep).values;
  return t;
}

std::uint64_t svm_cv_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, {seed_tag("svm-cv")}); }
std::uint64_t rf_master_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, {seed_tag("rf")}); }

bool wants_svm(const PipelineConfig& cfg) { return cfg.classifier != ClassifierKind::Rf; }
bool wants_rf(const PipelineConfig& cfg) { return cfg.classifier != ClassifierKind::Svm; }

}  // namespace

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001b3ULL;
  return h;
}

void write_key_values(const KeyValues& kv, const fs::path& path) {
  auto f = open_out(path);
  for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
  if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  KeyValues out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ModelFormat, "malformed line in " + path.string());
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

std::vector<FitRecord> read_fit_log(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  std::vector<FitRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    FitRecord r;
    r.stage = line.substr(0, colon);
    std::istringstream ids(line.substr(colon + 1));
    std::string id;
    while (std::getline(ids, id, ',')) r.subject_ids.push_back(id);
    out.push_back(std::move(r));
  }
  return out;
}

void stage_grade(const PipelineConfig& cfg, const grading::ExecOptions& exec) {
  in_stage("grade", [&] {
    cfg.validate(true);
    const WorkDir wd{cfg.work_dir};
    ensure_dir(wd.root / "grades");
    const Cohort cohort = read_manifest(cfg.manifest);
    const Cohort library_cohort = cfg.templates.empty() ? cohort : read_manifest(cfg.templates);

    std::vector<grading::TemplateEntry> entries;
    std::map<std::string, std::size_t> template_index;
    for (const auto& r : library_cohort.records) {
      if (!is_training_group(r.group)) {
        if (cfg.templates.empty()) continue;
        throw Error(ErrorCode::InvalidParams, "template " + r.subject_id + " is " + to_string(r.group));
      }
      grading::TemplateEntry e{read_volume(r.volume_path), read_labelmap(r.label_path), status_of(r.group)};
      validate_pair(e.volume, e.labels);
      template_index[r.subject_id] = entries.size();
      entries.push_back(std::move(e));
    }
    const grading::TrainingLibrary library(std::move(entries));

    std::vector<std::uint64_t> evaluations(cohort.records.size());
    std::vector<std::size_t> voxels(cohort.records.size());
    for_each_subject(cohort.records.size(), resolve_threads(exec), [&](std::size_t i) {
      const auto& r = cohort.records[i];
      const Volume3D vol = read_volume(r.volume_path);
      const LabelMap labels = read_labelmap(r.label_path);
      validate_pair(vol, labels);
      grading::GradingParams params = cfg.grading;
      params.seed = subject_seed(cfg.seed, r.subject_id);
      const auto it = template_index.find(r.subject_id);
      const auto map = it == template_index.end()
                           ? grading::grade_volume(vol, labels, library, params, {1})
                           : grading::grade_volume(vol, labels, library.without(it->second), params, {1});
      write_volume(map.grades, wd.grade(r.subject_id));
      evaluations[i] = map.distance_evaluations;
      voxels[i] = static_cast<std::size_t>(std::count(map.mask.labels.begin(), map.mask.labels.end(), 1u));
    });

    auto f = open_out(wd.grading_stats());
    f << "subject_id,graded_voxels,distance_evaluations,library\n";
    for (std::size_t i = 0; i < cohort.records.size(); ++i) {
      const bool loo = template_index.count(cohort.records[i].subject_id) > 0;
      f << cohort.records[i].subject_id << ',' << voxels[i] << ',' << evaluations[i] << ','
        << (loo ? "leave-one-out" : "full") << '\n';
    }
    // The grading library is built from CN/AD rows only.
    std::vector<std::string> lib_ids;
    for (const auto& [id, _] : template_index) lib_ids.push_back(id);
    std::sort(lib_ids.begin(), lib_ids.end());
    log_fit(wd, "grading_library", lib_ids, true);
  });
}

void stage_graph(const PipelineConfig& cfg, const grading::ExecOptions& exec) {
  in_stage("graph", [&] {
    cfg.validate(true);
    const WorkDir wd{cfg.work_dir};
    ensure_dir(wd.root / "graphs");
    const Cohort cohort = read_manifest(cfg.manifest);
    for_each_subject(cohort.records.size(), resolve_threads(exec), [&](std::size_t i) {
      const auto& r = cohort.records[i];
      grading::GradingMap map;
      map.grades = read_volume(wd.grade(r.subject_id));
      const LabelMap labels = read_labelmap(r.label_path);
      validate_pair(map.grades, labels);
      map.mask = LabelMap(labels.dims, labels.spacing);
      for (std::size_t v = 0; v < map.grades.data.size(); ++v) map.mask.labels[v] = map.grades.data[v] != grading::kUngraded;
      graph::write_graph_csv(graph::build_graph(map, labels, cfg.graph), wd.graph(r.subject_id));
    });
  });
}

void stage_features(const PipelineConfig& cfg) {
  in_stage("features", [&] {
    cfg.validate(true);
    const WorkDir wd{cfg.work_dir};
    const Cohort cohort = read_manifest(cfg.manifest);
    const std::size_t n = cohort.records.size();

    std::vector<graph::BrainGraph> graphs;
    for (const auto& r : cohort.records) graphs.push_back(graph::read_graph_csv(wd.graph(r.subject_id)));

    // Canonical structure list from the training partition.
    std::set<graph::StructureId> canon_set;
    for (std::size_t i = 0; i < n; ++i)
      if (is_training_group(cohort.records[i].group)) {
        canon_set.insert(graphs[i].structure_ids.begin(), graphs[i].structure_ids.end());
        canon_set.insert(graphs[i].dropped.begin(), graphs[i].dropped.end());
      }
    const std::vector<graph::StructureId> canon(canon_set.begin(), canon_set.end());
    const auto names = graph::feature_names(canon);

    featsel::FeatureMatrix raw;
    raw.col_names = names;
    raw.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
    std::vector<Group> groups;
    std::vector<double> ages;
    std::ofstream imputation(wd.imputation(), std::ios::trunc);
    if (!imputation) throw Error(ErrorCode::IoFailure, "cannot write " + wd.imputation().string());
    imputation << "subject_id,missing_structures,imputed_entries\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto fv = graph::graph_to_features(graphs[i], canon);
      const auto imputed = std::count(fv.imputed.begin(), fv.imputed.end(), true);
      if (imputed > 0) {
        std::string missing;
        for (auto id : canon)
          if (!std::binary_search(graphs[i].structure_ids.begin(), graphs[i].structure_ids.end(), id))
            missing += (missing.empty() ? "" : " ") + std::to_string(id);
        imputation << cohort.records[i].subject_id << ',' << missing << ',' << imputed << '\n';
      }
      for (std::size_t j = 0; j < fv.values.size(); ++j)
        raw.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fv.values[j];
      raw.subject_ids.push_back(cohort.records[i].subject_id);
      groups.push_back(cohort.records[i].group);
      ages.push_back(cohort.records[i].age);
    }
    write_feature_table(raw.to_table(), wd.features_raw());

    const auto train_ids = featsel::TrainingRows::select(raw, groups, ages).matrix().subject_ids;
    // Missing edges take the training-partition mean of their column.
    {
      const auto train = featsel::TrainingRows::select(raw, groups, ages);
      const auto& tx = train.matrix().values;
      for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < tx.rows(); ++i)
          if (!std::isnan(tx(i, j))) {
            sum += tx(i, j);
            ++count;
          }
        const double fill = count ? sum / count : 0.0;
        for (Eigen::Index i = 0; i < raw.rows(); ++i)
          if (std::isnan(raw.values(i, j))) raw.values(i, j) = fill;
      }
      log_fit(wd, "impute", train_ids, false);
    }

    const auto cn = featsel::TrainingRows::select(raw, groups, ages).only(Group::CN);
    const auto age_model = featsel::fit_age_correction(cn);
    log_fit(wd, "age_correction", cn.matrix().subject_ids, false);
    const auto corrected = featsel::apply_age_correction(raw, ages, age_model);

    const auto z_train = featsel::TrainingRows::select(corrected, groups, ages);
    const auto z_model = featsel::zscore_fit(z_train);
    log_fit(wd, "zscore", z_train.matrix().subject_ids, false);
    const auto z = featsel::zscore_apply(corrected, z_model);

    const auto en_train = featsel::TrainingRows::select(z, groups, ages);
    const auto mask = featsel::elastic_net_fit(en_train, cfg.en);
    log_fit(wd, "elastic_net", en_train.matrix().subject_ids, false);

    featsel::write_age_model(age_model, names, wd.age_model());
    featsel::write_zscore_model(z_model, names, wd.zscore_model());
    featsel::write_selection(mask, wd.selection());
    write_feature_table(featsel::select_features(z, mask).to_table(), wd.features());
  });
}

void stage_train(const PipelineConfig& cfg) {
  in_stage("train", [&] {
    cfg.validate(true);
    const WorkDir wd{cfg.work_dir};
    const auto cf = load_features(cfg, wd.features());
    const auto train = featsel::TrainingRows::select(cf.x, cf.groups, cf.ages);
    const Eigen::MatrixXd& x = train.matrix().values;
    const Eigen::VectorXd y = train.labels();

    if (wants_svm(cfg)) {
      const auto grid = classify::svm_grid_search(x, y, svm_cv_seed(cfg), cfg.cv_folds);
      log_fit(wd, "svm", train.matrix().subject_ids, false);
      classify::write_svm(grid.model, wd.svm());
      KeyValues cv;
      for (std::size_t i = 0; i < grid.cs.size(); ++i) cv.emplace_back(format_double(grid.cs[i]), format_double(grid.cv_accuracy[i]));
      write_key_values(cv, wd.svm_cv());
    }
    if (wants_rf(cfg)) {
      std::vector<classify::ForestModel> forests;
      for (int r = 0; r < cfg.rf_runs; ++r)
        forests.push_back(classify::rf_train(x, y, cfg.forest, classify::rf_run_seed(rf_master_seed(cfg), r)));
      log_fit(wd, "random_forest", train.matrix().subject_ids, false);
      classify::write_forests(forests, wd.forests());
    }
  });
}

void stage_eval(const PipelineConfig& cfg) {
  in_stage("eval", [&] {
    cfg.validate(true);
    const WorkDir wd{cfg.work_dir};
    const auto cf = load_features(cfg, wd.features());
    const auto test = test_rows(cf);
    KeyValues kv;
    kv.emplace_back("test.subjects", std::to_string(test.truth.size()));
    kv.emplace_back("test.positive", "pMCI");
    std::vector<std::vector<int>> pred_columns;
    std::vector<std::string> pred_names;

    auto put_metrics = [&](const std::string& prefix, const classify::Metrics& m) {
      kv.emplace_back(prefix + ".acc", format_double(m.acc));
      kv.emplace_back(prefix + ".sen", format_double(m.sen));
      kv.emplace_back(prefix + ".spe", format_double(m.spe));
    };
    if (wants_svm(cfg)) {
      const auto model = classify::read_svm(wd.svm());
      const auto pred = classify::svm_predict(model, test.x);
      const auto m = classify::evaluate(pred, test.truth, kPositive);
      kv.emplace_back("svm.c", format_double(model.c));
      kv.emplace_back("svm.converged", model.converged ? "true" : "false");
      put_metrics("svm", m);
      kv.emplace_back("svm.tp", std::to_string(m.counts.tp));
      kv.emplace_back("svm.fp", std::to_string(m.counts.fp));
      kv.emplace_back("svm.tn", std::to_string(m.counts.tn));
      kv.emplace_back("svm.fn", std::to_string(m.counts.fn));
      pred_columns.push_back(pred);
      pred_names.push_back("svm");
    }
    if (wants_rf(cfg)) {
      const auto forests = classify::read_forests(wd.forests());
      std::vector<classify::Metrics> runs;
      std::vector<int> votes(test.truth.size(), 0);
      for (const auto& f : forests) {
        const auto pred = classify::rf_predict(f, test.x);
        for (std::size_t i = 0; i < pred.size(); ++i) votes[i] += pred[i];
        runs.push_back(classify::evaluate(pred, test.truth, kPositive));
      }
      {
        auto out = open_out(wd.rf_runs());
        out << "run,seed,acc,sen,spe,tp,fp,tn,fn\n";
        for (std::size_t r = 0; r < runs.size(); ++r) {
          const auto& m = runs[r];
          out << r << ',' << forests[r].seed << ',' << format_double(m.acc) << ',' << format_double(m.sen) << ','
              << format_double(m.spe) << ',' << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.tn << ','
              << m.counts.fn << '\n';
        }
      }
      const auto rep = classify::summarize(std::move(runs));
      kv.emplace_back("rf.runs", std::to_string(rep.runs.size()));
      put_metrics("rf", rep.mean);
      kv.emplace_back("rf.acc_sd", format_double(rep.acc_sd));
      kv.emplace_back("rf.sen_sd", format_double(rep.sen_sd));
      kv.emplace_back("rf.spe_sd", format_double(rep.spe_sd));
      std::vector<int> majority(votes.size());
      for (std::size_t i = 0; i < votes.size(); ++i) majority[i] = votes[i] >= 0 ? 1 : -1;
      pred_columns.push_back(majority);
      pred_names.push_back("rf_majority");
    }
    write_key_values(kv, wd.metrics());

    auto f = open_out(wd.predictions());
    f << "subject_id,truth";
    for (const auto& n : pred_names) f << ',' << n;
    f << '\n';
    for (std::size_t i = 0; i < test.ids.size(); ++i) {
      f << test.ids[i] << ',' << (test.truth[i] == kPositive ? "pMCI" : "sMCI");
      for (const auto& col : pred_columns) f << ',' << (col[i] == kPositive ? "pMCI" : "sMCI");
      f << '\n';
    }
  });
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const grading::ExecOptions& exec) {
  cfg.validate(true);
  ensure_dir(cfg.work_dir);
  PipelineResult result;
  auto timed = [&](const char* name, auto&& stage) {
    const auto t0 = std::chrono::steady_clock::now();
    stage();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    result.stage_seconds.emplace_back(name, format_double(dt.count()));
  };
  timed("grade", [&] { stage_grade(cfg, exec); });
  timed("graph", [&] { stage_graph(cfg, exec); });
  timed("features", [&] { stage_features(cfg); });
  timed("train", [&] { stage_train(cfg); });
  timed("eval", [&] { stage_eval(cfg); });
  timed("report", [&] { result.report = stage_report(cfg); });
  write_key_values(result.stage_seconds, WorkDir{cfg.work_dir}.timing());

  const WorkDir wd{cfg.work_dir};
  const auto raw = read_feature_table(wd.features_raw());
  result.selection = featsel::read_selection(wd.selection(), raw.col_names);
  result.fits = read_fit_log(wd.fits());
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : read_key_values(wd.metrics())) m[k] = v;
  if (wants_svm(cfg)) {
    result.svm = classify::Metrics{parse_double(m.at("svm.acc")), parse_double(m.at("svm.sen")),
                                   parse_double(m.at("svm.spe")),
                                   {std::stoi(m.at("svm.tp")), std::stoi(m.at("svm.fp")), std::stoi(m.at("svm.tn")),
                                    std::stoi(m.at("svm.fn"))}};
  }
  if (wants_rf(cfg)) {
    std::ifstream f(wd.rf_runs());
    if (!f) throw Error(ErrorCode::MissingFile, wd.rf_runs().string());
    std::string line;
    std::getline(f, line);
    std::vector<classify::Metrics> runs;
    while (std::getline(f, line)) {
      std::vector<std::string> c;
      std::istringstream row(line);
      for (std::string cell; std::getline(row, cell, ',');) c.push_back(cell);
      if (c.size() != 9) throw Error(ErrorCode::HeaderMismatch, "malformed line in " + wd.rf_runs().string());
      runs.push_back({parse_double(c[2]), parse_double(c[3]), parse_double(c[4]),
                      {std::stoi(c[5]), std::stoi(c[6]), std::stoi(c[7]), std::stoi(c[8])}});
    }
    result.rf = classify::summarize(std::move(runs));
  }
  return result;
}

}  // namespace gbsg::pipeline
