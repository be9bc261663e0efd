// Acceptance checks, one PASS/FAIL line per criterion.
//
//   gbsg_acceptance                 run all
//   gbsg_acceptance --criterion 4   run one
//
// Exit status: 0 when every selected criterion passes, 1 on any failure, 77
// when the only failure is a speedup target this machine lacks the cores for.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "gbsg/classify.hpp"
#include "gbsg/config.hpp"
#include "gbsg/featsel.hpp"
#include "gbsg/pipeline.hpp"
#include "gbsg/synth.hpp"
#include "oracles.hpp"

using namespace gbsg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  bool hardware_limited = false;  // failed only for lack of cores
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// 1. Grading correctness on random 16^3 volumes with 4 templates.
Outcome grading_correctness() {
  Rng rng(101);
  const Dims d{16, 16, 16};
  grading::GradingParams params;  // r=2, s=3, K=50
  double worst = 0.0, graded_seconds = 0.0;
  bool bounded = true, antisymmetric = true;
  for (int c = 0; c < 20; ++c) {
    const auto q = fixture::random_volume(d, rng);
    const auto lib = fixture::random_library(d, 4, rng);
    const auto labels = fixture::full_mask(d);
    const auto t0 = Clock::now();
    const auto map = grading::grade_volume(q, labels, lib, params);
    graded_seconds += seconds_since(t0);
    const auto neg = grading::grade_volume(q, labels, lib.flipped(), params);

    for (const auto v : grading::graded_voxels(labels, params.patch_radius)) {
      const float g = map.grades.data[v];
      bounded = bounded && g >= -1.0f && g <= 1.0f;
      antisymmetric = antisymmetric && neg.grades.data[v] == -g;
      const auto c3 = unravel(d, v);
      const auto nn = oracle::knn(q, c3.x, c3.y, c3.z, lib, params.patch_radius, params.search_window, params.k);
      worst = std::max(worst, std::abs(g - oracle::grade(nn, params.effective_epsilon())));
    }
  }
  return {bounded && antisymmetric && worst <= 1e-6 && graded_seconds < 10.0,
          fmt("bounded=%d antisymmetric=%d max|g-ref|=%.2e grading_time=%.2fs", bounded, antisymmetric, worst,
              graded_seconds)};
}

// 2. knn_exact against an exhaustive scan, tie-heavy cases included.
Outcome knn_oracle() {
  Rng rng(202);
  int mismatches = 0, ties = 0;
  for (int c = 0; c < 50; ++c) {
    // Even cases: two intensity levels, so ties are everywhere. Odd cases:
    // 1024 levels scaled into [0, 1), which keeps every distance exact in
    // double so that summation order cannot matter.
    const int levels = c % 2 == 0 ? 2 : 1024;
    const float scale = c % 2 == 0 ? 1.0f : 1.0f / 1024.0f;
    const Dims d{10, 10, 10};
    auto q = fixture::random_volume(d, rng, true, levels);
    for (auto& x : q.data) x *= scale;
    std::vector<grading::TemplateEntry> entries;
    for (int t = 0; t < 3; ++t) {
      auto v = fixture::random_volume(d, rng, true, levels);
      for (auto& x : v.data) x *= scale;
      entries.push_back({std::move(v), fixture::full_mask(d), t % 2 ? grading::Status::AD : grading::Status::CN});
    }
    const grading::TrainingLibrary lib(std::move(entries));
    grading::GradingParams params;
    params.patch_radius = 1 + static_cast<int>(rng.below(2));
    params.search_window = 1 + static_cast<int>(rng.below(3));
    params.k = 1 + static_cast<int>(rng.below(20));
    const int r = params.patch_radius;
    const Index3 center{static_cast<int>(r + rng.below(10 - 2 * r)), static_cast<int>(r + rng.below(10 - 2 * r)),
                        static_cast<int>(r + rng.below(10 - 2 * r))};
    const auto got = grading::knn_exact(grading::extract_patch(q, center, r), lib, params);
    const auto want = oracle::knn(q, center.x, center.y, center.z, lib, r, params.search_window, params.k);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].distance == want[i].d && got[i].template_index == want[i].t && got[i].voxel == want[i].lin &&
             got[i].status == want[i].status;
      if (i > 0 && want[i].d == want[i - 1].d) ++ties;
    }
    mismatches += !same;
  }
  return {mismatches == 0, fmt("cases=50 mismatches=%d tied_neighbors=%d", mismatches, ties)};
}

// 3. PatchMatch rank-1 agreement with the window covering the whole template.
Outcome patchmatch_quality() {
  Rng rng(303);
  const Dims d{8, 8, 8};
  std::size_t agree = 0, total = 0, invalid = 0, below_exact = 0;
  for (int c = 0; c < 20; ++c) {
    const auto q = fixture::random_volume(d, rng);
    const auto lib = fixture::random_library(d, 4, rng);
    grading::GradingParams params;  // r=2, K=50
    params.search_window = 7;
    params.pm_iterations = 10;
    params.seed = static_cast<std::uint64_t>(c);
    const auto voxels = grading::graded_voxels(fixture::full_mask(d), params.patch_radius);
    params.method = grading::SearchMethod::PatchMatch;
    const auto pm = grading::knn_patchmatch(q, voxels, lib, params);
    params.method = grading::SearchMethod::Exact;
    const auto ex = grading::knn_exact_field(q, voxels, lib, params);
    for (std::size_t i = 0; i < voxels.size(); ++i) {
      const auto& best = pm.neighbors[i].front();
      agree += best.distance == ex.neighbors[i].front().distance;
      below_exact += best.distance < ex.neighbors[i].front().distance;
      ++total;
      const auto qc = unravel(d, voxels[i]);
      for (const auto& n : pm.neighbors[i]) {
        const auto tc = unravel(d, n.voxel);
        const double recomputed = oracle::sum_sq(oracle::cube(q, qc.x, qc.y, qc.z, params.patch_radius),
                                                 oracle::cube(lib[n.template_index].volume, tc.x, tc.y, tc.z,
                                                              params.patch_radius));
        invalid += std::abs(recomputed - n.distance) > 1e-12 * std::max(1.0, recomputed);
      }
    }
  }
  const double rate = double(agree) / double(total);
  return {rate >= 0.95 && invalid == 0 && below_exact == 0,
          fmt("rank1_agreement=%.4f voxels=%zu invalid_distances=%zu better_than_exact=%zu", rate, total, invalid,
              below_exact)};
}

// 4. Wasserstein-1 against a transportation LP, plus metric axioms.
Outcome wasserstein_oracle() {
  Rng rng(404);
  auto random_hist = [&](int max_bins) {
    graph::StructureHistogram h;
    h.masses.resize(1 + rng.below(static_cast<std::uint64_t>(max_bins)));
    for (auto& m : h.masses) m = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    double s = std::accumulate(h.masses.begin(), h.masses.end(), 0.0);
    if (s == 0.0) h.masses[0] = s = 1.0;
    for (auto& m : h.masses) m /= s;
    h.n = 1;
    return h;
  };
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const auto a = random_hist(6), b = random_hist(6);
    const auto bins = static_cast<std::size_t>(std::max(a.bins(), b.bins()));
    const double lp = oracle::transport_lp(oracle::regrid(a.masses, bins), oracle::regrid(b.masses, bins));
    worst = std::max(worst, std::abs(graph::wasserstein1(a, b) - lp));
  }
  int violations = 0;
  for (int c = 0; c < 1000; ++c) {
    // The distance is a metric on histograms sharing one grid.
    const int bins = 1 + static_cast<int>(rng.below(12));
    auto a = random_hist(12), b = random_hist(12), e = random_hist(12);
    a.masses = graph::rebin(a, bins);
    b.masses = graph::rebin(b, bins);
    e.masses = graph::rebin(e, bins);
    const double ab = graph::wasserstein1(a, b), ba = graph::wasserstein1(b, a);
    const double be = graph::wasserstein1(b, e), ae = graph::wasserstein1(a, e);
    double gap = 0.0;
    for (int k = 0; k < bins; ++k) gap = std::max(gap, std::abs(a.masses[k] - b.masses[k]));
    const bool ok = ab >= 0.0 && ab == ba && graph::wasserstein1(a, a) == 0.0 && ae <= ab + be + 1e-12 &&
                    (ab > 0.0 || gap <= 1e-12);
    violations += !ok;
  }
  return {worst <= 1e-9 && violations == 0, fmt("max|W1-LP|=%.2e over 200 pairs, axiom violations=%d/1000", worst,
                                                violations)};
}

// 5. Sturges' rule.
Outcome sturges() {
  Rng rng(505);
  std::vector<std::uint64_t> ns;
  for (std::uint64_t n = 1; n <= 4096; ++n) ns.push_back(n);
  for (int k = 0; k < 20000; ++k) ns.push_back(1 + rng.below(1'000'000));
  for (int k = 1; k <= 20; ++k) {
    ns.push_back(std::uint64_t{1} << k);
    ns.push_back((std::uint64_t{1} << k) + 1);
  }
  ns.push_back(1'000'000);
  std::sort(ns.begin(), ns.end());
  int wrong = 0, non_monotone = 0, prev = 0;
  for (auto n : ns) {
    const int b = graph::sturges_bins(n);
    wrong += b != static_cast<int>(std::ceil(1.0 + std::log2(static_cast<long double>(n))));
    non_monotone += b < prev;
    prev = b;
  }
  return {wrong == 0 && non_monotone == 0,
          fmt("checked=%zu wrong=%d non_monotone=%d B(10^6)=%d", ns.size(), wrong, non_monotone,
              graph::sturges_bins(1'000'000))};
}

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index p, Rng& rng) {
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

// 6. Elastic net.
Outcome elastic_net() {
  Rng rng(606);
  double worst_kkt = 0.0, worst_closed = 0.0;
  int unconverged = 0, increases = 0;
  for (int c = 0; c < 50; ++c) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(46)), p = 1 + static_cast<Eigen::Index>(rng.below(100));
    const Eigen::MatrixXd x = gaussian(n, p, rng);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.uniform() < 0.5 ? 1.0 : -1.0;
    const double l1 = featsel::lambda1_max(x, y) * (0.02 + 0.9 * rng.uniform()), l2 = rng.uniform();
    const auto r = featsel::coordinate_descent(x, y, l1, l2, 100000, 1e-10);
    unconverged += !r.converged;
    worst_kkt = std::max(worst_kkt, featsel::kkt_residual(x, y, r.beta, l1, l2));
    double prev = featsel::elastic_net_objective(x, y, Eigen::VectorXd::Zero(p), l1, l2);
    for (double f : r.objective_trace) {
      increases += f > prev + 1e-14 * std::abs(prev);
      prev = f;
    }
  }
  for (int c = 0; c < 20; ++c) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng.below(20)), p = 1 + static_cast<Eigen::Index>(rng.below(15));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(n, p, rng));
    const Eigen::MatrixXd x = Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(n, p)) *
                              std::sqrt(static_cast<double>(n));
    const Eigen::VectorXd y = gaussian(n, 1, rng);
    const double l1 = 0.3 * rng.uniform(), l2 = rng.uniform();
    const auto r = featsel::coordinate_descent(x, y, l1, l2, 10000, 1e-14);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double z = x.col(j).dot(y) / static_cast<double>(n);
      const double soft = z > l1 ? z - l1 : (z < -l1 ? z + l1 : 0.0);
      worst_closed = std::max(worst_closed, std::abs(r.beta(j) - soft / (1.0 + l2)));
    }
  }
  return {worst_kkt <= 1e-6 && worst_closed <= 1e-8 && increases == 0 && unconverged == 0,
          fmt("max_kkt=%.2e closed_form_err=%.2e objective_increases=%d unconverged=%d", worst_kkt, worst_closed,
              increases, unconverged)};
}

struct Toy {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Toy blobs(int n, int p, double gap, Rng& rng) {
  Toy t{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    t.y(i) = i % 2 ? 1.0 : -1.0;
    for (int j = 0; j < p; ++j) t.x(i, j) = 0.3 * rng.normal();
    t.x(i, 0) += t.y(i) * gap / 2.0;
  }
  return t;
}

double accuracy(const std::vector<int>& pred, const Eigen::VectorXd& y) {
  int ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == (y(static_cast<Eigen::Index>(i)) > 0 ? 1 : -1);
  return double(ok) / double(pred.size());
}

// 7. Linear SVM.
Outcome svm() {
  Rng rng(707);
  double worst_train = 1.0, worst_gap = 0.0;
  for (int c = 0; c < 10; ++c) {
    const auto t = blobs(40, 2 + c % 4, 3.0, rng);
    worst_train = std::min(worst_train, accuracy(classify::svm_predict(classify::svm_train(t.x, t.y, 100.0), t.x), t.y));
  }
  for (int c = 0; c < 25; ++c) {
    const auto t = blobs(3 + static_cast<int>(rng.below(8)), 1 + static_cast<int>(rng.below(3)), rng.uniform(), rng);
    const double cc = std::ldexp(1.0, static_cast<int>(rng.between(-3, 3)));
    const auto m = classify::svm_train(t.x, t.y, cc);
    const auto br = oracle::svm_oracle(t.x, t.y, cc);
    worst_gap = std::max(worst_gap, std::abs(classify::svm_primal(t.x, t.y, m.w, m.b, cc) - br.primal));
  }
  const auto grid = classify::svm_c_grid();
  const std::vector<double> cs{1.0, 2.0};
  const bool tie = classify::pick_best_c(cs, std::vector<double>{0.8, 0.8}) == 0;
  classify::SvmModel zero;
  zero.w = Eigen::VectorXd::Zero(1);
  const bool sign0 = classify::svm_predict(zero, Eigen::MatrixXd::Zero(1, 1)).front() == 1;
  return {worst_train == 1.0 && worst_gap <= 1e-3 && grid.size() == 21 && tie && sign0,
          fmt("separable_train_acc=%.3f max|obj-QP|=%.2e grid=%zu tie_to_smaller=%d sign0=+1:%d", worst_train,
              worst_gap, grid.size(), tie, sign0)};
}

// 8. Random forest.
Outcome forest() {
  const auto t0 = Clock::now();
  Rng rng(808);
  const auto train = blobs(80, 6, 3.0, rng), test = blobs(40, 6, 3.0, rng);
  classify::ForestParams p;  // 500 trees, mtry = ceil(sqrt(p))
  const auto a = classify::rf_train(train.x, train.y, p, 5), b = classify::rf_train(train.x, train.y, p, 5);
  bool same = a.trees.size() == b.trees.size();
  for (std::size_t k = 0; same && k < a.trees.size(); ++k) {
    same = a.trees[k].nodes.size() == b.trees[k].nodes.size();
    for (std::size_t i = 0; same && i < a.trees[k].nodes.size(); ++i) {
      const auto &u = a.trees[k].nodes[i], &v = b.trees[k].nodes[i];
      same = u.feature == v.feature && u.threshold == v.threshold && u.left == v.left && u.right == v.right &&
             u.label == v.label;
    }
  }
  double min_oob = 1.0;
  for (int c = 0; c < 5; ++c) {
    const auto toy = blobs(60, 4, 3.0, rng);
    classify::ForestParams small;
    small.trees = 200;
    min_oob = std::min(min_oob, classify::rf_oob_accuracy(classify::rf_train(toy.x, toy.y, small, c), toy.x, toy.y));
  }
  std::vector<int> truth;
  for (Eigen::Index i = 0; i < test.y.size(); ++i) truth.push_back(test.y(i) > 0 ? 1 : -1);
  const auto rep = classify::repeated_rf_eval(train.x, train.y, test.x, truth, -1, p, 30, 9);
  const double secs = seconds_since(t0);
  const bool reported = rep.runs.size() == 30 && rep.acc_sd >= 0.0 && std::isfinite(rep.mean.acc);
  return {same && min_oob >= 0.9 && reported && secs < 60.0,
          fmt("deterministic=%d min_oob=%.3f runs=%zu acc=%.3f+/-%.3f sen=%.3f spe=%.3f time=%.1fs", same, min_oob,
              rep.runs.size(), rep.mean.acc, rep.acc_sd, rep.mean.sen, rep.mean.spe, secs)};
}

pipeline::PipelineConfig cohort_config(const fs::path& root, std::uint64_t seed, bool null_cohort) {
  auto cfg = pipeline::read_config(fs::path(GBSG_SOURCE_DIR) / "configs" / "synthetic.conf");
  cfg.seed = seed;
  cfg.manifest = root / "cohort" / "manifest.csv";
  cfg.work_dir = root / "work";
  cfg.report.clear();
  if (null_cohort)
    for (auto& [id, offsets] : cfg.synth.perturbation) offsets = {0.0, 0.0, 0.0, 0.0};
  return cfg;
}

pipeline::PipelineResult run_cohort(const pipeline::PipelineConfig& cfg) {
  pipeline::synth_cohort(pipeline::synth_spec(cfg), cfg.manifest.parent_path());
  return pipeline::run_pipeline(cfg);
}

// 9. End-to-end discrimination on the synthetic cohort, and chance on null cohorts.
Outcome end_to_end() {
  const auto t0 = Clock::now();
  fixture::TempDir dir("acceptance-e2e");
  const auto signal = run_cohort(cohort_config(dir / "signal", 1, false));
  const double svm_acc = signal.svm->acc, rf_acc = signal.rf->mean.acc;

  std::vector<double> null_svm, null_rf;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = run_cohort(cohort_config(dir / ("null" + std::to_string(seed)), seed, true));
    null_svm.push_back(r.svm->acc);
    null_rf.push_back(r.rf->mean.acc);
  }
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt("%s%.2f", s.empty() ? "" : ",", x);
    return s;
  };
  const double ms = mean(null_svm), mr = mean(null_rf), secs = seconds_since(t0);
  const bool pass = svm_acc >= 0.9 && rf_acc >= 0.9 && ms >= 0.35 && ms <= 0.65 && mr >= 0.35 && mr <= 0.65 &&
                    secs < 600.0;
  return {pass, fmt("signal svm=%.3f rf=%.3f; null mean svm=%.3f [%s] rf=%.3f [%s]; time=%.0fs", svm_acc, rf_acc, ms,
                    list(null_svm).c_str(), mr, list(null_rf).c_str(), secs)};
}

// 10. Grading performance at 64^3 with 10 templates, K=50, r=2, s=3.
Outcome performance() {
  pipeline::BenchSpec spec;  // 64^3, 10 templates, K=50, r=2, s=3
  spec.seed = 1;
  spec.threads = {1};
  const auto serial = pipeline::benchmark_grading(spec);
  const double exact1 = serial[0].seconds, pm1 = serial[1].seconds;

  spec.threads = {4};
  const auto four = pipeline::benchmark_grading(spec);
  const double exact4 = four[0].seconds;
  const bool identical = four[0].output_hash == serial[0].output_hash && four[1].output_hash == serial[1].output_hash;
  const double speedup = exact1 / exact4;
  const int cores = omp_get_num_procs();

  const bool timing_ok = pm1 <= 60.0 && pm1 <= exact1 && identical;
  Outcome o;
  o.pass = timing_ok && speedup >= 3.0;
  o.hardware_limited = timing_ok && !o.pass && cores < 4;
  o.detail = fmt("patchmatch_1t=%.1fs exact_1t=%.1fs exact_4t=%.1fs speedup_4t=%.2fx hashes_identical_1t_4t=%d cores=%d",
                 pm1, exact1, exact4, speedup, identical, cores);
  if (o.hardware_limited) o.detail += " (4-worker speedup needs at least 4 cores)";
  return o;
}

// 11. No sMCI/pMCI row reaches a fit; two runs give identical report bytes.
Outcome hygiene() {
  fixture::TempDir dir("acceptance-hygiene");
  auto cfg = cohort_config(dir.path(), 3, false);
  cfg.synth.dims = {20, 20, 20};
  cfg.synth.structures = 8;
  cfg.synth.counts = {10, 6, 6, 10};
  cfg.forest.trees = 50;
  cfg.rf_runs = 5;
  cfg.en.target_nonzeros = 8;
  run_cohort(cfg);
  const auto first = slurp(cfg.report_path());

  const auto cohort = read_manifest(cfg.manifest);
  int leaked = 0, fits = 0;
  for (const auto& f : pipeline::read_fit_log(pipeline::WorkDir{cfg.work_dir}.fits())) {
    ++fits;
    for (const auto& id : f.subject_ids) {
      const auto* r = cohort.find(id);
      leaked += r == nullptr || !is_training_group(r->group);
    }
  }
  bool guarded = false;
  try {
    featsel::TrainingRows(featsel::FeatureMatrix{Eigen::MatrixXd::Zero(1, 1), {"x"}, {"V:1"}}, {Group::pMCI}, {70.0});
  } catch (const Error& e) {
    guarded = e.code() == ErrorCode::LeakedTestRow;
  }

  fs::remove_all(cfg.work_dir);
  pipeline::run_pipeline(cfg);
  const bool identical = slurp(cfg.report_path()) == first && !first.empty();
  return {leaked == 0 && fits >= 6 && guarded && identical,
          fmt("fit_records=%d leaked_rows=%d interface_guard=%d identical_reports=%d report_bytes=%zu", fits, leaked,
              guarded, identical, first.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"grading correctness", grading_correctness}, {"knn oracle", knn_oracle},
      {"patchmatch quality", patchmatch_quality},   {"wasserstein oracle", wasserstein_oracle},
      {"sturges", sturges},                         {"elastic net", elastic_net},
      {"svm", svm},                                 {"random forest", forest},
      {"end-to-end synthetic", end_to_end},         {"performance", performance},
      {"hygiene", hygiene}};

  bool failed = false, limited = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu (%s): %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) (o.hardware_limited ? limited : failed) = true;
  }
  if (failed) return 1;
  return limited ? 77 : 0;
}
