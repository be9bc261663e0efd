#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gbsg::classify {

// Labels are +1 (CN side) and -1 (AD side) throughout.

struct SvmModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double c = 1.0;
  double primal = 0.0;
  double dual = 0.0;
  int iterations = 0;
  bool converged = false;

  double duality_gap() const { return primal - dual; }
};

struct SvmOptions {
  double gap_tolerance = 1e-4;  // relative to max(1, primal)
  long max_iterations = 10'000'000;
};

/// Soft-margin linear SVM solved in the dual with SMO (second-order working
/// set selection); the bias is then set to minimize the primal exactly.
SvmModel svm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c, const SvmOptions& opt = {});

/// (1/2)||w||^2 + C * sum hinge(y (w.x + b)).
double svm_primal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b, double c);

/// C = 2^i for i = -10..10.
std::vector<double> svm_c_grid();

struct GridSearchResult {
  double best_c = 1.0;
  SvmModel model;
  std::vector<double> cs;
  std::vector<double> cv_accuracy;
};

/// Stratified k-fold CV over svm_c_grid(); best mean accuracy wins, ties go
/// to the smaller C; the winner is refit on all rows.
GridSearchResult svm_grid_search(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed,
                                 int folds = 5);
/// Picks the winning index given per-C accuracies (ties -> smallest C).
std::size_t pick_best_c(std::span<const double> cs, std::span<const double> accuracy);

Eigen::VectorXd svm_margins(const SvmModel& m, const Eigen::MatrixXd& x);
/// sign(w.x + b), with sign(0) = +1.
std::vector<int> svm_predict(const SvmModel& m, const Eigen::MatrixXd& x);

struct ForestParams {
  int trees = 500;
  int mtry = 0;       // 0: ceil(sqrt(p))
  int min_leaf = 1;
  int max_depth = 0;  // 0: unlimited
  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 1;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::uint32_t> out_of_bag;  // training rows absent from the bootstrap sample

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestParams params;
  std::uint64_t seed = 0;
  int features = 0;
};

ForestModel rf_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
                     std::uint64_t seed);
/// Majority vote; ties -> +1.
std::vector<int> rf_predict(const ForestModel& m, const Eigen::MatrixXd& x);
double rf_oob_accuracy(const ForestModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct Confusion {
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Metrics {
  double acc = 0.0, sen = 0.0, spe = 0.0;
  Confusion counts;
};

/// Metrics with `positive` as the positive label.
Metrics evaluate(std::span<const int> predictions, std::span<const int> truth, int positive);

struct EvalReport {
  std::vector<Metrics> runs;
  Metrics mean;
  double acc_sd = 0.0, sen_sd = 0.0, spe_sd = 0.0;  // sample sd, 0 for one run
};

EvalReport summarize(std::vector<Metrics> runs);

/// `runs` forests with seeds derived from master_seed, each trained on the
/// training rows and scored on the test rows.
EvalReport repeated_rf_eval(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                            const Eigen::MatrixXd& x_test, std::span<const int> y_test, int positive,
                            const ForestParams& params, int runs, std::uint64_t master_seed,
                            std::vector<ForestModel>* forests = nullptr);

std::uint64_t rf_run_seed(std::uint64_t master_seed, int run);

void write_svm(const SvmModel& m, const std::filesystem::path& path);
SvmModel read_svm(const std::filesystem::path& path);
void write_forests(std::span<const ForestModel> forests, const std::filesystem::path& path);
std::vector<ForestModel> read_forests(const std::filesystem::path& path);

}  // namespace gbsg::classify
