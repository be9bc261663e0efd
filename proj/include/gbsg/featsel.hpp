#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbsg/volio.hpp"

namespace gbsg::featsel {

/// Subjects x features, columns in canonical order.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> subject_ids;
  std::vector<std::string> col_names;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  FeatureMatrix subset_rows(std::span<const std::size_t> rows) const;

  FeatureTable to_table() const;
  static FeatureMatrix from_table(const FeatureTable& t);
};

/// The only rows a fitting routine may see: CN and AD subjects. Construction
/// fails with LeakedTestRow if an sMCI or pMCI row is passed in.
class TrainingRows {
 public:
  TrainingRows(FeatureMatrix x, std::vector<Group> groups, std::vector<double> ages);

  /// Picks the CN/AD rows out of a full cohort matrix.
  static TrainingRows select(const FeatureMatrix& all, std::span<const Group> groups, std::span<const double> ages);

  const FeatureMatrix& matrix() const { return x_; }
  const std::vector<Group>& groups() const { return groups_; }
  const std::vector<double>& ages() const { return ages_; }
  std::size_t size() const { return groups_.size(); }

  TrainingRows only(Group g) const;
  TrainingRows with_matrix(FeatureMatrix x) const;
  /// CN -> +1, AD -> -1, matching the template votes.
  Eigen::VectorXd labels() const;

 private:
  FeatureMatrix x_;
  std::vector<Group> groups_;
  std::vector<double> ages_;
};

struct AgeModel {
  Eigen::VectorXd intercept;
  Eigen::VectorXd slope;
  Eigen::VectorXd cn_mean;
};

/// Per-feature OLS of feature on age over CN subjects.
AgeModel fit_age_correction(const TrainingRows& cn);
/// x - (b0 + b1 * age) + cn_mean per feature.
FeatureMatrix apply_age_correction(const FeatureMatrix& x, std::span<const double> ages, const AgeModel& m);

struct ZScoreModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // sample sd, n - 1 denominator
  std::vector<bool> constant;
};

inline constexpr double kConstantFeatureSd = 1e-12;

ZScoreModel zscore_fit(const TrainingRows& train);
/// Constant features map to 0.
FeatureMatrix zscore_apply(const FeatureMatrix& x, const ZScoreModel& m);

struct ElasticNetParams {
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  int max_iterations = 100000;
  double tolerance = 1e-10;
  std::optional<int> target_nonzeros = 50;
  void validate() const;
};

/// Coordinate descent on (1/2n)||y - X b||^2 + l1 ||b||_1 + (l2/2) ||b||^2,
/// coordinates swept in column order.
struct CoordinateDescentResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each sweep
};

CoordinateDescentResult coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda1,
                                           double lambda2, int max_iterations, double tolerance,
                                           const Eigen::VectorXd* warm_start = nullptr);

double elastic_net_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                             double lambda1, double lambda2);
/// Largest violation of the subgradient optimality conditions.
double kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double lambda1,
                    double lambda2);
/// Smallest lambda1 at which every coefficient is zero: max_j |x_j^T y| / n.
double lambda1_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct SelectionMask {
  std::vector<bool> selected;
  Eigen::VectorXd coefficients;
  std::vector<std::string> col_names;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int iterations = 0;
  bool converged = false;

  std::size_t count() const;
};

/// Fits on z-scored training rows with labels CN = +1, AD = -1.
SelectionMask elastic_net_fit(const TrainingRows& train, const ElasticNetParams& p);
/// Same on a raw design; throws SingleClass unless y holds both -1 and +1.
SelectionMask elastic_net_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ElasticNetParams& p);

FeatureMatrix select_features(const FeatureMatrix& x, const SelectionMask& mask);

/// One `name,coefficient` line per selected feature, canonical order.
void write_selection(const SelectionMask& mask, const std::filesystem::path& path);
/// Rebuilds a mask over `all_names` from a selection file.
SelectionMask read_selection(const std::filesystem::path& path, std::span<const std::string> all_names);

void write_age_model(const AgeModel& m, std::span<const std::string> names, const std::filesystem::path& path);
AgeModel read_age_model(const std::filesystem::path& path);
void write_zscore_model(const ZScoreModel& m, std::span<const std::string> names, const std::filesystem::path& path);
ZScoreModel read_zscore_model(const std::filesystem::path& path);

}  // namespace gbsg::featsel
