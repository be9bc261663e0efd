#include "gbsg/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gbsg/error.hpp"

namespace gbsg::featsel {

FeatureMatrix FeatureMatrix::subset_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.col_names = col_names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
    out.subject_ids.push_back(subject_ids[rows[i]]);
  }
  return out;
}

FeatureTable FeatureMatrix::to_table() const {
  FeatureTable t;
  t.subject_ids = subject_ids;
  t.col_names = col_names;
  t.values.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) t.values.push_back(values(i, j));
  return t;
}

FeatureMatrix FeatureMatrix::from_table(const FeatureTable& t) {
  FeatureMatrix m;
  m.subject_ids = t.subject_ids;
  m.col_names = t.col_names;
  const auto rows = static_cast<Eigen::Index>(t.subject_ids.size());
  const auto cols = static_cast<Eigen::Index>(t.col_names.size());
  m.values.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m.values(i, j) = t.values[static_cast<std::size_t>(i * cols + j)];
  return m;
}

TrainingRows::TrainingRows(FeatureMatrix x, std::vector<Group> groups, std::vector<double> ages)
    : x_(std::move(x)), groups_(std::move(groups)), ages_(std::move(ages)) {
  if (static_cast<std::size_t>(x_.rows()) != groups_.size() || groups_.size() != ages_.size())
    throw Error(ErrorCode::LengthMismatch, "training rows, groups and ages differ in length");
  for (std::size_t i = 0; i < groups_.size(); ++i)
    if (!is_training_group(groups_[i]))
      throw Error(ErrorCode::LeakedTestRow, "subject " + (i < x_.subject_ids.size() ? x_.subject_ids[i] : "?") +
                                                " (" + to_string(groups_[i]) + ") passed to a fitting routine");
}

TrainingRows TrainingRows::select(const FeatureMatrix& all, std::span<const Group> groups,
                                  std::span<const double> ages) {
  if (groups.size() != static_cast<std::size_t>(all.rows()) || ages.size() != groups.size())
    throw Error(ErrorCode::LengthMismatch, "cohort metadata does not match feature rows");
  std::vector<std::size_t> keep;
  std::vector<Group> g;
  std::vector<double> a;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (is_training_group(groups[i])) {
      keep.push_back(i);
      g.push_back(groups[i]);
      a.push_back(ages[i]);
    }
  return TrainingRows(all.subset_rows(keep), std::move(g), std::move(a));
}

TrainingRows TrainingRows::only(Group group) const {
  std::vector<std::size_t> keep;
  std::vector<Group> g;
  std::vector<double> a;
  for (std::size_t i = 0; i < groups_.size(); ++i)
    if (groups_[i] == group) {
      keep.push_back(i);
      g.push_back(groups_[i]);
      a.push_back(ages_[i]);
    }
  return TrainingRows(x_.subset_rows(keep), std::move(g), std::move(a));
}

TrainingRows TrainingRows::with_matrix(FeatureMatrix x) const { return TrainingRows(std::move(x), groups_, ages_); }

Eigen::VectorXd TrainingRows::labels() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(groups_.size()));
  for (std::size_t i = 0; i < groups_.size(); ++i) y(static_cast<Eigen::Index>(i)) = groups_[i] == Group::CN ? 1.0 : -1.0;
  return y;
}

AgeModel fit_age_correction(const TrainingRows& cn) {
  for (auto g : cn.groups())
    if (g != Group::CN) throw Error(ErrorCode::InvalidParams, "age model must be fit on CN subjects only");
  const auto n = static_cast<Eigen::Index>(cn.size());
  if (n < 3) throw Error(ErrorCode::TooFewSubjects, "age correction needs at least 3 CN subjects");
  const Eigen::Map<const Eigen::VectorXd> ages(cn.ages().data(), n);
  const double age_mean = ages.mean();
  const Eigen::VectorXd centered = ages.array() - age_mean;
  const double sxx = centered.squaredNorm();
  if (!(sxx > 0.0)) throw Error(ErrorCode::ConstantAges, "CN ages have zero variance");

  const Eigen::MatrixXd& x = cn.matrix().values;
  AgeModel m;
  m.cn_mean = x.colwise().mean().transpose();
  m.slope.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) m.slope(j) = centered.dot(x.col(j)) / sxx;
  m.intercept = m.cn_mean - m.slope * age_mean;
  return m;
}

FeatureMatrix apply_age_correction(const FeatureMatrix& x, std::span<const double> ages, const AgeModel& m) {
  if (ages.size() != static_cast<std::size_t>(x.rows())) throw Error(ErrorCode::LengthMismatch, "ages vs rows");
  if (m.slope.size() != x.cols()) throw Error(ErrorCode::DimensionMismatch, "age model width differs from features");
  FeatureMatrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double age = ages[static_cast<std::size_t>(i)];
    out.values.row(i) = (x.values.row(i).transpose() - (m.intercept + m.slope * age) + m.cn_mean).transpose();
  }
  return out;
}

ZScoreModel zscore_fit(const TrainingRows& train) {
  const Eigen::MatrixXd& x = train.matrix().values;
  if (x.rows() < 2) throw Error(ErrorCode::TooFewSubjects, "z-score needs at least 2 training rows");
  ZScoreModel m;
  m.mean = x.colwise().mean().transpose();
  m.sd.resize(x.cols());
  m.constant.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - m.mean(j)).square().sum();
    m.sd(j) = std::sqrt(ss / static_cast<double>(x.rows() - 1));
    m.constant[static_cast<std::size_t>(j)] = m.sd(j) < kConstantFeatureSd;
  }
  return m;
}

FeatureMatrix zscore_apply(const FeatureMatrix& x, const ZScoreModel& m) {
  if (m.mean.size() != x.cols()) throw Error(ErrorCode::DimensionMismatch, "z-score model width differs");
  FeatureMatrix out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (m.constant[static_cast<std::size_t>(j)]) out.values.col(j).setZero();
    else out.values.col(j) = (x.values.col(j).array() - m.mean(j)) / m.sd(j);
  }
  return out;
}

void ElasticNetParams::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw Error(ErrorCode::InvalidParams, "lambdas must be >= 0");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidParams, "tolerance must be > 0");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidParams, "max_iterations must be >= 1");
  if (target_nonzeros && *target_nonzeros < 1) throw Error(ErrorCode::InvalidParams, "target_nonzeros must be >= 1");
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

double elastic_net_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                             double lambda1, double lambda2) {
  const double n = static_cast<double>(x.rows());
  return (y - x * beta).squaredNorm() / (2.0 * n) + lambda1 * beta.lpNorm<1>() + 0.5 * lambda2 * beta.squaredNorm();
}

double kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double lambda1,
                    double lambda2) {
  const double n = static_cast<double>(x.rows());
  const Eigen::VectorXd grad = -(x.transpose() * (y - x * beta)) / n + lambda2 * beta;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double v = beta(j) != 0.0 ? std::abs(grad(j) + lambda1 * (beta(j) > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(grad(j)) - lambda1);
    worst = std::max(worst, v);
  }
  return worst;
}

double lambda1_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return (x.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

CoordinateDescentResult coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda1,
                                           double lambda2, int max_iterations, double tolerance,
                                           const Eigen::VectorXd* warm_start) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  CoordinateDescentResult res;
  res.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = y - x * res.beta;
  const Eigen::VectorXd col_sq = x.colwise().squaredNorm().transpose() * inv_n;

  for (res.iterations = 1; res.iterations <= max_iterations; ++res.iterations) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double denom = col_sq(j) + lambda2;
      const double old = res.beta(j);
      double updated = 0.0;
      if (denom > 0.0) {
        const double rho = x.col(j).dot(residual) * inv_n + col_sq(j) * old;
        updated = soft_threshold(rho, lambda1) / denom;
      }
      if (updated != old) {
        residual.noalias() -= x.col(j) * (updated - old);
        res.beta(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    res.objective_trace.push_back(elastic_net_objective(x, y, res.beta, lambda1, lambda2));
    if (max_change < tolerance) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, max_iterations);
  return res;
}

std::size_t SelectionMask::count() const { return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true)); }

namespace {

std::size_t nonzeros(const Eigen::VectorXd& b) {
  return static_cast<std::size_t>((b.array() != 0.0).count());
}

SelectionMask to_mask(const CoordinateDescentResult& r, double lambda1, double lambda2) {
  SelectionMask m;
  m.coefficients = r.beta;
  m.selected.resize(static_cast<std::size_t>(r.beta.size()));
  for (Eigen::Index j = 0; j < r.beta.size(); ++j) m.selected[static_cast<std::size_t>(j)] = r.beta(j) != 0.0;
  m.lambda1 = lambda1;
  m.lambda2 = lambda2;
  m.iterations = r.iterations;
  m.converged = r.converged;
  return m;
}

}  // namespace

SelectionMask elastic_net_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ElasticNetParams& p) {
  p.validate();
  if (x.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "design rows vs labels");
  if (!((y.array() > 0).any() && (y.array() < 0).any()))
    throw Error(ErrorCode::SingleClass, "elastic net needs both classes");

  if (!p.target_nonzeros) {
    const auto r = coordinate_descent(x, y, p.lambda1, p.lambda2, p.max_iterations, p.tolerance);
    if (nonzeros(r.beta) == 0)
      throw Error(ErrorCode::NoFeatureSelected, "lambda1 = " + format_double(p.lambda1) + " zeroes every coefficient");
    return to_mask(r, p.lambda1, p.lambda2);
  }

  // Bisection of log(lambda1) for the requested sparsity, warm-started from
  // the nearest solution on the larger-lambda side.
  const std::size_t target = std::min<std::size_t>(static_cast<std::size_t>(*p.target_nonzeros),
                                                   static_cast<std::size_t>(x.cols()));
  const auto slack = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(target)));
  const double lmax = lambda1_max(x, y);
  double hi = std::log(lmax), lo = std::log(lmax * 1e-6);
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
  std::optional<std::pair<double, CoordinateDescentResult>> best;
  auto distance_to_target = [&](std::size_t c) { return c > target ? c - target : target - c; };

  for (int step = 0; step < 60; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double lambda = std::exp(mid);
    auto r = coordinate_descent(x, y, lambda, p.lambda2, p.max_iterations, p.tolerance, &warm);
    const std::size_t c = nonzeros(r.beta);
    if (!best || distance_to_target(c) < distance_to_target(nonzeros(best->second.beta)) ||
        (distance_to_target(c) == distance_to_target(nonzeros(best->second.beta)) && lambda > best->first))
      best.emplace(lambda, r);
    if (distance_to_target(c) <= slack) break;
    if (c > target) {
      lo = mid;
    } else {
      hi = mid;
      warm = r.beta;
    }
    if (hi - lo < 1e-9) break;
  }
  if (nonzeros(best->second.beta) == 0) throw Error(ErrorCode::NoFeatureSelected, "lambda path selected nothing");
  return to_mask(best->second, best->first, p.lambda2);
}

SelectionMask elastic_net_fit(const TrainingRows& train, const ElasticNetParams& p) {
  auto m = elastic_net_fit(train.matrix().values, train.labels(), p);
  m.col_names = train.matrix().col_names;
  return m;
}

FeatureMatrix select_features(const FeatureMatrix& x, const SelectionMask& mask) {
  if (mask.selected.size() != static_cast<std::size_t>(x.cols()))
    throw Error(ErrorCode::DimensionMismatch, "mask width differs from features");
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < mask.selected.size(); ++j)
    if (mask.selected[j]) cols.push_back(static_cast<Eigen::Index>(j));
  if (cols.empty()) throw Error(ErrorCode::EmptyMask, "no feature selected");
  FeatureMatrix out;
  out.subject_ids = x.subject_ids;
  out.values.resize(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.values.col(static_cast<Eigen::Index>(k)) = x.values.col(cols[k]);
    out.col_names.push_back(x.col_names[static_cast<std::size_t>(cols[k])]);
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return f;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::string& magic) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind(magic, 0) != 0)
    throw Error(ErrorCode::ModelFormat, path.string() + " is not a '" + magic + "' file");
  std::vector<std::vector<std::string>> rows;
  rows.push_back({line});
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string header_value(const std::string& header, const std::string& key) {
  const auto pos = header.find(key + "=");
  if (pos == std::string::npos) throw Error(ErrorCode::ModelFormat, "missing '" + key + "' in header");
  const auto start = pos + key.size() + 1;
  return header.substr(start, header.find(' ', start) - start);
}

}  // namespace

void write_selection(const SelectionMask& mask, const std::filesystem::path& path) {
  auto f = open_out(path);
  f << "gbsg-selection v1 lambda1=" << format_double(mask.lambda1) << " lambda2=" << format_double(mask.lambda2)
    << " iterations=" << mask.iterations << " converged=" << (mask.converged ? 1 : 0) << '\n';
  for (std::size_t j = 0; j < mask.selected.size(); ++j)
    if (mask.selected[j]) f << mask.col_names.at(j) << ',' << format_double(mask.coefficients(static_cast<Eigen::Index>(j))) << '\n';
}

SelectionMask read_selection(const std::filesystem::path& path, std::span<const std::string> all_names) {
  const auto rows = read_rows(path, "gbsg-selection v1");
  SelectionMask m;
  m.col_names.assign(all_names.begin(), all_names.end());
  m.selected.assign(all_names.size(), false);
  m.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(all_names.size()));
  m.lambda1 = parse_double(header_value(rows[0][0], "lambda1"));
  m.lambda2 = parse_double(header_value(rows[0][0], "lambda2"));
  m.iterations = std::stoi(header_value(rows[0][0], "iterations"));
  m.converged = header_value(rows[0][0], "converged") == "1";
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < all_names.size(); ++j) index[all_names[j]] = j;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw Error(ErrorCode::ModelFormat, "malformed selection line");
    const auto it = index.find(rows[r][0]);
    if (it == index.end()) throw Error(ErrorCode::CanonicalOrderMismatch, "unknown feature " + rows[r][0]);
    m.selected[it->second] = true;
    m.coefficients(static_cast<Eigen::Index>(it->second)) = parse_double(rows[r][1]);
  }
  return m;
}

void write_age_model(const AgeModel& m, std::span<const std::string> names, const std::filesystem::path& path) {
  auto f = open_out(path);
  f << "gbsg-age-model v1\n# feature,intercept,slope,cn_mean\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    f << names[j] << ',' << format_double(m.intercept(k)) << ',' << format_double(m.slope(k)) << ','
      << format_double(m.cn_mean(k)) << '\n';
  }
}

AgeModel read_age_model(const std::filesystem::path& path) {
  const auto rows = read_rows(path, "gbsg-age-model v1");
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  AgeModel m;
  m.intercept.resize(n);
  m.slope.resize(n);
  m.cn_mean.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& r = rows[static_cast<std::size_t>(j + 1)];
    if (r.size() != 4) throw Error(ErrorCode::ModelFormat, "malformed age model line");
    m.intercept(j) = parse_double(r[1]);
    m.slope(j) = parse_double(r[2]);
    m.cn_mean(j) = parse_double(r[3]);
  }
  return m;
}

void write_zscore_model(const ZScoreModel& m, std::span<const std::string> names, const std::filesystem::path& path) {
  auto f = open_out(path);
  f << "gbsg-zscore-model v1\n# feature,mean,sd\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    f << names[j] << ',' << format_double(m.mean(k)) << ',' << format_double(m.sd(k)) << '\n';
  }
}

ZScoreModel read_zscore_model(const std::filesystem::path& path) {
  const auto rows = read_rows(path, "gbsg-zscore-model v1");
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  ZScoreModel m;
  m.mean.resize(n);
  m.sd.resize(n);
  m.constant.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& r = rows[static_cast<std::size_t>(j + 1)];
    if (r.size() != 3) throw Error(ErrorCode::ModelFormat, "malformed z-score line");
    m.mean(j) = parse_double(r[1]);
    m.sd(j) = parse_double(r[2]);
    m.constant[static_cast<std::size_t>(j)] = m.sd(j) < kConstantFeatureSd;
  }
  return m;
}

}  // namespace gbsg::featsel
