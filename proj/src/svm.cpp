#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "gbsg/classify.hpp"
#include "gbsg/error.hpp"
#include "gbsg/rng.hpp"
#include "gbsg/volio.hpp"

namespace gbsg::classify {
namespace {

constexpr double kTau = 1e-12;

void check_labels(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "rows vs labels");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1.0) pos = true;
    else if (y(i) == -1.0) neg = true;
    else throw Error(ErrorCode::InvalidParams, "labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error(ErrorCode::SingleClass, "both classes are required");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteData, "non-finite feature value");
}

// Dual SMO state for min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0.
class Smo {
 public:
  Smo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c)
      : y_(y), c_(c), n_(y.size()), alpha_(Eigen::VectorXd::Zero(n_)), grad_(Eigen::VectorXd::Constant(n_, -1.0)) {
    q_ = (x * x.transpose()).array() * (y * y.transpose()).array();
  }

  // Runs until the maximal KKT violation drops below eps. Returns false when
  // the iteration budget runs out first.
  bool solve(double eps, long budget, long& iterations) {
    while (iterations < budget) {
      int i = -1, j = -1;
      if (!select(eps, i, j)) return true;
      update(i, j);
      ++iterations;
    }
    return false;
  }

  const Eigen::VectorXd& alpha() const { return alpha_; }

  // Bias as libsvm computes it: average over free vectors, or the midpoint
  // of the feasible interval.
  double bias() const {
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum = 0.0;
    int free = 0;
    for (Eigen::Index t = 0; t < n_; ++t) {
      const double yg = y_(t) * grad_(t);
      if (alpha_(t) >= c_) {
        if (y_(t) < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha_(t) <= 0.0) {
        if (y_(t) > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++free;
        sum += yg;
      }
    }
    const double rho = free > 0 ? sum / free : 0.5 * (ub + lb);
    return -rho;
  }

 private:
  bool upper_ok(Eigen::Index t) const { return y_(t) > 0 ? alpha_(t) < c_ : alpha_(t) > 0.0; }
  bool lower_ok(Eigen::Index t) const { return y_(t) > 0 ? alpha_(t) > 0.0 : alpha_(t) < c_; }

  bool select(double eps, int& out_i, int& out_j) const {
    double gmax = -std::numeric_limits<double>::infinity();
    int i = -1;
    for (Eigen::Index t = 0; t < n_; ++t)
      if (upper_ok(t) && -y_(t) * grad_(t) >= gmax) {
        gmax = -y_(t) * grad_(t);
        i = static_cast<int>(t);
      }
    if (i < 0) return false;
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    int j = -1;
    for (Eigen::Index t = 0; t < n_; ++t) {
      if (!lower_ok(t)) continue;
      const double v = y_(t) * grad_(t);
      gmax2 = std::max(gmax2, v);
      const double grad_diff = gmax + v;
      if (grad_diff > 0.0) {
        double quad = q_(i, i) + q_(t, t) - 2.0 * y_(i) * y_(t) * q_(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best) {
          best = obj;
          j = static_cast<int>(t);
        }
      }
    }
    if (gmax + gmax2 < eps || j < 0) return false;
    out_i = i;
    out_j = j;
    return true;
  }

  void update(int i, int j) {
    const double old_i = alpha_(i), old_j = alpha_(j);
    double ai = old_i, aj = old_j;
    if (y_(i) != y_(j)) {
      double quad = q_(i, i) + q_(j, j) + 2.0 * q_(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_(i) - grad_(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > c_) { ai = c_; aj = c_ - diff; }
      } else {
        if (aj > c_) { aj = c_; ai = c_ + diff; }
      }
    } else {
      double quad = q_(i, i) + q_(j, j) - 2.0 * q_(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_(i) - grad_(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) { ai = c_; aj = sum - c_; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > c_) {
        if (aj > c_) { aj = c_; ai = sum - c_; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    alpha_(i) = ai;
    alpha_(j) = aj;
    grad_ += q_.col(i) * (ai - old_i) + q_.col(j) * (aj - old_j);
  }

  const Eigen::VectorXd& y_;
  double c_;
  Eigen::Index n_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd grad_;
};

double hinge_sum(const Eigen::VectorXd& f, const Eigen::VectorXd& y, double b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) s += std::max(0.0, 1.0 - y(i) * (f(i) + b));
  return s;
}

// The hinge sum is convex and piecewise linear in b with kinks at y_i - f_i;
// its minimum is attained at a kink. Among equal minima keep the one
// closest to `start`.
double optimal_bias(const Eigen::VectorXd& f, const Eigen::VectorXd& y, double start) {
  double best_b = start, best = hinge_sum(f, y, start);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double b = y(i) - f(i);
    const double v = hinge_sum(f, y, b);
    if (v < best || (v == best && std::abs(b - start) < std::abs(best_b - start))) {
      best = v;
      best_b = b;
    }
  }
  return best_b;
}

}  // namespace

double svm_primal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b, double c) {
  const Eigen::VectorXd f = x * w;
  return 0.5 * w.squaredNorm() + c * hinge_sum(f, y, b);
}

SvmModel svm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c, const SvmOptions& opt) {
  check_labels(x, y);
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidParams, "C must be > 0");
  Smo smo(x, y, c);
  SvmModel m;
  m.c = c;
  long iterations = 0;
  double eps = 1e-3;
  for (;;) {
    const bool finished = smo.solve(eps, opt.max_iterations, iterations);
    const Eigen::VectorXd ay = smo.alpha().cwiseProduct(y);
    m.w = x.transpose() * ay;
    const Eigen::VectorXd f = x * m.w;
    m.b = optimal_bias(f, y, smo.bias());
    m.primal = svm_primal(x, y, m.w, m.b, c);
    m.dual = smo.alpha().sum() - 0.5 * m.w.squaredNorm();
    m.converged = m.duality_gap() <= opt.gap_tolerance * std::max(1.0, std::abs(m.primal));
    if (m.converged || !finished || eps < 1e-14) break;
    eps *= 0.1;
  }
  m.iterations = static_cast<int>(std::min<long>(iterations, std::numeric_limits<int>::max()));
  return m;
}

std::vector<double> svm_c_grid() {
  std::vector<double> cs;
  for (int i = -10; i <= 10; ++i) cs.push_back(std::ldexp(1.0, i));
  return cs;
}

std::size_t pick_best_c(std::span<const double> cs, std::span<const double> accuracy) {
  if (cs.size() != accuracy.size() || cs.empty()) throw Error(ErrorCode::LengthMismatch, "grid vs accuracy");
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cs[a] < cs[b]; });
  std::size_t best = order.front();
  for (std::size_t k : order)
    if (accuracy[k] > accuracy[best]) best = k;
  return best;
}

GridSearchResult svm_grid_search(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed, int folds) {
  check_labels(x, y);
  if (folds < 2) throw Error(ErrorCode::InvalidParams, "cross-validation needs at least 2 folds");
  const auto n = static_cast<std::size_t>(y.size());

  // Stratified assignment: shuffle each class, deal round-robin.
  std::vector<int> fold_of(n);
  Rng rng(derive_seed(seed, {seed_tag("svm-cv")}));
  int next = 0;
  for (double cls : {1.0, -1.0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (y(static_cast<Eigen::Index>(i)) == cls) idx.push_back(i);
    for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.below(k)]);
    for (std::size_t i : idx) fold_of[i] = next++ % folds;
  }

  GridSearchResult res;
  res.cs = svm_c_grid();
  for (double c : res.cs) {
    double acc_sum = 0.0;
    int used = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
      if (te.empty()) continue;
      const Eigen::MatrixXd xtr = x(tr, Eigen::all), xte = x(te, Eigen::all);
      const Eigen::VectorXd ytr = y(tr), yte = y(te);
      std::vector<int> pred;
      if ((ytr.array() > 0).all() || (ytr.array() < 0).all()) {
        pred.assign(te.size(), static_cast<int>(ytr(0)));
      } else {
        pred = svm_predict(svm_train(xtr, ytr, c), xte);
      }
      int correct = 0;
      for (std::size_t k = 0; k < te.size(); ++k) correct += pred[k] == static_cast<int>(yte(static_cast<Eigen::Index>(k)));
      acc_sum += static_cast<double>(correct) / static_cast<double>(te.size());
      ++used;
    }
    res.cv_accuracy.push_back(acc_sum / used);
  }
  const std::size_t best = pick_best_c(res.cs, res.cv_accuracy);
  res.best_c = res.cs[best];
  res.model = svm_train(x, y, res.best_c);
  return res;
}

Eigen::VectorXd svm_margins(const SvmModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.w.size()) throw Error(ErrorCode::DimensionMismatch, "feature count differs from the model");
  return (x * m.w).array() + m.b;
}

std::vector<int> svm_predict(const SvmModel& m, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd margins = svm_margins(m, x);
  std::vector<int> out(static_cast<std::size_t>(margins.size()));
  for (Eigen::Index i = 0; i < margins.size(); ++i) out[static_cast<std::size_t>(i)] = margins(i) >= 0.0 ? 1 : -1;
  return out;
}

void write_svm(const SvmModel& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f << "gbsg-svm v1\n";
  f << "features " << m.w.size() << '\n';
  f << "c " << format_double(m.c) << '\n';
  f << "b " << format_double(m.b) << '\n';
  f << "primal " << format_double(m.primal) << '\n';
  f << "dual " << format_double(m.dual) << '\n';
  f << "iterations " << m.iterations << '\n';
  f << "converged " << (m.converged ? 1 : 0) << '\n';
  f << "w";
  for (Eigen::Index j = 0; j < m.w.size(); ++j) f << ' ' << format_double(m.w(j));
  f << '\n';
}

SvmModel read_svm(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  if (!std::getline(f, line) || line != "gbsg-svm v1") throw Error(ErrorCode::ModelFormat, "not an SVM model file");
  SvmModel m;
  long features = -1;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string key, value;
    ss >> key;
    if (key == "features") ss >> features;
    else if (key == "w") {
      if (features < 0) throw Error(ErrorCode::ModelFormat, "weights before feature count");
      m.w.resize(features);
      for (long j = 0; j < features; ++j) {
        if (!(ss >> value)) throw Error(ErrorCode::ModelFormat, "too few weights");
        m.w(j) = parse_double(value);
      }
    } else if (ss >> value) {
      if (key == "c") m.c = parse_double(value);
      else if (key == "b") m.b = parse_double(value);
      else if (key == "primal") m.primal = parse_double(value);
      else if (key == "dual") m.dual = parse_double(value);
      else if (key == "iterations") m.iterations = std::stoi(value);
      else if (key == "converged") m.converged = value == "1";
      else throw Error(ErrorCode::ModelFormat, "unknown key " + key);
    }
  }
  if (m.w.size() != features) throw Error(ErrorCode::ModelFormat, "missing weights");
  return m;
}

}  // namespace gbsg::classify
