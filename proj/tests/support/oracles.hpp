#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's kernels; only data types are shared.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "gbsg/grading.hpp"
#include "gbsg/rng.hpp"
#include "gbsg/volume.hpp"

namespace oracle {

inline double sum_sq(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
  return s;
}

inline std::vector<float> cube(const gbsg::Volume3D& v, int cx, int cy, int cz, int r) {
  std::vector<float> out;
  for (int z = cz - r; z <= cz + r; ++z)
    for (int y = cy - r; y <= cy + r; ++y)
      for (int x = cx - r; x <= cx + r; ++x)
        out.push_back(v.data[std::size_t(x) + std::size_t(v.dims[0]) * (std::size_t(y) + std::size_t(v.dims[1]) * std::size_t(z))]);
  return out;
}

struct Candidate {
  double d;
  int status;
  std::uint32_t t;
  std::uint64_t lin;
};

/// Every candidate in every template's window, fully scored, sorted by (d, t, lin), first K.
inline std::vector<Candidate> knn(const gbsg::Volume3D& query, int cx, int cy, int cz,
                                  const gbsg::grading::TrainingLibrary& lib, int r, int s, int k) {
  const auto q = cube(query, cx, cy, cz, r);
  std::vector<Candidate> all;
  for (std::uint32_t t = 0; t < lib.size(); ++t) {
    const auto& v = lib[t].volume;
    for (int z = cz - s; z <= cz + s; ++z)
      for (int y = cy - s; y <= cy + s; ++y)
        for (int x = cx - s; x <= cx + s; ++x) {
          if (x - r < 0 || y - r < 0 || z - r < 0) continue;
          if (x + r >= int(v.dims[0]) || y + r >= int(v.dims[1]) || z + r >= int(v.dims[2])) continue;
          const std::uint64_t lin = std::uint64_t(x) + v.dims[0] * (std::uint64_t(y) + std::uint64_t(v.dims[1]) * z);
          all.push_back({sum_sq(q, cube(v, x, y, z, r)), int(lib[t].status), t, lin});
        }
  }
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.d, a.t, a.lin) < std::tie(b.d, b.t, b.lin);
  });
  if (all.size() > std::size_t(k)) all.resize(std::size_t(k));
  return all;
}

inline double grade(const std::vector<Candidate>& c, double eps) {
  double dmin = c.front().d;
  for (const auto& x : c) dmin = std::min(dmin, x.d);
  double num = 0.0, den = 0.0;
  for (const auto& x : c) {
    const double w = std::exp(-x.d / (dmin + eps));
    num += w * x.status;
    den += w;
  }
  return num / den;
}

/// min c.x subject to A x = b, x >= 0. Dense two-phase tableau simplex with Bland's rule.
inline double simplex_min(std::vector<std::vector<double>> A, std::vector<double> b, const std::vector<double>& c) {
  const std::size_t m = A.size(), n = c.size();
  const double eps = 1e-12;
  for (std::size_t i = 0; i < m; ++i)
    if (b[i] < 0) {
      for (auto& a : A[i]) a = -a;
      b[i] = -b[i];
    }
  const std::size_t cols = n + m + 1, rhs = n + m;
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(cols, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
    T[i][n + i] = 1.0;
    T[i][rhs] = b[i];
    basis[i] = n + i;
  }
  auto pivot = [&](std::size_t row, std::size_t col) {
    const double p = T[row][col];
    for (auto& v : T[row]) v /= p;
    for (std::size_t i = 0; i <= m; ++i)
      if (i != row && T[i][col] != 0.0) {
        const double f = T[i][col];
        for (std::size_t j = 0; j < cols; ++j) T[i][j] -= f * T[row][j];
      }
    basis[row] = col;
  };
  auto run = [&](std::size_t allowed) {
    for (int guard = 0; guard < 100000; ++guard) {
      std::size_t enter = cols;
      for (std::size_t j = 0; j < allowed; ++j)
        if (T[m][j] < -eps) {
          enter = j;
          break;
        }
      if (enter == cols) return;
      std::size_t leave = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i)
        if (T[i][enter] > eps) {
          const double ratio = T[i][rhs] / T[i][enter];
          if (ratio < best - eps || (std::abs(ratio - best) <= eps && leave < m && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      if (leave == m) throw std::runtime_error("unbounded LP");
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex did not terminate");
  };
  // Phase 1: minimize the sum of artificials.
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += T[i][j];
    T[m][j] = (j >= n && j < rhs) ? 0.0 : -s;
  }
  run(n + m);
  if (-T[m][rhs] > 1e-9) throw std::runtime_error("infeasible LP");
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] >= n)
      for (std::size_t j = 0; j < n; ++j)
        if (std::abs(T[i][j]) > 1e-9) {
          pivot(i, j);
          break;
        }
  // Phase 2.
  for (std::size_t j = 0; j < cols; ++j) {
    double s = j < n ? c[j] : 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (basis[i] < n) s -= c[basis[i]] * T[i][j];
    T[m][j] = s;
  }
  T[m][rhs] = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) T[m][rhs] -= c[basis[i]] * T[i][rhs];
  run(n);
  return -T[m][rhs];
}

/// Earth mover's distance between masses on bin centers of uniform grids over [-1, 1].
inline double transport_lp(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  auto center = [](std::size_t k, std::size_t bins) { return -1.0 + (2.0 * double(k) + 1.0) / double(bins); };
  std::vector<std::vector<double>> A(na + nb, std::vector<double>(na * nb, 0.0));
  std::vector<double> rhs, cost(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      A[i][i * nb + j] = 1.0;
      A[na + j][i * nb + j] = 1.0;
      cost[i * nb + j] = std::abs(center(i, na) - center(j, nb));
    }
  rhs.insert(rhs.end(), a.begin(), a.end());
  rhs.insert(rhs.end(), b.begin(), b.end());
  return simplex_min(A, rhs, cost);
}

/// Masses of a uniform histogram over [-1, 1] moved to a uniform grid with `bins` bins,
/// split in proportion to the overlap length.
inline std::vector<double> regrid(const std::vector<double>& m, std::size_t bins) {
  std::vector<double> out(bins, 0.0);
  const double ws = 2.0 / double(m.size()), wt = 2.0 / double(bins);
  for (std::size_t k = 0; k < m.size(); ++k)
    for (std::size_t j = 0; j < bins; ++j) {
      const double lo = std::max(-1.0 + k * ws, -1.0 + j * wt), hi = std::min(-1.0 + (k + 1) * ws, -1.0 + (j + 1) * wt);
      if (hi > lo) out[j] += m[k] * (hi - lo) / ws;
    }
  return out;
}

/// (1/2)||w||^2 + C sum hinge, with b chosen exactly over the hinge breakpoints.
inline std::pair<double, double> primal_best_b(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& w, double c) {
  const Eigen::VectorXd s = x * w;
  double best = std::numeric_limits<double>::infinity(), best_b = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double b = y(i) - s(i);  // y_i (s_i + b) = 1
    double p = 0.5 * w.squaredNorm();
    for (Eigen::Index j = 0; j < x.rows(); ++j) p += c * std::max(0.0, 1.0 - y(j) * (s(j) + b));
    if (p < best) {
      best = p;
      best_b = b;
    }
  }
  return {best, best_b};
}

struct SvmBracket {
  double dual = 0.0, primal = 0.0;
};

/// Accelerated projected gradient on the SVM dual. The returned (dual, primal)
/// pair brackets the optimum; callers check the bracket width.
inline SvmBracket svm_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c, int iterations = 200000) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd yx = y.asDiagonal() * x;
  const Eigen::MatrixXd Q = yx * yx.transpose();
  const double L = std::max(1e-12, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff());
  auto project = [&](const Eigen::VectorXd& v) {
    // Find mu with sum y_i clip(v_i - mu y_i, 0, C) = 0.
    auto g = [&](double mu) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += y(i) * std::clamp(v(i) - mu * y(i), 0.0, c);
      return s;
    };
    double lo = -1e6, hi = 1e6;  // g is non-increasing in mu
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = std::clamp(v(i) - mu * y(i), 0.0, c);
    return out;
  };
  auto bracket = [&](const Eigen::VectorXd& alpha) {
    SvmBracket br;
    br.dual = alpha.sum() - 0.5 * alpha.dot(Q * alpha);
    br.primal = primal_best_b(x, y, yx.transpose() * alpha, c).first;
    return br;
  };
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), z = a;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = Q * z - Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd next = project(z - grad / L);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / tn) * (next - a);
    a = next;
    t = tn;
    if (it % 1000 == 999) {
      const SvmBracket br = bracket(a);
      if (br.primal - br.dual <= 1e-8) return br;
    }
  }
  return bracket(a);
}

}  // namespace oracle
