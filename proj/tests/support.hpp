#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "exactpen/core_model.hpp"
#include "exactpen/functionals.hpp"

namespace testing_support {

using namespace exactpen;

inline Vector flatten(const SampleArray& z, const SampleArray& u) {
  Vector v(z.size() + u.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) v[k++] = z(i, j);
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j) v[k++] = u(i, j);
  return v;
}

inline Vector flatten(const GradientPair& g) { return flatten(g.g_z, g.g_u); }

inline double& coordinate(Trajectory& t, Eigen::Index k) {
  const Eigen::Index nz = t.z.size();
  if (k < nz) return t.z(k / t.z.cols(), k % t.z.cols());
  k -= nz;
  return t.u(k / t.u.cols(), k % t.u.cols());
}

/// Fourth-order central differences of F in every (z, u) coordinate.
/// When noise is given it receives the rounding error of each stencil.
inline Vector fd_gradient(const std::function<double(const Trajectory&)>& F, const Trajectory& at,
                          double step_scale = 1.0, Vector* noise = nullptr) {
  const Eigen::Index n = at.z.size() + at.u.size();
  Vector g(n);
  if (noise) noise->resize(n);
  Trajectory t = at;
  const double base_step = step_scale * std::pow(std::numeric_limits<double>::epsilon(), 0.2);
  for (Eigen::Index k = 0; k < n; ++k) {
    double& c = coordinate(t, k);
    const double orig = c;
    const double h = base_step * std::max(1.0, std::abs(orig));
    auto at_offset = [&](double s) {
      c = orig + s * h;
      return F(t);
    };
    const double f2 = at_offset(2.0), f1 = at_offset(1.0), m1 = at_offset(-1.0), m2 = at_offset(-2.0);
    c = orig;
    g[k] = (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h);
    if (noise)
      (*noise)[k] = std::numeric_limits<double>::epsilon() *
                    (std::abs(f2) + 8.0 * std::abs(f1) + 8.0 * std::abs(m1) + std::abs(m2)) / (12.0 * h);
  }
  return g;
}

/// Largest per-coordinate relative error. Coordinates whose size is below the
/// finite-difference resolution are compared against that resolution instead.
inline double max_relative_error(const Vector& analytic, const Vector& fd, const Vector& floor) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double denom = std::max({std::abs(analytic[k]), std::abs(fd[k]), floor[k]});
    worst = std::max(worst, std::abs(analytic[k] - fd[k]) / denom);
  }
  return worst;
}

inline double max_relative_error(const Vector& analytic, const Vector& fd, double floor) {
  return max_relative_error(analytic, fd, Vector::Constant(analytic.size(), floor));
}

/// True when finite differences at two step sizes agree, i.e. no kink of a
/// piecewise smooth F lies within the stencil of any coordinate.
inline bool smooth_near(const std::function<double(const Trajectory&)>& F, const Trajectory& at,
                        double floor) {
  return max_relative_error(fd_gradient(F, at), fd_gradient(F, at, 0.5), floor) < 1e-8;
}

inline Trajectory random_trajectory(const Grid& g, int d, int m, std::mt19937_64& rng,
                                    double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Trajectory t = make_trajectory(g, d, m);
  for (auto& v : t.z.reshaped()) v = nd(rng);
  for (auto& v : t.u.reshaped()) v = nd(rng);
  return t;
}

/// Exact feasible minimizer of the discretized scalar problem
/// min dt sum (x_i^2 + u_i^2), x' = u, x(0) = 1, as a linear least-squares solve.
struct LqOracle {
  double I = 0.0;
  Vector u;
};

inline LqOracle lq_discrete_oracle(const Grid& g) {
  const int n = g.intervals;
  const double c = g.eval_offset();
  // evaluation states: x_e = 1 + S u
  Matrix A = Matrix::Zero(2 * n, n);
  Vector b = Vector::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) A(i, j) = g.dt;
    A(i, i) = c * g.dt;
    b[i] = -1.0;
    A(n + i, i) = 1.0;
  }
  LqOracle out;
  out.u = A.colPivHouseholderQr().solve(b);
  out.I = g.dt * (A * out.u - b).squaredNorm();
  return out;
}

}  // namespace testing_support
