#pragma once

// Problem definitions and the derivative-space parameterization.
//
// A trajectory is stored through its derivative z = x' (piecewise constant on
// the intervals of a uniform grid) together with piecewise-constant controls u.
// States live on the nodes and are recovered by the cumulative sum
//
//   x_0 = x0,   x_{i+1} = x_i + dt * z_i,
//
// which is the exact image of piecewise-constant z under x = x0 + int_0^t z.
// Integrands on interval i are evaluated at one point per interval: the left
// node (default) or the interval midpoint. Every functional and gradient in
// the library is built on the same rule, so discrete gradients are exact.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exactpen/errors.hpp"

namespace exactpen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// N x k array of per-interval (or per-node) samples, one sample per row.
using SampleArray = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ScalarField = std::function<double(const Vector& x, const Vector& u, double t)>;
using VectorField = std::function<Vector(const Vector& x, const Vector& u, double t)>;
using MatrixField = std::function<Matrix(const Vector& x, const Vector& u, double t)>;
using TerminalCost = std::function<double(const Vector& x)>;
using TerminalGradient = std::function<Vector(const Vector& x)>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Conjugate exponent p' with 1/p + 1/p' = 1 (p = 1 maps to infinity and back).
inline double conjugate_exponent(double p) {
  if (p == 1.0) return kInfinity;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

/// T^{1/s}, the L^s norm of the constant function 1 on [0, T].
inline double horizon_power(double horizon, double s) {
  return std::isinf(s) ? 1.0 : std::pow(horizon, 1.0 / s);
}

// ---------------------------------------------------------------------------
// Control sets

class ControlSet {
 public:
  enum class Kind { unconstrained, box, ball };

  static ControlSet unconstrained() { return ControlSet(Kind::unconstrained); }

  static ControlSet box(Vector lower, Vector upper) {
    if (lower.size() != upper.size()) throw InvalidArgument("box bounds differ in dimension");
    if ((lower.array() > upper.array()).any())
      throw InvalidArgument("box bounds must satisfy lower <= upper componentwise");
    ControlSet s(Kind::box);
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  static ControlSet ball(Vector center, double radius) {
    if (!(radius >= 0.0)) throw InvalidArgument("ball radius must be nonnegative");
    ControlSet s(Kind::ball);
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  bool bounded() const noexcept { return kind_ != Kind::unconstrained; }
  const Vector& lower() const noexcept { return lower_; }
  const Vector& upper() const noexcept { return upper_; }
  const Vector& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  /// Euclidean projection of one control sample.
  void project_in_place(Eigen::Ref<Eigen::RowVectorXd> u) const {
    switch (kind_) {
      case Kind::unconstrained:
        return;
      case Kind::box:
        u = u.cwiseMax(lower_.transpose()).cwiseMin(upper_.transpose()).eval();
        return;
      case Kind::ball: {
        const double n = (u.transpose() - center_).norm();
        if (n > radius_) u = (center_ + (radius_ / n) * (u.transpose() - center_)).transpose().eval();
        return;
      }
    }
  }

  Vector project(const Vector& u) const {
    Eigen::RowVectorXd row = u.transpose();
    project_in_place(row);
    return row.transpose();
  }

  bool contains(const Vector& u, double tol = 0.0) const {
    switch (kind_) {
      case Kind::unconstrained:
        return true;
      case Kind::box:
        return ((u - lower_).array() >= -tol).all() && ((upper_ - u).array() >= -tol).all();
      case Kind::ball:
        return (u - center_).norm() <= radius_ + tol;
    }
    return false;
  }

 private:
  explicit ControlSet(Kind k) : kind_(k) {}

  Kind kind_;
  Vector lower_, upper_, center_;
  double radius_ = 0.0;
};

// ---------------------------------------------------------------------------
// Problem

/// min int_0^T theta(x, u, t) dt + zeta(x(T))  s.t.  x' = f(x, u, t), x(0) = x0, u in U.
struct ProblemSpec {
  int dim_state = 1;
  int dim_control = 1;
  double horizon = 1.0;
  Vector x0;
  double p = 2.0;
  double q = 2.0;

  ScalarField theta;
  VectorField grad_theta_x;
  VectorField grad_theta_u;
  VectorField f;
  MatrixField jac_f_x;
  MatrixField jac_f_u;  // optional
  TerminalCost zeta;
  TerminalGradient grad_zeta;
  ControlSet control_set = ControlSet::unconstrained();

  void validate() const {
    if (dim_state < 1) throw InvalidArgument("dim_state must be >= 1");
    if (dim_control < 1) throw InvalidArgument("dim_control must be >= 1");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon T must be positive");
    if (x0.size() != dim_state) throw InvalidArgument("x0 has the wrong dimension");
    if (!(p > 1.0) || std::isinf(p)) throw InvalidArgument("p must lie in (1, inf)");
    if (!(q >= 1.0)) throw InvalidArgument("q must lie in [1, inf]");
    if (!theta || !f || !zeta) throw InvalidArgument("theta, f and zeta are required");
    if (control_set.kind() == ControlSet::Kind::box && control_set.lower().size() != dim_control)
      throw InvalidArgument("control box has the wrong dimension");
    if (control_set.kind() == ControlSet::Kind::ball && control_set.center().size() != dim_control)
      throw InvalidArgument("control ball has the wrong dimension");
  }
};

// ---------------------------------------------------------------------------
// Grid and trajectories

enum class EvaluationRule { left_endpoint, midpoint };

struct Grid {
  int intervals = 0;
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<double> nodes;
  EvaluationRule rule = EvaluationRule::left_endpoint;

  /// Fraction of the interval at which integrands are sampled.
  double eval_offset() const noexcept { return rule == EvaluationRule::midpoint ? 0.5 : 0.0; }
  double eval_time(int i) const noexcept { return nodes[i] + eval_offset() * dt; }
};

inline Grid make_uniform_grid(double horizon, int intervals,
                              EvaluationRule rule = EvaluationRule::left_endpoint) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw InvalidArgument("grid horizon must be positive and finite");
  if (intervals < 1) throw InvalidArgument("grid needs at least one interval");
  Grid g;
  g.intervals = intervals;
  g.horizon = horizon;
  g.dt = horizon / intervals;
  g.rule = rule;
  g.nodes.resize(intervals + 1);
  for (int i = 0; i < intervals; ++i) g.nodes[i] = i * g.dt;
  g.nodes[intervals] = horizon;
  return g;
}

struct Trajectory {
  Grid grid;
  SampleArray z;                 // N x d
  SampleArray u;                 // N x m
  std::optional<SampleArray> x;  // (N+1) x d, filled by reconstruct_states

  int intervals() const noexcept { return grid.intervals; }
  int dim_state() const noexcept { return static_cast<int>(z.cols()); }
  int dim_control() const noexcept { return static_cast<int>(u.cols()); }
};

inline Trajectory make_trajectory(const Grid& grid, int dim_state, int dim_control) {
  Trajectory t;
  t.grid = grid;
  t.z = SampleArray::Zero(grid.intervals, dim_state);
  t.u = SampleArray::Zero(grid.intervals, dim_control);
  return t;
}

inline void require_finite(const SampleArray& a, const char* what) {
  if (!a.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite entries");
}

/// The discrete J: cumulative left-endpoint sum of z starting from x0.
inline SampleArray integrate_derivative(const Grid& grid, const SampleArray& z, const Vector& x0) {
  if (z.rows() != grid.intervals || z.cols() != x0.size())
    throw InvalidArgument("derivative samples do not match grid/state dimension");
  require_finite(z, "z");
  SampleArray x(grid.intervals + 1, z.cols());
  x.row(0) = x0.transpose();
  for (int i = 0; i < grid.intervals; ++i) x.row(i + 1) = x.row(i) + grid.dt * z.row(i);
  return x;
}

inline const SampleArray& reconstruct_states(Trajectory& traj, const Vector& x0) {
  traj.x = integrate_derivative(traj.grid, traj.z, x0);
  return *traj.x;
}

/// States at the per-interval evaluation points: x_i + offset * dt * z_i.
inline SampleArray evaluation_states(const Grid& grid, const SampleArray& x, const SampleArray& z) {
  SampleArray xe = x.topRows(grid.intervals);
  const double c = grid.eval_offset();
  if (c != 0.0) xe += (c * grid.dt) * z;
  return xe;
}

// ---------------------------------------------------------------------------
// Residuals and norms

struct ResidualField {
  SampleArray values;  // r_i = z_i - f(xe_i, u_i, te_i)
};

inline ResidualField residual(const Trajectory& traj, const ProblemSpec& prob) {
  const Grid& g = traj.grid;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);
  ResidualField r{SampleArray(g.intervals, prob.dim_state)};
  for (int i = 0; i < g.intervals; ++i) {
    const double t = g.eval_time(i);
    const Vector fi = prob.f(xe.row(i).transpose(), traj.u.row(i).transpose(), t);
    if (fi.size() != prob.dim_state || !fi.allFinite())
      throw EvaluationError("dynamics f returned a non-finite or mis-sized value", i, t);
    r.values.row(i) = traj.z.row(i) - fi.transpose();
  }
  return r;
}

/// sum_i dt * |r_i|^p with the Euclidean norm per sample.
template <class Derived>
double lp_power_sum(const Eigen::MatrixBase<Derived>& samples, double p, const Grid& grid) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double n = samples.row(i).norm();
    if (n > 0.0) sum += std::pow(n, p);
  }
  return grid.dt * sum;
}

template <class Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& samples, double p, const Grid& grid) {
  if (!(p > 1.0) || std::isinf(p)) throw InvalidArgument("lp_norm requires p in (1, inf)");
  return std::pow(lp_power_sum(samples, p, grid), 1.0 / p);
}

inline double lp_norm(const ResidualField& field, double p, const Grid& grid) {
  return lp_norm(field.values, p, grid);
}

/// (P + eps^p)^{1/p} - eps for a power sum P, computed without cancellation.
inline double smoothed_root(double power_sum, double eps, double p) {
  if (eps == 0.0) return std::pow(power_sum, 1.0 / p);
  const double ratio = power_sum / std::pow(eps, p);
  return eps * std::expm1(std::log1p(ratio) / p);
}

}  // namespace exactpen
