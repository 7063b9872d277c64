#pragma once

// Objective I, penalty term phi = ||x' - f(x, u, t)||_p, the penalty function
// Phi_lambda = I + lambda * phi and the barrier-type variant Psi_lambda, with
// their gradients in the derivative-space variables (z, u).
//
// Gradients are reverse sweeps over the grid: a perturbation of z_i moves every
// later state by dt, so the z-gradient at i collects the integrand sensitivities
// of all later samples ("integrate from t to T") plus the terminal term.

#include <cmath>
#include <optional>

#include "exactpen/core_model.hpp"

namespace exactpen {

struct PenaltyConfig {
  double lambda = 0.0;
  double smoothing_eps = 0.0;
  std::optional<double> psi_delta;

  void validate() const {
    if (!(lambda >= 0.0)) throw InvalidArgument("penalty parameter lambda must be >= 0");
    if (!(smoothing_eps >= 0.0)) throw InvalidArgument("smoothing eps must be >= 0");
    if (psi_delta && !(*psi_delta > 0.0)) throw InvalidArgument("psi_delta must be > 0");
  }
};

struct GradientPair {
  SampleArray g_z;  // N x d
  SampleArray g_u;  // N x m

  GradientPair& operator+=(const GradientPair& o) {
    g_z += o.g_z;
    g_u += o.g_u;
    return *this;
  }
};

namespace detail {

inline void check_finite(double v, const char* what, int i, double t) {
  if (!std::isfinite(v)) throw EvaluationError(what, i, t);
}

inline void check_finite(const Vector& v, Eigen::Index n, const char* what, int i, double t) {
  if (v.size() != n || !v.allFinite()) throw EvaluationError(what, i, t);
}

/// Reverse accumulation shared by every z-gradient in the library:
///   g_z[i] = dt * (local_i - c*dt*coupling_i - sum_{j>i} dt*coupling_j)
/// where `coupling` holds the per-sample state sensitivities.
inline SampleArray reverse_sweep(const Grid& g, const SampleArray& local,
                                 const SampleArray& coupling) {
  const double dt = g.dt;
  const double c = g.eval_offset();
  SampleArray out(local.rows(), local.cols());
  Eigen::RowVectorXd tail = Eigen::RowVectorXd::Zero(local.cols());
  for (Eigen::Index i = local.rows() - 1; i >= 0; --i) {
    Eigen::RowVectorXd gi = local.row(i) - tail;
    if (c != 0.0) gi -= (c * dt) * coupling.row(i);
    out.row(i) = dt * gi;
    tail += dt * coupling.row(i);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Objective

inline double eval_objective(const Trajectory& traj, const ProblemSpec& prob) {
  const Grid& g = traj.grid;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);
  double sum = 0.0;
  for (int i = 0; i < g.intervals; ++i) {
    const double t = g.eval_time(i);
    const double v = prob.theta(xe.row(i).transpose(), traj.u.row(i).transpose(), t);
    detail::check_finite(v, "running cost theta is not finite", i, t);
    sum += v;
  }
  const double terminal = prob.zeta(x.row(g.intervals).transpose());
  detail::check_finite(terminal, "terminal cost zeta is not finite", g.intervals, g.horizon);
  return g.dt * sum + terminal;
}

inline GradientPair grad_objective(const Trajectory& traj, const ProblemSpec& prob) {
  if (!prob.grad_theta_x || !prob.grad_theta_u || !prob.grad_zeta)
    throw CapabilityError("grad_objective needs grad_theta_x, grad_theta_u and grad_zeta");
  const Grid& g = traj.grid;
  const int n = g.intervals;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);

  SampleArray dtheta_x(n, prob.dim_state);
  GradientPair out{SampleArray(n, prob.dim_state), SampleArray(n, prob.dim_control)};
  for (int i = 0; i < n; ++i) {
    const double t = g.eval_time(i);
    const Vector xi = xe.row(i).transpose();
    const Vector ui = traj.u.row(i).transpose();
    const Vector gx = prob.grad_theta_x(xi, ui, t);
    const Vector gu = prob.grad_theta_u(xi, ui, t);
    detail::check_finite(gx, prob.dim_state, "grad_theta_x is not finite", i, t);
    detail::check_finite(gu, prob.dim_control, "grad_theta_u is not finite", i, t);
    dtheta_x.row(i) = gx.transpose();
    out.g_u.row(i) = g.dt * gu.transpose();
  }
  const Vector gzeta = prob.grad_zeta(x.row(n).transpose());
  detail::check_finite(gzeta, prob.dim_state, "grad_zeta is not finite", n, g.horizon);

  // d/dz_i of dt * sum_j theta_j: the state sensitivities enter with a minus
  // sign in reverse_sweep, so feed -grad_theta_x as the coupling term.
  SampleArray local = SampleArray::Zero(n, prob.dim_state);
  local.rowwise() += gzeta.transpose();
  out.g_z = detail::reverse_sweep(g, local, -dtheta_x);
  return out;
}

// ---------------------------------------------------------------------------
// Penalty term

/// H(v) = |v|^{p-2} v, H(0) = 0.
inline Vector H_map(const Vector& v, double p) {
  const double n = v.norm();
  if (n == 0.0) return Vector::Zero(v.size());
  return std::pow(n, p - 2.0) * v;
}

inline double eval_penalty(const Trajectory& traj, const ProblemSpec& prob, double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("smoothing eps must be >= 0");
  const ResidualField r = residual(traj, prob);
  return smoothed_root(lp_power_sum(r.values, prob.p, traj.grid), eps, prob.p);
}

namespace detail {

/// Central differences of the penalty in each u_i, used when jac_f_u is absent.
/// Only r_i depends on u_i, so each probe updates one term of the power sum.
inline SampleArray penalty_control_gradient_fd(const Trajectory& traj, const ProblemSpec& prob,
                                               const SampleArray& xe, const ResidualField& r,
                                               double power_sum, double eps) {
  const Grid& g = traj.grid;
  const double p = prob.p;
  SampleArray gu(g.intervals, prob.dim_control);
  const double step_scale = std::cbrt(std::numeric_limits<double>::epsilon());
  for (int i = 0; i < g.intervals; ++i) {
    const double t = g.eval_time(i);
    const Vector xi = xe.row(i).transpose();
    const double own = g.dt * std::pow(r.values.row(i).norm(), p);
    const double rest = power_sum - own;
    for (int k = 0; k < prob.dim_control; ++k) {
      Vector u = traj.u.row(i).transpose();
      const double h = step_scale * std::max(1.0, std::abs(u[k]));
      auto value_at = [&](double uk) {
        u[k] = uk;
        const Vector fi = prob.f(xi, u, t);
        const double ri = (traj.z.row(i).transpose() - fi).norm();
        return smoothed_root(std::max(0.0, rest + g.dt * std::pow(ri, p)), eps, p);
      };
      const double base = traj.u(i, k);
      gu(i, k) = (value_at(base + h) - value_at(base - h)) / (2.0 * h);
    }
  }
  return gu;
}

}  // namespace detail

inline GradientPair grad_penalty(const Trajectory& traj, const ProblemSpec& prob, double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("smoothing eps must be >= 0");
  if (!prob.jac_f_x) throw CapabilityError("grad_penalty needs jac_f_x");
  const Grid& g = traj.grid;
  const int n = g.intervals;
  const int d = prob.dim_state;
  const double p = prob.p;

  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);
  const ResidualField r = residual(traj, prob);
  const double power_sum = lp_power_sum(r.values, p, g);
  if (eps == 0.0 && power_sum == 0.0) throw NondifferentiablePoint();

  // w_i = s^{1-p} H(r_i) with s the smoothed norm plus eps.
  const double s = smoothed_root(power_sum, eps, p) + eps;
  const double scale = std::pow(s, 1.0 - p);

  SampleArray w(n, d), coupling(n, d);
  GradientPair out{SampleArray(n, d), SampleArray::Zero(n, prob.dim_control)};
  for (int i = 0; i < n; ++i) {
    const double t = g.eval_time(i);
    const Vector xi = xe.row(i).transpose();
    const Vector ui = traj.u.row(i).transpose();
    const Vector wi = scale * H_map(r.values.row(i).transpose(), p);
    w.row(i) = wi.transpose();
    const Matrix jx = prob.jac_f_x(xi, ui, t);
    if (jx.rows() != d || jx.cols() != d || !jx.allFinite())
      throw EvaluationError("jac_f_x is not finite or mis-sized", i, t);
    coupling.row(i) = (jx.transpose() * wi).transpose();
    if (prob.jac_f_u) {
      const Matrix ju = prob.jac_f_u(xi, ui, t);
      if (ju.rows() != d || ju.cols() != prob.dim_control || !ju.allFinite())
        throw EvaluationError("jac_f_u is not finite or mis-sized", i, t);
      out.g_u.row(i) = -g.dt * (ju.transpose() * wi).transpose();
    }
  }
  out.g_z = detail::reverse_sweep(g, w, coupling);
  if (!prob.jac_f_u) out.g_u = detail::penalty_control_gradient_fd(traj, prob, xe, r, power_sum, eps);
  return out;
}

// ---------------------------------------------------------------------------
// Penalty functions

inline double eval_Phi(const Trajectory& traj, const ProblemSpec& prob, const PenaltyConfig& cfg) {
  cfg.validate();
  const double objective = eval_objective(traj, prob);
  if (cfg.lambda == 0.0) return objective;
  return objective + cfg.lambda * eval_penalty(traj, prob, cfg.smoothing_eps);
}

inline GradientPair grad_Phi(const Trajectory& traj, const ProblemSpec& prob,
                             const PenaltyConfig& cfg) {
  cfg.validate();
  GradientPair g = grad_objective(traj, prob);
  if (cfg.lambda == 0.0) return g;
  GradientPair gp = grad_penalty(traj, prob, cfg.smoothing_eps);
  g.g_z += cfg.lambda * gp.g_z;
  g.g_u += cfg.lambda * gp.g_u;
  return g;
}

/// Psi_lambda = I + lambda * phi / (delta - phi) while phi < delta, +infinity otherwise.
/// Uses the unsmoothed phi.
inline double eval_Psi(const Trajectory& traj, const ProblemSpec& prob, const PenaltyConfig& cfg) {
  cfg.validate();
  if (!cfg.psi_delta) throw InvalidArgument("eval_Psi needs psi_delta");
  const double delta = *cfg.psi_delta;
  const double phi = eval_penalty(traj, prob, 0.0);
  if (phi >= delta) return kInfinity;
  return eval_objective(traj, prob) + cfg.lambda * phi / (delta - phi);
}

}  // namespace exactpen
