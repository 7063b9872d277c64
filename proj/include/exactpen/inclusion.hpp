#pragma once

// Differential inclusions x' in F(x, t) with compact convex F given through
// its support function s(F(x,t), psi) = sup_{y in F(x,t)} <y, psi>.
//
// The penalty integrand is the distance h(x, z, t) = dist(z, F(x, t)), equal to
// max over unit psi of max{0, <z, psi> - s(F(x,t), psi)}. For h > 0 the maximizer
// psi* is unique and equals (z - nearest) / h; for h = 0 we return psi0 = e_1.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <variant>
#include <vector>

#include "exactpen/functionals.hpp"

namespace exactpen {

using SetVectorFn = std::function<Vector(const Vector& x, double t)>;
using SetMatrixFn = std::function<Matrix(const Vector& x, double t)>;
using SetScalarFn = std::function<double(const Vector& x, double t)>;

/// F(x,t) = closed ball B(c(x,t), r(x,t)).
struct BallSet {
  SetVectorFn center;
  SetMatrixFn center_jacobian;
  SetScalarFn radius;
  SetVectorFn radius_gradient;
};

/// F(x,t) = [lower(x,t), upper(x,t)] componentwise.
struct BoxSet {
  SetVectorFn lower;
  SetVectorFn upper;
  SetMatrixFn lower_jacobian;
  SetMatrixFn upper_jacobian;
};

/// F(x,t) = conv{v_k(x,t)}.
struct PolytopeSet {
  std::function<std::vector<Vector>(const Vector& x, double t)> vertices;
  std::function<std::vector<Matrix>(const Vector& x, double t)> vertex_jacobians;
};

using SupportSetModel = std::variant<BallSet, BoxSet, PolytopeSet>;

// Builders for the common state-independent and linear cases.

inline BallSet linear_ball(const Matrix& a, double radius) {
  if (!(radius >= 0.0)) throw InvalidArgument("ball radius must be nonnegative");
  const auto d = a.rows();
  return BallSet{[a](const Vector& x, double) -> Vector { return a * x; },
                 [a](const Vector&, double) -> Matrix { return a; },
                 [radius](const Vector&, double) { return radius; },
                 [d](const Vector&, double) -> Vector { return Vector::Zero(d); }};
}

inline BallSet constant_ball(const Vector& center, double radius) {
  const auto d = center.size();
  return BallSet{[center](const Vector&, double) -> Vector { return center; },
                 [d](const Vector&, double) -> Matrix { return Matrix::Zero(d, d); },
                 [radius](const Vector&, double) { return radius; },
                 [d](const Vector&, double) -> Vector { return Vector::Zero(d); }};
}

inline BoxSet constant_box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size() || (lower.array() > upper.array()).any())
    throw InvalidArgument("box bounds must satisfy lower <= upper componentwise");
  const auto d = lower.size();
  return BoxSet{[lower](const Vector&, double) -> Vector { return lower; },
                [upper](const Vector&, double) -> Vector { return upper; },
                [d](const Vector&, double) -> Matrix { return Matrix::Zero(d, d); },
                [d](const Vector&, double) -> Matrix { return Matrix::Zero(d, d); }};
}

inline PolytopeSet constant_polytope(std::vector<Vector> vertices) {
  if (vertices.empty()) throw InvalidArgument("polytope needs at least one vertex");
  const auto d = vertices.front().size();
  const auto k = vertices.size();
  return PolytopeSet{[vertices](const Vector&, double) { return vertices; },
                     [d, k](const Vector&, double) {
                       return std::vector<Matrix>(k, Matrix::Zero(d, d));
                     }};
}

struct InclusionProblemSpec {
  int dim_state = 1;
  double horizon = 1.0;
  Vector x0;
  double p = 2.0;
  std::function<double(const Vector& x, double t)> theta;
  std::function<Vector(const Vector& x, double t)> grad_theta_x;
  TerminalCost zeta;
  TerminalGradient grad_zeta;
  SupportSetModel set_model;

  void validate() const {
    if (dim_state < 1) throw InvalidArgument("dim_state must be >= 1");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon T must be positive");
    if (x0.size() != dim_state) throw InvalidArgument("x0 has the wrong dimension");
    if (!(p > 1.0) || std::isinf(p)) throw InvalidArgument("p must lie in (1, inf)");
    if (!theta || !zeta) throw InvalidArgument("theta and zeta are required");
  }
};

// ---------------------------------------------------------------------------
// Support function

namespace detail {

inline void require_unit(const Vector& psi) {
  if (std::abs(psi.norm() - 1.0) > 1e-12) throw InvalidArgument("psi must be a unit vector");
}

/// Index of the maximal support value; lowest index among values within 1e-12 of the max.
inline std::size_t polytope_active_vertex(const std::vector<Vector>& verts, const Vector& psi) {
  if (verts.empty()) throw InvalidArgument("polytope needs at least one vertex");
  std::vector<double> values(verts.size());
  for (std::size_t k = 0; k < verts.size(); ++k) values[k] = verts[k].dot(psi);
  const double best = *std::max_element(values.begin(), values.end());
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] >= best - 1e-12) return k;
  return 0;
}

}  // namespace detail

inline double support_value(const SupportSetModel& model, const Vector& x, double t,
                            const Vector& psi) {
  detail::require_unit(psi);
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BallSet>) {
          const double r = m.radius(x, t);
          if (!(r >= 0.0)) throw InvalidArgument("ball radius must be nonnegative");
          return m.center(x, t).dot(psi) + r;
        } else if constexpr (std::is_same_v<M, BoxSet>) {
          const Vector lo = m.lower(x, t), up = m.upper(x, t);
          return (psi.array() * lo.array()).max(psi.array() * up.array()).sum();
        } else {
          const auto verts = m.vertices(x, t);
          return verts[detail::polytope_active_vertex(verts, psi)].dot(psi);
        }
      },
      model);
}

/// x-gradient of the support function. For polytopes at vertex ties this is the
/// gradient of the lowest-index active vertex, i.e. one subgradient selection.
inline Vector support_grad_x(const SupportSetModel& model, const Vector& x, double t,
                             const Vector& psi) {
  detail::require_unit(psi);
  return std::visit(
      [&](const auto& m) -> Vector {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BallSet>) {
          return m.center_jacobian(x, t).transpose() * psi + m.radius_gradient(x, t);
        } else if constexpr (std::is_same_v<M, BoxSet>) {
          const Matrix jl = m.lower_jacobian(x, t), ju = m.upper_jacobian(x, t);
          Vector g = Vector::Zero(x.size());
          for (Eigen::Index k = 0; k < psi.size(); ++k)
            g += psi[k] * (psi[k] >= 0.0 ? ju.row(k) : jl.row(k)).transpose();
          return g;
        } else {
          const auto verts = m.vertices(x, t);
          const auto jacs = m.vertex_jacobians(x, t);
          return jacs[detail::polytope_active_vertex(verts, psi)].transpose() * psi;
        }
      },
      model);
}

// ---------------------------------------------------------------------------
// Nearest points

struct MinNormPoint {
  Vector point;    // minimal-norm point of conv(columns)
  Vector weights;  // convex weights over the columns
  int iterations = 0;
  bool converged = false;
};

/// Wolfe's minimum-norm-point algorithm on the convex hull of the columns of P.
inline MinNormPoint min_norm_point(const Matrix& points, double tol = 1e-12, int max_iter = 1000) {
  const Eigen::Index k = points.cols();
  if (k == 0) throw InvalidArgument("min_norm_point needs at least one point");
  const Vector sq = points.colwise().squaredNorm().transpose();
  const double scale = std::max(sq.maxCoeff(), 1e-300);

  Eigen::Index first = 0;
  sq.minCoeff(&first);
  std::vector<Eigen::Index> corral{first};
  std::vector<double> lambda{1.0};
  Vector x = points.col(first);

  auto combine = [&](const std::vector<double>& w) {
    Vector y = Vector::Zero(points.rows());
    for (std::size_t i = 0; i < corral.size(); ++i) y += w[i] * points.col(corral[i]);
    return y;
  };

  MinNormPoint out;
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    Eigen::Index j = 0;
    const double min_dot = (points.transpose() * x).minCoeff(&j);
    if (x.squaredNorm() - min_dot <= tol * scale ||
        std::find(corral.begin(), corral.end(), j) != corral.end()) {
      out.converged = true;
      break;
    }
    corral.push_back(j);
    lambda.push_back(0.0);

    for (;;) {
      const auto s = static_cast<Eigen::Index>(corral.size());
      Matrix kkt = Matrix::Zero(s + 1, s + 1);
      for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b < s; ++b)
          kkt(a, b) = points.col(corral[a]).dot(points.col(corral[b]));
      kkt.block(0, s, s, 1).setOnes();
      kkt.block(s, 0, 1, s).setOnes();
      Vector rhs = Vector::Zero(s + 1);
      rhs[s] = 1.0;
      const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      std::vector<double> alpha(sol.data(), sol.data() + s);

      if (*std::min_element(alpha.begin(), alpha.end()) > 1e-15) {
        lambda = alpha;
        x = combine(lambda);
        break;
      }
      double theta = 1.0;
      for (Eigen::Index a = 0; a < s; ++a)
        if (alpha[a] <= 1e-15) theta = std::min(theta, lambda[a] / (lambda[a] - alpha[a]));
      for (Eigen::Index a = 0; a < s; ++a) lambda[a] = theta * alpha[a] + (1.0 - theta) * lambda[a];

      std::vector<Eigen::Index> kept;
      std::vector<double> kept_lambda;
      for (Eigen::Index a = 0; a < s; ++a) {
        if (lambda[a] > 1e-15) {
          kept.push_back(corral[a]);
          kept_lambda.push_back(lambda[a]);
        }
      }
      if (kept.empty()) {  // numerical breakdown; keep the best single point
        kept.push_back(corral.back());
        kept_lambda.push_back(1.0);
      }
      corral = std::move(kept);
      lambda = std::move(kept_lambda);
      const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
      for (auto& l : lambda) l /= total;
      x = combine(lambda);
    }
  }
  out.point = x;
  out.weights = Vector::Zero(k);
  for (std::size_t i = 0; i < corral.size(); ++i) out.weights[corral[i]] = lambda[i];
  return out;
}

struct InclusionDistance {
  double h = 0.0;
  Vector psi_star;
  Vector nearest;
};

inline Vector default_direction(Eigen::Index d) { return Vector::Unit(d, 0); }

inline InclusionDistance inclusion_distance(const SupportSetModel& model, const Vector& x,
                                            const Vector& z, double t) {
  const Eigen::Index d = z.size();
  InclusionDistance out;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BallSet>) {
          const Vector c = m.center(x, t);
          const double r = m.radius(x, t);
          if (!(r >= 0.0)) throw InvalidArgument("ball radius must be nonnegative");
          const Vector v = z - c;
          const double n = v.norm();
          if (n > r) {
            out.h = n - r;
            out.psi_star = v / n;
            out.nearest = c + r * out.psi_star;
          } else {
            out.nearest = z;
          }
        } else if constexpr (std::is_same_v<M, BoxSet>) {
          const Vector lo = m.lower(x, t), up = m.upper(x, t);
          out.nearest = z.cwiseMax(lo).cwiseMin(up);
          const Vector diff = z - out.nearest;
          out.h = diff.norm();
          if (out.h > 0.0) out.psi_star = diff / out.h;
        } else {
          const auto verts = m.vertices(x, t);
          if (verts.empty()) throw InvalidArgument("polytope needs at least one vertex");
          Matrix shifted(d, static_cast<Eigen::Index>(verts.size()));
          double scale = 0.0;
          for (std::size_t k = 0; k < verts.size(); ++k) {
            shifted.col(k) = verts[k] - z;
            scale = std::max(scale, shifted.col(k).norm());
          }
          const MinNormPoint mn = min_norm_point(shifted);
          const double n = mn.point.norm();
          if (n > 1e-13 * std::max(1.0, scale)) {
            out.h = n;
            out.psi_star = -mn.point / n;
            out.nearest = z + mn.point;
          } else {
            out.nearest = z;
          }
        }
      },
      model);
  if (out.h <= 0.0) {
    out.h = 0.0;
    out.psi_star = default_direction(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inclusion problems in derivative space

inline Vector inclusion_distance_samples(const Trajectory& traj, const InclusionProblemSpec& prob) {
  const Grid& g = traj.grid;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);
  Vector h(g.intervals);
  for (int i = 0; i < g.intervals; ++i) {
    h[i] = inclusion_distance(prob.set_model, xe.row(i).transpose(), traj.z.row(i).transpose(),
                              g.eval_time(i))
               .h;
    if (!std::isfinite(h[i]))
      throw EvaluationError("inclusion distance is not finite", i, g.eval_time(i));
  }
  return h;
}

inline double eval_inclusion_penalty(const Trajectory& traj, const InclusionProblemSpec& prob,
                                     double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("smoothing eps must be >= 0");
  const Vector h = inclusion_distance_samples(traj, prob);
  return smoothed_root(lp_power_sum(h, prob.p, traj.grid), eps, prob.p);
}

inline SampleArray grad_inclusion_penalty(const Trajectory& traj, const InclusionProblemSpec& prob,
                                          double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("smoothing eps must be >= 0");
  const Grid& g = traj.grid;
  const int n = g.intervals;
  const int d = prob.dim_state;
  const double p = prob.p;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);

  std::vector<InclusionDistance> dist(n);
  Vector h(n);
  for (int i = 0; i < n; ++i) {
    dist[i] = inclusion_distance(prob.set_model, xe.row(i).transpose(), traj.z.row(i).transpose(),
                                 g.eval_time(i));
    h[i] = dist[i].h;
  }
  const double power_sum = lp_power_sum(h, p, g);
  if (eps == 0.0 && power_sum == 0.0) throw NondifferentiablePoint();
  const double scale = std::pow(smoothed_root(power_sum, eps, p) + eps, 1.0 - p);

  SampleArray local = SampleArray::Zero(n, d), coupling = SampleArray::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    if (h[i] <= 0.0) continue;
    const double wi = scale * std::pow(h[i], p - 1.0);
    local.row(i) = wi * dist[i].psi_star.transpose();
    coupling.row(i) =
        wi * support_grad_x(prob.set_model, xe.row(i).transpose(), g.eval_time(i), dist[i].psi_star)
                 .transpose();
  }
  return detail::reverse_sweep(g, local, coupling);
}

// Objective and penalty entry points with the same shape as the ODE case, so the
// solver can be instantiated on either problem type.

inline double eval_objective(const Trajectory& traj, const InclusionProblemSpec& prob) {
  const Grid& g = traj.grid;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);
  double sum = 0.0;
  for (int i = 0; i < g.intervals; ++i) {
    const double v = prob.theta(xe.row(i).transpose(), g.eval_time(i));
    detail::check_finite(v, "running cost theta is not finite", i, g.eval_time(i));
    sum += v;
  }
  const double terminal = prob.zeta(x.row(g.intervals).transpose());
  detail::check_finite(terminal, "terminal cost zeta is not finite", g.intervals, g.horizon);
  return g.dt * sum + terminal;
}

inline GradientPair grad_objective(const Trajectory& traj, const InclusionProblemSpec& prob) {
  if (!prob.grad_theta_x || !prob.grad_zeta)
    throw CapabilityError("grad_objective needs grad_theta_x and grad_zeta");
  const Grid& g = traj.grid;
  const int n = g.intervals;
  const SampleArray x = integrate_derivative(g, traj.z, prob.x0);
  const SampleArray xe = evaluation_states(g, x, traj.z);
  SampleArray dtheta(n, prob.dim_state);
  for (int i = 0; i < n; ++i) {
    const Vector gx = prob.grad_theta_x(xe.row(i).transpose(), g.eval_time(i));
    detail::check_finite(gx, prob.dim_state, "grad_theta_x is not finite", i, g.eval_time(i));
    dtheta.row(i) = gx.transpose();
  }
  const Vector gzeta = prob.grad_zeta(x.row(n).transpose());
  SampleArray local = SampleArray::Zero(n, prob.dim_state);
  local.rowwise() += gzeta.transpose();
  return GradientPair{detail::reverse_sweep(g, local, -dtheta), SampleArray(n, 0)};
}

inline double eval_penalty(const Trajectory& traj, const InclusionProblemSpec& prob, double eps) {
  return eval_inclusion_penalty(traj, prob, eps);
}

inline GradientPair grad_penalty(const Trajectory& traj, const InclusionProblemSpec& prob,
                                 double eps) {
  return GradientPair{grad_inclusion_penalty(traj, prob, eps), SampleArray(traj.intervals(), 0)};
}

inline double eval_Phi(const Trajectory& traj, const InclusionProblemSpec& prob,
                       const PenaltyConfig& cfg) {
  cfg.validate();
  const double objective = eval_objective(traj, prob);
  if (cfg.lambda == 0.0) return objective;
  return objective + cfg.lambda * eval_penalty(traj, prob, cfg.smoothing_eps);
}

inline GradientPair grad_Phi(const Trajectory& traj, const InclusionProblemSpec& prob,
                             const PenaltyConfig& cfg) {
  cfg.validate();
  GradientPair g = grad_objective(traj, prob);
  if (cfg.lambda == 0.0) return g;
  g.g_z += cfg.lambda * grad_inclusion_penalty(traj, prob, cfg.smoothing_eps);
  return g;
}

}  // namespace exactpen
