#pragma once

// Computable exactness constants.
//
// The penalty Phi_lambda is exact for lambda > max{lambda0, L / a}, where L is a
// Lipschitz constant of the objective on the sublevel region, a > 0 bounds the
// rate of steepest descent of the penalty term from below and lambda0 is the
// threshold above which Phi_lambda is bounded below. In derivative space
// a = 1 / ((1 + T) * omega(T, M)), with omega the Neumann-series bound on the
// resolvent of the Volterra operator (K h)(t) = int_t^T y(t,s) h(s) ds and M
// the L^{p'} norm of a majorant of |grad_x f| along trajectories.
//
// L and M are sampling estimates over a box region, not certified bounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "exactpen/inclusion.hpp"
#include "json.hpp"

namespace exactpen {

enum class Provenance { sampled, user_supplied, formula };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::sampled:
      return "sampled";
    case Provenance::user_supplied:
      return "user-supplied";
    case Provenance::formula:
      return "formula";
  }
  return "unknown";
}

struct SamplingBudget {
  int samples = 4096;
  std::uint64_t seed = 0;
};

/// Box in (x, u) over which constants are sampled.
struct Region {
  Vector state_lower, state_upper;
  Vector control_lower, control_upper;  // empty for inclusion problems
};

// ---------------------------------------------------------------------------
// Resolvent bound

/// omega(tau, xi) = sum_{n >= 0} (tau^n / n!)^{1/p} xi^n.
inline double resolvent_bound_omega(double tau, double xi, double p) {
  if (!(tau >= 0.0) || !(xi >= 0.0)) throw InvalidArgument("omega needs tau >= 0 and xi >= 0");
  if (!(p > 1.0)) throw InvalidArgument("omega needs p > 1");
  if (tau == 0.0 || xi == 0.0) return 1.0;
  const double log_tau = std::log(tau);
  const double log_xi = std::log(xi);
  double sum = 1.0;
  for (int n = 1; n <= 10000000; ++n) {
    const double log_term = (n * log_tau - std::lgamma(n + 1.0)) / p + n * log_xi;
    const double term = std::exp(log_term);
    sum += term;
    if (std::isinf(sum)) return sum;
    // ratio of consecutive terms, xi * (tau / (n + 1))^{1/p}, decreases in n,
    // so the tail is below a geometric series
    const double ratio = xi * std::pow(tau / (n + 1.0), 1.0 / p);
    if (ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-17 * sum) break;
  }
  return sum;
}

/// Samples y(t_i, s_j) of a d x d kernel on an N-node grid, stored as an
/// (N d) x (N d) block matrix. Only blocks with j > i enter the operator.
struct VolterraKernel {
  Grid grid;
  int dim = 1;
  Matrix blocks;

  Matrix block(int i, int j) const { return blocks.block(i * dim, j * dim, dim, dim); }
};

struct ResolventCheck {
  double inverse_norm_estimate = 0.0;  // lower bound on ||(I - K)^{-1}||_p
  double majorant_norm = 0.0;          // ||y0||_{p'}
  double omega = 1.0;
  bool holds = false;
};

namespace detail {

inline double mixed_norm(const Vector& v, int dim, double p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size() / dim; ++i) s += std::pow(v.segment(i * dim, dim).norm(), p);
  return std::pow(s, 1.0 / p);
}

/// Block-wise |v_i|^{p-2} v_i, the unnormalized dual vector in l_p(l_2).
inline Vector mixed_dual(const Vector& v, int dim, double p) {
  Vector out = Vector::Zero(v.size());
  for (Eigen::Index i = 0; i < v.size() / dim; ++i) {
    const double n = v.segment(i * dim, dim).norm();
    if (n > 0.0) out.segment(i * dim, dim) = std::pow(n, p - 2.0) * v.segment(i * dim, dim);
  }
  return out;
}

}  // namespace detail

/// Discrete (I - K)^{-1} norm versus omega(T, ||y0||_{p'}).
/// The operator uses the grid's strict reverse sum (K h)_i = sum_{j>i} dt y_ij h_j,
/// which is exactly the structure of the discrete adjoint sweep. The norm is
/// estimated by a p-norm power iteration (lower bound) over 32 random starts.
inline ResolventCheck resolvent_bound_check(const VolterraKernel& kernel, double p,
                                            std::optional<Vector> majorant = std::nullopt,
                                            std::uint64_t seed = 0) {
  const int n = kernel.grid.intervals;
  const int d = kernel.dim;
  const double dt = kernel.grid.dt;
  if (kernel.blocks.rows() != n * d || kernel.blocks.cols() != n * d)
    throw InvalidArgument("kernel samples do not match the grid");
  if (!(p > 1.0) || std::isinf(p)) throw InvalidArgument("resolvent check needs p in (1, inf)");

  ResolventCheck out;
  Vector y0(n);
  if (majorant) {
    if (majorant->size() != n) throw InvalidArgument("majorant must have one value per node");
    y0 = *majorant;
  } else {
    for (int j = 0; j < n; ++j) {
      double m = 0.0;
      for (int i = 0; i < n; ++i) {
        const Matrix b = kernel.block(i, j);
        m = std::max(m, d == 1 ? std::abs(b(0, 0)) : b.jacobiSvd().singularValues()[0]);
      }
      y0[j] = m;
    }
  }
  const double pc = conjugate_exponent(p);
  out.majorant_norm = std::pow(dt * y0.array().pow(pc).sum(), 1.0 / pc);
  out.omega = resolvent_bound_omega(kernel.grid.horizon, out.majorant_norm, p);

  Matrix op = Matrix::Identity(n * d, n * d);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) op.block(i * d, j * d, d, d) -= dt * kernel.block(i, j);
  if (!op.allFinite()) return out;
  const Matrix op_t = op.transpose();
  const auto upper = op.triangularView<Eigen::Upper>();
  const auto lower = op_t.triangularView<Eigen::Lower>();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double best = 0.0;
  for (int start = 0; start < 32; ++start) {
    Vector x(n * d);
    for (auto& v : x) v = normal(rng);
    x /= detail::mixed_norm(x, d, p);
    double prev = 0.0;
    for (int it = 0; it < 200; ++it) {
      const Vector y = upper.solve(x);
      const double ratio = detail::mixed_norm(y, d, p);  // ||x||_p = 1
      best = std::max(best, ratio);
      const Vector s = lower.solve(detail::mixed_dual(y, d, p));
      x = detail::mixed_dual(s, d, pc);
      const double nx = detail::mixed_norm(x, d, p);
      if (!(nx > 0.0)) break;
      x /= nx;
      if (std::abs(ratio - prev) <= 1e-14 * ratio) break;
      prev = ratio;
    }
  }
  out.inverse_norm_estimate = best;
  out.holds = std::isfinite(best) && best <= out.omega * (1.0 + 1e-12);
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

/// Grid x random hybrid over a box, half the budget each. The tensor grid uses
/// an odd number of points per axis so box centers are always hit.
inline std::vector<Vector> box_samples(const Vector& lower, const Vector& upper, int budget,
                                       std::uint64_t seed) {
  const auto dims = lower.size();
  std::vector<Vector> out;
  if (dims == 0) return {Vector()};
  const int half = std::max(1, budget / 2);
  int per_axis = 1;
  while (std::pow(per_axis + 2, static_cast<double>(dims)) <= half) per_axis += 2;
  const long total = static_cast<long>(std::pow(per_axis, static_cast<double>(dims)) + 0.5);
  for (long idx = 0; idx < total; ++idx) {
    Vector v(dims);
    long rem = idx;
    for (Eigen::Index k = 0; k < dims; ++k) {
      const int pos = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      const double frac = per_axis == 1 ? 0.5 : static_cast<double>(pos) / (per_axis - 1);
      v[k] = lower[k] + frac * (upper[k] - lower[k]);
    }
    out.push_back(std::move(v));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < half; ++s) {
    Vector v(dims);
    for (Eigen::Index k = 0; k < dims; ++k) v[k] = lower[k] + unit(rng) * (upper[k] - lower[k]);
    out.push_back(std::move(v));
  }
  return out;
}

/// Samples (x, u, t) packed as one vector [x; u; t].
inline std::vector<Vector> region_samples(const Region& r, double horizon, const SamplingBudget& b) {
  const auto d = r.state_lower.size();
  const auto m = r.control_lower.size();
  Vector lo(d + m + 1), hi(d + m + 1);
  lo << r.state_lower, r.control_lower, 0.0;
  hi << r.state_upper, r.control_upper, horizon;
  return box_samples(lo, hi, b.samples, b.seed);
}

inline Vector random_unit(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vector v(d);
  do {
    for (auto& c : v) c = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Kernel bound and descent rate

struct KernelBound {
  double M = 0.0;                  // T^{1/p'} * max_jacobian_norm
  double max_jacobian_norm = 0.0;  // sampled max of ||grad_x f||_2
  int samples = 0;
  Provenance provenance = Provenance::sampled;
};

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.size() == 1) return std::abs(a(0, 0));
  return a.jacobiSvd().singularValues()[0];
}

inline KernelBound kernel_bound_estimate(const ProblemSpec& prob, const Region& region,
                                         const SamplingBudget& budget) {
  if (!prob.jac_f_x) throw CapabilityError("kernel_bound_estimate needs jac_f_x");
  const int d = prob.dim_state, m = prob.dim_control;
  KernelBound out;
  for (const Vector& s : detail::region_samples(region, prob.horizon, budget)) {
    const Matrix j = prob.jac_f_x(s.head(d), s.segment(d, m), s[d + m]);
    out.max_jacobian_norm = std::max(out.max_jacobian_norm, spectral_norm(j));
    ++out.samples;
  }
  out.M = horizon_power(prob.horizon, conjugate_exponent(prob.p)) * out.max_jacobian_norm;
  return out;
}

/// Inclusion version: the kernel is <grad_x s(F(x,s), psi(s)), psi(t)>, majorized
/// by max over unit psi of |grad_x s(F(x,t), psi)|; psi is sampled as well.
inline KernelBound kernel_bound_estimate(const InclusionProblemSpec& prob, const Region& region,
                                         const SamplingBudget& budget) {
  const int d = prob.dim_state;
  Region state_only{region.state_lower, region.state_upper, Vector(), Vector()};
  std::mt19937_64 rng(budget.seed ^ 0x9e3779b97f4a7c15ULL);
  KernelBound out;
  for (const Vector& s : detail::region_samples(state_only, prob.horizon, budget)) {
    const Vector x = s.head(d);
    for (int k = 0; k < 8; ++k) {
      const Vector psi = k < d ? Vector(Vector::Unit(d, k)) : detail::random_unit(rng, d);
      out.max_jacobian_norm =
          std::max(out.max_jacobian_norm, support_grad_x(prob.set_model, x, s[d], psi).norm());
    }
    ++out.samples;
  }
  out.M = horizon_power(prob.horizon, conjugate_exponent(prob.p)) * out.max_jacobian_norm;
  return out;
}

inline double descent_rate_bound(double M, double horizon, double p) {
  if (!(M >= 0.0)) throw InvalidArgument("kernel bound M must be >= 0");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  return 1.0 / ((1.0 + horizon) * resolvent_bound_omega(horizon, M, p));
}

// ---------------------------------------------------------------------------
// Lipschitz estimate

struct LipschitzEstimate {
  double L = 0.0;
  double max_grad_theta_x = 0.0;
  double max_grad_theta_u = 0.0;
  double max_grad_zeta = 0.0;
  int samples = 0;
  Provenance provenance = Provenance::sampled;
};

/// L = T * max|grad_x theta| + T^{1/q'} * max|grad_u theta| + max|grad zeta|.
inline LipschitzEstimate lipschitz_estimate(const ProblemSpec& prob, const Region& region,
                                            const SamplingBudget& budget) {
  if (!prob.grad_theta_x || !prob.grad_theta_u || !prob.grad_zeta)
    throw CapabilityError("lipschitz_estimate needs grad_theta_x, grad_theta_u and grad_zeta");
  const int d = prob.dim_state, m = prob.dim_control;
  LipschitzEstimate out;
  for (const Vector& s : detail::region_samples(region, prob.horizon, budget)) {
    const Vector x = s.head(d), u = s.segment(d, m);
    const double t = s[d + m];
    out.max_grad_theta_x = std::max(out.max_grad_theta_x, prob.grad_theta_x(x, u, t).norm());
    out.max_grad_theta_u = std::max(out.max_grad_theta_u, prob.grad_theta_u(x, u, t).norm());
    ++out.samples;
  }
  for (const Vector& x : detail::box_samples(region.state_lower, region.state_upper,
                                             budget.samples, budget.seed + 1))
    out.max_grad_zeta = std::max(out.max_grad_zeta, prob.grad_zeta(x).norm());
  out.L = prob.horizon * out.max_grad_theta_x +
          horizon_power(prob.horizon, conjugate_exponent(prob.q)) * out.max_grad_theta_u +
          out.max_grad_zeta;
  return out;
}

inline LipschitzEstimate lipschitz_estimate(const InclusionProblemSpec& prob, const Region& region,
                                            const SamplingBudget& budget) {
  if (!prob.grad_theta_x || !prob.grad_zeta)
    throw CapabilityError("lipschitz_estimate needs grad_theta_x and grad_zeta");
  const int d = prob.dim_state;
  Region state_only{region.state_lower, region.state_upper, Vector(), Vector()};
  LipschitzEstimate out;
  for (const Vector& s : detail::region_samples(state_only, prob.horizon, budget)) {
    out.max_grad_theta_x = std::max(out.max_grad_theta_x, prob.grad_theta_x(s.head(d), s[d]).norm());
    ++out.samples;
  }
  for (const Vector& x : detail::box_samples(region.state_lower, region.state_upper,
                                             budget.samples, budget.seed + 1))
    out.max_grad_zeta = std::max(out.max_grad_zeta, prob.grad_zeta(x).norm());
  out.L = prob.horizon * out.max_grad_theta_x + out.max_grad_zeta;
  return out;
}

// ---------------------------------------------------------------------------
// Sublevel bounds

/// Constants of the linear-growth bounds
///   |f(x,u,t)| <= C_R |x| + omega_R(t),  theta >= -C_R |x| - omega_R(t),
///   zeta(x) >= -K1 |x| - K2.
struct GronwallConstants {
  double C_R = 0.0;
  double omega_R_l1 = 0.0;  // ||omega_R||_1
  double K1 = 0.0;
  double K2 = 0.0;
};

struct SublevelBound {
  double alpha_bar = 0.0;  // |x0| + ||omega_R||_1 + T^{1/p'} delta
  double xsup = 0.0;       // sup-norm bound on perturbed trajectories
  double C1 = 0.0;         // xsup at delta = 0
  double C2 = 0.0;         // growth of xsup per unit delta
  double lambda0 = 0.0;    // C2 (T C_R + K1)
};

/// Grönwall majorant for x' = f(x,u,t) + w, ||w||_p < delta:
/// |x(t)| <= alpha_bar * exp(C_R t).
inline SublevelBound gronwall_sublevel_bound(const GronwallConstants& c, double horizon,
                                             double x0_norm, double delta, double p) {
  if (c.C_R < 0 || c.omega_R_l1 < 0 || c.K1 < 0 || c.K2 < 0 || x0_norm < 0)
    throw InvalidArgument("Grönwall constants must be nonnegative");
  if (!(delta >= 0.0)) throw InvalidArgument("delta must be nonnegative");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  const double growth = std::exp(c.C_R * horizon);
  const double holder = horizon_power(horizon, conjugate_exponent(p));
  SublevelBound out;
  out.alpha_bar = x0_norm + c.omega_R_l1 + holder * delta;
  out.xsup = out.alpha_bar * growth;
  out.C1 = (x0_norm + c.omega_R_l1) * growth;
  out.C2 = holder * growth;
  out.lambda0 = out.C2 * (horizon * c.C_R + c.K1);
  return out;
}

/// Which lower-growth hypothesis the caller declares for boundedness of Phi_lambda.
enum class CoerciveCase {
  bounded_control,        // U bounded in L_inf, linear growth (the Grönwall case)
  bounded_lq_control,     // U bounded in L_q, theta >= -C(|x| + |u|^q) - omega
  coercive_in_control,    // zeta bounded below, theta >= C|u|^q + omega
  coercive_in_state,      // zeta bounded below, theta >= C(|x|^s + |u|^q) - omega
};

inline CoerciveCase parse_coercive_case(const std::string& tag) {
  if (tag == "1" || tag == "bounded-control") return CoerciveCase::bounded_control;
  if (tag == "2a" || tag == "bounded-lq-control") return CoerciveCase::bounded_lq_control;
  if (tag == "2b" || tag == "coercive-in-control") return CoerciveCase::coercive_in_control;
  if (tag == "3" || tag == "coercive-in-state") return CoerciveCase::coercive_in_state;
  throw InvalidArgument("unknown boundedness case '" + tag + "'");
}

struct CoerciveConstants {
  CoerciveCase which = CoerciveCase::coercive_in_control;
  double zeta_inf = 0.0;      // inf zeta (coercive cases)
  double omega_const = 0.0;   // omega(t) == omega_const in the theta lower bound
  // bounded-control cases: the Grönwall split ||x||_inf <= C1 + C2 * phi
  double C = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
  double control_lq_term = 0.0;  // C * sup ||u||_q^q over U
};

struct CoerciveBound {
  double lower_bound = 0.0;
  double lambda_threshold = 0.0;  // bound valid for lambda >= this
  bool bounded_below = false;
};

inline CoerciveBound coercive_lower_bound(const CoerciveConstants& c, double horizon) {
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  CoerciveBound out;
  out.bounded_below = true;
  switch (c.which) {
    case CoerciveCase::coercive_in_control:
      // Phi >= I >= inf zeta + int omega.
      out.lower_bound = c.zeta_inf + horizon * c.omega_const;
      return out;
    case CoerciveCase::coercive_in_state:
      out.lower_bound = c.zeta_inf - horizon * std::abs(c.omega_const);
      return out;
    case CoerciveCase::bounded_control:
    case CoerciveCase::bounded_lq_control:
      // -T C (C1 + C2 phi) - ||omega||_1 - K1 (C1 + C2 phi) - K2 + lambda phi
      out.lambda_threshold = c.C2 * (horizon * c.C + c.K1);
      out.lower_bound = -c.C1 * (horizon * c.C + c.K1) - horizon * std::abs(c.omega_const) - c.K2 -
                        (c.which == CoerciveCase::bounded_lq_control ? c.control_lq_term : 0.0);
      return out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Growth-condition diagnostic

struct GrowthFit {
  double order_l = 0.0;
  double order_s = 1.0;
  double radius = 0.0;
  double C_R = 0.0;
  Vector omega_R;             // one value per grid node
  double omega_norm_s = 0.0;  // ||omega_R||_s on the grid
  double max_violation = 0.0;
  bool certified = false;
  bool box_dependent = false;  // C_R grows when the control box is doubled
  int samples = 0;
};

namespace detail {

struct GrowthSample {
  int node;
  double u_norm;
  double g_norm;
};

inline std::vector<GrowthSample> growth_samples(const VectorField& g, double radius,
                                                const Vector& lo, const Vector& hi,
                                                const Grid& grid, int dim_state,
                                                const SamplingBudget& budget) {
  const int nodes = grid.intervals + 1;
  const int per_node = std::max(16, budget.samples / nodes);
  std::mt19937_64 rng(budget.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GrowthSample> out;
  const auto m = lo.size();
  for (int i = 0; i < nodes; ++i) {
    const double t = grid.nodes[i];
    const auto corners = box_samples(lo, hi, 2 * std::min<int>(per_node / 2, 9), budget.seed + i);
    for (int s = 0; s < per_node; ++s) {
      const Vector dir = random_unit(rng, dim_state);
      const Vector x = radius * std::pow(unit(rng), 1.0 / dim_state) * dir;
      Vector u(m);
      if (s < static_cast<int>(corners.size())) {
        u = corners[s];
      } else {
        for (Eigen::Index k = 0; k < m; ++k) u[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
      }
      out.push_back({i, u.norm(), g(x, u, t).norm()});
    }
  }
  return out;
}

inline double fit_growth_constant(const std::vector<GrowthSample>& samples, double l) {
  double c = 0.0;
  for (const auto& s : samples)
    if (s.u_norm >= 1.0) c = std::max(c, s.g_norm / std::pow(s.u_norm, l));
  return c;
}

}  // namespace detail

/// Fits |g(x,u,t)| <= C_R |u|^l + omega_R(t) on samples with |x| <= R and u in
/// the box: C_R from samples with |u| >= 1, then the smallest omega_R per node.
inline GrowthFit growth_condition_fit(const VectorField& g, double l, double s, double radius,
                                      const Vector& control_lower, const Vector& control_upper,
                                      const Grid& grid, int dim_state,
                                      const SamplingBudget& budget) {
  if (!(radius > 0.0)) throw InvalidArgument("growth fit needs R > 0");
  if (!(l >= 0.0) || !(s >= 1.0)) throw InvalidArgument("growth order needs l >= 0, s >= 1");
  const auto samples =
      detail::growth_samples(g, radius, control_lower, control_upper, grid, dim_state, budget);
  GrowthFit out;
  out.order_l = l;
  out.order_s = s;
  out.radius = radius;
  out.samples = static_cast<int>(samples.size());
  out.C_R = detail::fit_growth_constant(samples, l);
  out.omega_R = Vector::Zero(grid.intervals + 1);
  for (const auto& smp : samples)
    out.omega_R[smp.node] =
        std::max(out.omega_R[smp.node], smp.g_norm - out.C_R * std::pow(smp.u_norm, l));
  out.omega_R = out.omega_R.cwiseMax(0.0);
  double viol = 0.0;
  for (const auto& smp : samples)
    viol = std::max(viol, smp.g_norm - out.C_R * std::pow(smp.u_norm, l) - out.omega_R[smp.node]);
  out.max_violation = viol;

  // omega_R norm with trapezoidal weights on the nodes
  if (std::isinf(s)) {
    out.omega_norm_s = out.omega_R.maxCoeff();
  } else {
    double acc = 0.0;
    for (int i = 0; i <= grid.intervals; ++i) {
      const double w = (i == 0 || i == grid.intervals) ? 0.5 : 1.0;
      acc += w * grid.dt * std::pow(out.omega_R[i], s);
    }
    out.omega_norm_s = std::pow(acc, 1.0 / s);
  }

  // A genuine growth bound of order l survives enlarging the box.
  const Vector mid = 0.5 * (control_lower + control_upper);
  const Vector big_lo = mid + 2.0 * (control_lower - mid);
  const Vector big_hi = mid + 2.0 * (control_upper - mid);
  const auto big = detail::growth_samples(g, radius, big_lo, big_hi, grid, dim_state, budget);
  const double c_big = detail::fit_growth_constant(big, l);
  out.box_dependent = c_big > out.C_R + 1e-2 * std::max(1.0, out.C_R);
  return out;
}

// ---------------------------------------------------------------------------
// Threshold and certificate

inline double lambda_star_bound(double L, double a, double lambda0) {
  if (!(a > 0.0)) throw InvalidArgument("descent rate a must be positive");
  if (!(L >= 0.0) || !(lambda0 >= 0.0)) throw InvalidArgument("L and lambda0 must be >= 0");
  return std::max(lambda0, L / a);
}

/// Problem-specific inputs of the certificate pipeline, declared by the caller.
struct CertificateRecipe {
  CoerciveCase boundedness = CoerciveCase::bounded_control;
  GronwallConstants gronwall;
  double delta = 1.0;          // radius of the near-feasible set Omega_delta
  Vector control_lower;        // control region used for sampling
  Vector control_upper;
  double inflation = 1.1;      // state box = [-inflation * xsup, inflation * xsup]^d
  std::string note;
};

struct ExactnessCertificate {
  double L = 0.0;
  double M = 0.0;
  double omega = 1.0;
  double a = 0.0;
  double lambda0 = 0.0;
  double lambda_star = 0.0;
  double xsup = 0.0;
  Region region;
  std::map<std::string, Provenance> provenance;
  std::vector<std::string> notes;
  int samples = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline Region certificate_region(const SublevelBound& bound, int d, const CertificateRecipe& r) {
  const double half = r.inflation * bound.xsup;
  return Region{Vector::Constant(d, -half), Vector::Constant(d, half), r.control_lower,
                r.control_upper};
}

template <class Problem>
ExactnessCertificate certify_impl(const Problem& prob, const CertificateRecipe& recipe,
                                  const SamplingBudget& budget) {
  const SublevelBound sub =
      gronwall_sublevel_bound(recipe.gronwall, prob.horizon, prob.x0.norm(), recipe.delta, prob.p);
  ExactnessCertificate c;
  c.samples = budget.samples;
  c.seed = budget.seed;
  c.xsup = sub.xsup;
  c.region = certificate_region(sub, prob.dim_state, recipe);
  c.provenance["xsup"] = Provenance::formula;
  c.provenance["region"] = Provenance::formula;

  if (recipe.boundedness == CoerciveCase::bounded_control) {
    c.lambda0 = sub.lambda0;
    c.provenance["lambda0"] = Provenance::formula;
  } else {
    c.lambda0 = 0.0;  // Phi_lambda >= I is bounded below for every lambda >= 0
    c.provenance["lambda0"] = Provenance::user_supplied;
  }

  const KernelBound kb = kernel_bound_estimate(prob, c.region, budget);
  c.M = kb.M;
  c.provenance["M"] = Provenance::sampled;
  c.omega = resolvent_bound_omega(prob.horizon, c.M, prob.p);
  c.provenance["omega"] = Provenance::formula;
  c.a = descent_rate_bound(c.M, prob.horizon, prob.p);
  c.provenance["a"] = Provenance::formula;
  const LipschitzEstimate le = lipschitz_estimate(prob, c.region, budget);
  c.L = le.L;
  c.provenance["L"] = Provenance::sampled;
  if (c.a > 0.0) {
    c.lambda_star = lambda_star_bound(c.L, c.a, c.lambda0);
  } else {
    c.lambda_star = kInfinity;
    c.notes.push_back("omega overflows double precision: a underflows to 0 and lambda_star is unbounded");
  }
  c.provenance["lambda_star"] = Provenance::formula;
  c.notes.push_back("L and M are sampling estimates over the region, not certified bounds");
  c.notes.push_back("region: Grönwall sup-norm box inflated by " +
                    std::to_string(recipe.inflation));
  if (!recipe.note.empty()) c.notes.push_back(recipe.note);
  return c;
}

}  // namespace detail

inline ExactnessCertificate certify(const ProblemSpec& prob, const CertificateRecipe& recipe,
                                    const SamplingBudget& budget) {
  return detail::certify_impl(prob, recipe, budget);
}

inline ExactnessCertificate certify(const InclusionProblemSpec& prob,
                                    const CertificateRecipe& recipe,
                                    const SamplingBudget& budget) {
  return detail::certify_impl(prob, recipe, budget);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json vector_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline void to_json(nlohmann::json& j, const ExactnessCertificate& c) {
  auto field = [&](const char* name, double value) {
    const auto it = c.provenance.find(name);
    return nlohmann::json{{"value", value},
                          {"provenance", it == c.provenance.end() ? "formula" : to_string(it->second)}};
  };
  j = nlohmann::json{
      {"L", field("L", c.L)},
      {"M", field("M", c.M)},
      {"omega", field("omega", c.omega)},
      {"a", field("a", c.a)},
      {"lambda0", field("lambda0", c.lambda0)},
      {"lambda_star", field("lambda_star", c.lambda_star)},
      {"xsup", field("xsup", c.xsup)},
      {"region",
       {{"state_lower", vector_json(c.region.state_lower)},
        {"state_upper", vector_json(c.region.state_upper)},
        {"control_lower", vector_json(c.region.control_lower)},
        {"control_upper", vector_json(c.region.control_upper)}}},
      {"sampling", {{"samples", c.samples}, {"seed", c.seed}}},
      {"notes", c.notes},
  };
}

inline void to_json(nlohmann::json& j, const GrowthFit& g) {
  j = nlohmann::json{{"order", {g.order_l, g.order_s}},
                     {"radius", g.radius},
                     {"C_R", g.C_R},
                     {"omega_R", vector_json(g.omega_R)},
                     {"omega_R_norm", g.omega_norm_s},
                     {"max_violation", g.max_violation},
                     {"certified", g.certified},
                     {"box_dependent", g.box_dependent},
                     {"samples", g.samples},
                     {"provenance", "sampled"}};
}

}  // namespace exactpen
