#pragma once

// Minimization of the smoothed penalty function over (z, u) with u in U.
//
// Inner solver: spectral projected gradient (Barzilai-Borwein steps with a
// nonmonotone Armijo test over the last `memory` values). The gradient used for
// steps is the L2 gradient g / dt, so step lengths do not depend on the grid.
// Outer loop: lambda grows and the smoothing eps shrinks until the true penalty
// term is below tol_feas at a stationary point.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "exactpen/functionals.hpp"
#include "exactpen/inclusion.hpp"

namespace exactpen {

struct SolverConfig {
  int max_outer = 30;
  int max_inner = 20000;
  double lambda_init = 1.0;
  double lambda_growth = 10.0;
  double lambda_max = 1e4;
  double eps_init = 1e-2;
  double eps_decay = 0.1;
  double eps_min = 1e-10;
  double tol_feas = 1e-6;
  double tol_stat = 1e-6;
  double tol_plateau = 1e-3;
  double step_init = 1.0;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  int memory = 10;
  int trace_every = 1;  // keep every k-th inner iteration in the trace

  void validate() const {
    if (max_outer < 1 || max_inner < 1) throw InvalidArgument("iteration limits must be >= 1");
    if (!(lambda_init > 0.0)) throw InvalidArgument("lambda_init must be > 0");
    if (!(lambda_growth > 1.0)) throw InvalidArgument("lambda_growth must be > 1");
    if (!(lambda_max >= lambda_init)) throw InvalidArgument("lambda_max must be >= lambda_init");
    if (!(eps_init > 0.0) || !(eps_min > 0.0) || eps_min > eps_init)
      throw InvalidArgument("eps schedule needs 0 < eps_min <= eps_init");
    if (!(eps_decay > 0.0 && eps_decay < 1.0)) throw InvalidArgument("eps_decay must lie in (0, 1)");
    if (!(tol_feas > 0.0) || !(tol_stat > 0.0) || !(tol_plateau > 0.0))
      throw InvalidArgument("tolerances must be > 0");
    if (!(step_init > 0.0)) throw InvalidArgument("step_init must be > 0");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidArgument("backtrack must lie in (0, 1)");
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
      throw InvalidArgument("sufficient_decrease must lie in (0, 1)");
    if (memory < 1) throw InvalidArgument("nonmonotone memory must be >= 1");
    if (trace_every < 1) throw InvalidArgument("trace_every must be >= 1");
  }
};

enum class Status { feasible_stationary, stationary_infeasible, iteration_limit, line_search_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::feasible_stationary:
      return "feasible-stationary";
    case Status::stationary_infeasible:
      return "stationary-infeasible";
    case Status::iteration_limit:
      return "iteration-limit";
    case Status::line_search_failure:
      return "line-search-failure";
  }
  return "unknown";
}

struct IterationRecord {
  int iteration = 0;
  double lambda = 0.0;
  double eps = 0.0;
  double Phi = 0.0;  // smoothed value being minimized
  double I = 0.0;
  double phi = 0.0;  // true penalty term, eps = 0
  double stationarity = 0.0;
  double step = 0.0;
};

struct Solution {
  Trajectory trajectory;
  double objective = 0.0;
  double phi = 0.0;
  double Phi = 0.0;  // I + lambda * phi with the true phi
  double lambda = 0.0;
  double eps = 0.0;
  double stationarity = 0.0;
  Status status = Status::iteration_limit;
  int inner_iterations = 0;
  int outer_iterations = 0;
  std::vector<IterationRecord> trace;
  std::vector<double> wall_times;  // seconds since solve start, parallel to trace
  std::optional<double> lambda_star;
  std::optional<bool> exceeded_lambda_star;
};

/// Per-sample Euclidean projection of a control array onto U.
inline SampleArray project_control(const SampleArray& u, const ControlSet& set) {
  SampleArray out = u;
  for (Eigen::Index i = 0; i < out.rows(); ++i) set.project_in_place(out.row(i));
  return out;
}

namespace detail {

inline const ControlSet& control_set_of(const ProblemSpec& p) { return p.control_set; }
inline const ControlSet& control_set_of(const InclusionProblemSpec&) {
  static const ControlSet none = ControlSet::unconstrained();
  return none;
}
inline int control_dim_of(const ProblemSpec& p) { return p.dim_control; }
inline int control_dim_of(const InclusionProblemSpec&) { return 0; }

inline double penalty_power_sum(const Trajectory& traj, const ProblemSpec& prob) {
  return lp_power_sum(residual(traj, prob).values, prob.p, traj.grid);
}

inline double penalty_power_sum(const Trajectory& traj, const InclusionProblemSpec& prob) {
  const Vector h = inclusion_distance_samples(traj, prob);
  double s = 0.0;
  for (double v : h)
    if (v > 0.0) s += std::pow(v, prob.p);
  return traj.grid.dt * s;
}

/// Weighted objective w_I * I + lambda * phi_eps, with the unsmoothed parts kept.
struct Evaluation {
  double value = 0.0;
  double I = 0.0;
  double phi = 0.0;
};

template <class Problem>
Evaluation evaluate(const Trajectory& traj, const Problem& prob, double w_obj, double lambda,
                    double eps) {
  Evaluation e;
  e.I = eval_objective(traj, prob);
  const double power = penalty_power_sum(traj, prob);
  e.phi = std::pow(power, 1.0 / prob.p);
  e.value = w_obj * e.I + lambda * smoothed_root(power, eps, prob.p);
  return e;
}

template <class Problem>
GradientPair gradient(const Trajectory& traj, const Problem& prob, double w_obj, double lambda,
                      double eps) {
  GradientPair g = grad_penalty(traj, prob, eps);
  g.g_z *= lambda;
  g.g_u *= lambda;
  if (w_obj != 0.0) {
    const GradientPair go = grad_objective(traj, prob);
    g.g_z += w_obj * go.g_z;
    g.g_u += w_obj * go.g_u;
  }
  return g;
}

inline double dot(const GradientPair& a, const GradientPair& b) {
  return (a.g_z.array() * b.g_z.array()).sum() + (a.g_u.array() * b.g_u.array()).sum();
}

struct SpgResult {
  Trajectory traj;
  Evaluation eval;
  double stationarity = 0.0;
  Status status = Status::iteration_limit;
  int iterations = 0;
};

struct TraceSink {
  std::vector<IterationRecord>* records = nullptr;
  std::vector<double>* wall = nullptr;
  std::chrono::steady_clock::time_point start;
  int every = 1;
  int offset = 0;  // global iteration count before this inner run
};

/// One inner solve at fixed (lambda, eps). When stop_on_feasible is set the run
/// ends as soon as the true phi drops to tol_feas (restoration mode).
template <class Problem>
SpgResult spg(const Problem& prob, double w_obj, double lambda, double eps, Trajectory traj,
              const SolverConfig& cfg, bool stop_on_feasible, TraceSink& sink) {
  const ControlSet& uset = control_set_of(prob);
  const double dt = traj.grid.dt;
  traj.u = project_control(traj.u, uset);

  auto project_step = [&](const Trajectory& from, const GradientPair& g, double alpha) {
    GradientPair d{-(alpha / dt) * g.g_z, from.u - (alpha / dt) * g.g_u};
    d.g_u = project_control(d.g_u, uset) - from.u;
    return d;
  };
  auto l2 = [&](const GradientPair& d) { return std::sqrt(dt * dot(d, d)); };
  // Near feasibility the smoothed penalty has curvature about lambda / eps, so
  // the computed gradient carries noise of that size times the rounding error
  // of the iterate; stationarity below that level cannot be observed.
  auto stat_floor = [&](const Trajectory& t) {
    const double scale = std::max({1.0, t.z.cwiseAbs().maxCoeff(),
                                   t.u.size() ? t.u.cwiseAbs().maxCoeff() : 0.0});
    return 64.0 * std::numeric_limits<double>::epsilon() * (lambda / eps) * scale;
  };

  Evaluation cur = evaluate(traj, prob, w_obj, lambda, eps);
  GradientPair g = gradient(traj, prob, w_obj, lambda, eps);
  std::deque<double> history{cur.value};

  SpgResult best{traj, cur, 0.0, Status::iteration_limit, 0};
  double alpha = cfg.step_init;
  {
    const GradientPair d1 = project_step(traj, g, 1.0);
    const double dmax = std::max(d1.g_z.cwiseAbs().maxCoeff(),
                                 d1.g_u.size() ? d1.g_u.cwiseAbs().maxCoeff() : 0.0);
    if (dmax > 1.0) alpha = cfg.step_init / dmax;
  }
  double last_step = 0.0;
  std::deque<double> short_steps;  // recent BB2 values
  double tau = 0.5;
  constexpr double round_off = 4.0 * std::numeric_limits<double>::epsilon();

  for (int k = 0;; ++k) {
    const double stat = l2(project_step(traj, g, 1.0));
    if (cur.value < best.eval.value) best = SpgResult{traj, cur, stat, Status::iteration_limit, k};

    const int global = sink.offset + k;
    if (sink.records && global % sink.every == 0) {
      sink.records->push_back({global, lambda, eps, cur.value, cur.I, cur.phi, stat, last_step});
      sink.wall->push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - sink.start).count());
    }

    const bool feasible = cur.phi <= cfg.tol_feas;
    if ((stop_on_feasible && feasible) || stat <= std::max(cfg.tol_stat, stat_floor(traj))) {
      return SpgResult{traj, cur, stat,
                       feasible ? Status::feasible_stationary : Status::stationary_infeasible, k};
    }
    if (k >= cfg.max_inner) {
      best.stationarity = l2(project_step(best.traj, gradient(best.traj, prob, w_obj, lambda, eps), 1.0));
      best.iterations = k;
      return best;
    }

    const GradientPair d = project_step(traj, g, alpha);
    const double slope = dot(g, d);
    const double ref = *std::max_element(history.begin(), history.end());

    double t = 1.0;
    Trajectory trial = traj;
    Evaluation next;
    bool accepted = false;
    while (t >= 1e-16) {
      trial.z = traj.z + t * d.g_z;
      trial.u = traj.u + t * d.g_u;
      try {
        next = evaluate(trial, prob, w_obj, lambda, eps);
        // slack at the rounding level of the reference value, so that progress
        // below the resolution of Phi is not mistaken for failure
        accepted = std::isfinite(next.value) &&
                   next.value <= ref + cfg.sufficient_decrease * t * slope + round_off * std::abs(ref);
      } catch (const EvaluationError&) {
        accepted = false;
      }
      if (accepted) break;
      t *= cfg.backtrack;
    }
    if (!accepted) {
      best.status = Status::line_search_failure;
      best.iterations = k;
      best.stationarity = l2(project_step(best.traj, gradient(best.traj, prob, w_obj, lambda, eps), 1.0));
      return best;
    }

    const GradientPair g_next = gradient(trial, prob, w_obj, lambda, eps);
    GradientPair s{trial.z - traj.z, trial.u - traj.u};
    GradientPair y{g_next.g_z - g.g_z, g_next.g_u - g.g_u};
    const double sy = dot(s, y) / dt;
    const double ss = dot(s, s);
    if (sy > 0.0) {
      // Adaptive alternation between the long (BB1) and short (BB2) step.
      const double yy = dot(y, y) / (dt * dt);
      const double bb1 = ss / sy, bb2 = sy / yy;
      short_steps.push_back(bb2);
      if (short_steps.size() > 3) short_steps.pop_front();
      if (bb2 / bb1 < tau) {
        alpha = *std::min_element(short_steps.begin(), short_steps.end());
        tau *= 0.9;
      } else {
        alpha = bb1;
        tau *= 1.1;
      }
      alpha = std::clamp(alpha, 1e-12, 1e12);
    } else {
      alpha = 1e12;
    }
    last_step = std::sqrt(dt * ss);

    traj = std::move(trial);
    cur = next;
    g = g_next;
    history.push_back(cur.value);
    if (static_cast<int>(history.size()) > cfg.memory) history.pop_front();
  }
}

template <class Problem>
Trajectory default_initial(const Problem& prob, const Grid& grid) {
  Trajectory t = make_trajectory(grid, prob.dim_state, control_dim_of(prob));
  t.u = project_control(t.u, control_set_of(prob));
  return t;
}

template <class Problem>
void check_init(const Problem& prob, const Trajectory& init) {
  prob.validate();
  if (init.z.rows() != init.grid.intervals || init.z.cols() != prob.dim_state ||
      init.u.rows() != init.grid.intervals || init.u.cols() != control_dim_of(prob))
    throw InvalidArgument("initial trajectory does not match the problem dimensions");
  require_finite(init.z, "initial z");
  require_finite(init.u, "initial u");
}

template <class Problem>
Solution finish(const Problem& prob, SpgResult r, double lambda, double eps) {
  Solution s;
  s.trajectory = std::move(r.traj);
  reconstruct_states(s.trajectory, prob.x0);
  s.objective = r.eval.I;
  s.phi = r.eval.phi;
  s.Phi = s.objective + lambda * s.phi;
  s.lambda = lambda;
  s.eps = eps;
  s.stationarity = r.stationarity;
  s.status = r.status;
  s.inner_iterations = r.iterations;
  s.outer_iterations = 1;
  return s;
}

/// Inner solve with the single eps-halving retry after a line-search failure.
template <class Problem>
SpgResult inner_solve(const Problem& prob, double w_obj, double lambda, double& eps,
                      const Trajectory& init, const SolverConfig& cfg, bool stop_on_feasible,
                      TraceSink& sink) {
  SpgResult r = spg(prob, w_obj, lambda, eps, init, cfg, stop_on_feasible, sink);
  if (r.status == Status::line_search_failure) {
    sink.offset += r.iterations + 1;
    eps *= 0.5;
    SpgResult retry = spg(prob, w_obj, lambda, eps, r.traj, cfg, stop_on_feasible, sink);
    retry.iterations += r.iterations + 1;
    sink.offset -= r.iterations + 1;
    return retry;
  }
  return r;
}

}  // namespace detail

template <class Problem>
Solution minimize_Phi(const Problem& prob, double lambda, double eps, const Trajectory& init,
                      const SolverConfig& cfg) {
  cfg.validate();
  detail::check_init(prob, init);
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (!(eps > 0.0)) throw InvalidArgument("solver smoothing eps must be > 0");
  std::vector<IterationRecord> trace;
  std::vector<double> wall;
  detail::TraceSink sink{&trace, &wall, std::chrono::steady_clock::now(), cfg.trace_every, 0};
  detail::SpgResult r = detail::inner_solve(prob, 1.0, lambda, eps, init, cfg, false, sink);
  Solution s = detail::finish(prob, std::move(r), lambda, eps);
  s.trace = std::move(trace);
  s.wall_times = std::move(wall);
  return s;
}

template <class Problem>
Solution minimize_Phi(const Problem& prob, double lambda, double eps, const Grid& grid,
                      const SolverConfig& cfg) {
  return minimize_Phi(prob, lambda, eps, detail::default_initial(prob, grid), cfg);
}

template <class Problem>
Solution penalty_continuation(const Problem& prob, const SolverConfig& cfg, const Trajectory& init,
                              std::optional<double> lambda_star = std::nullopt) {
  cfg.validate();
  detail::check_init(prob, init);
  std::vector<IterationRecord> trace;
  std::vector<double> wall;
  detail::TraceSink sink{&trace, &wall, std::chrono::steady_clock::now(), cfg.trace_every, 0};

  double lambda = std::min(cfg.lambda_init, cfg.lambda_max);
  double eps = cfg.eps_init;
  Trajectory current = init;
  detail::SpgResult r;
  int outer = 0;
  int total_inner = 0;
  Status status = Status::iteration_limit;
  for (; outer < cfg.max_outer; ++outer) {
    r = detail::inner_solve(prob, 1.0, lambda, eps, current, cfg, false, sink);
    total_inner += r.iterations + 1;
    sink.offset = total_inner;
    current = r.traj;
    const bool stationary =
        r.status == Status::feasible_stationary || r.status == Status::stationary_infeasible;
    if (stationary && r.eval.phi <= cfg.tol_feas) {
      status = Status::feasible_stationary;
      break;
    }
    if (r.eval.phi <= cfg.tol_feas) {
      status = r.status;  // feasible but not yet stationary: solve again at the same (lambda, eps)
      continue;
    }
    if (lambda >= cfg.lambda_max && eps <= cfg.eps_min) {
      status = stationary ? Status::stationary_infeasible : r.status;
      break;
    }
    status = stationary ? Status::stationary_infeasible : r.status;
    lambda = std::min(cfg.lambda_growth * lambda, cfg.lambda_max);
    eps = std::max(eps * cfg.eps_decay, cfg.eps_min);
  }
  if (outer == cfg.max_outer) --outer;

  Solution s = detail::finish(prob, std::move(r), lambda, eps);
  s.status = status;
  s.inner_iterations = total_inner;
  s.outer_iterations = outer + 1;
  s.trace = std::move(trace);
  s.wall_times = std::move(wall);
  s.lambda_star = lambda_star;
  if (lambda_star) s.exceeded_lambda_star = lambda > *lambda_star;
  return s;
}

template <class Problem>
Solution penalty_continuation(const Problem& prob, const SolverConfig& cfg, const Grid& grid,
                              std::optional<double> lambda_star = std::nullopt) {
  return penalty_continuation(prob, cfg, detail::default_initial(prob, grid), lambda_star);
}

/// Minimizes phi alone from init; success means phi (eps = 0) <= tol_feas.
template <class Problem>
Solution feasibility_restore(const Problem& prob, const Trajectory& init, const SolverConfig& cfg) {
  cfg.validate();
  detail::check_init(prob, init);
  std::vector<IterationRecord> trace;
  std::vector<double> wall;
  detail::TraceSink sink{&trace, &wall, std::chrono::steady_clock::now(), cfg.trace_every, 0};
  double eps = cfg.eps_init;
  detail::SpgResult r = detail::inner_solve(prob, 0.0, 1.0, eps, init, cfg, true, sink);
  Solution s = detail::finish(prob, std::move(r), 1.0, eps);
  s.Phi = s.phi;
  if (s.phi <= cfg.tol_feas && s.status != Status::line_search_failure)
    s.status = Status::feasible_stationary;
  s.trace = std::move(trace);
  s.wall_times = std::move(wall);
  return s;
}

/// Controls-to-trajectory map: z chosen so the residual vanishes under the grid's
/// evaluation rule (explicit Euler for left endpoints, implicit midpoint otherwise).
inline Trajectory simulate_forward(const ProblemSpec& prob, const Grid& grid, const SampleArray& u) {
  if (u.rows() != grid.intervals || u.cols() != prob.dim_control)
    throw InvalidArgument("control samples do not match the grid");
  Trajectory traj = make_trajectory(grid, prob.dim_state, prob.dim_control);
  traj.u = u;
  const double c = grid.eval_offset();
  Vector x = prob.x0;
  for (int i = 0; i < grid.intervals; ++i) {
    const double t = grid.eval_time(i);
    const Vector ui = u.row(i).transpose();
    Vector z = prob.f(x, ui, t);
    if (c != 0.0) {
      for (int it = 0; it < 100; ++it) {
        const Vector res = z - prob.f(x + c * grid.dt * z, ui, t);
        if (res.norm() <= 1e-15 * std::max(1.0, z.norm())) break;
        if (prob.jac_f_x) {
          const Matrix jac = Matrix::Identity(prob.dim_state, prob.dim_state) -
                             c * grid.dt * prob.jac_f_x(x + c * grid.dt * z, ui, t);
          z -= jac.partialPivLu().solve(res);
        } else {
          z -= res;
        }
      }
    }
    if (!z.allFinite()) throw EvaluationError("forward simulation diverged", i, t);
    traj.z.row(i) = z.transpose();
    x += grid.dt * z;
  }
  reconstruct_states(traj, prob.x0);
  return traj;
}

}  // namespace exactpen
