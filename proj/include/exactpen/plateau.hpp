#pragma once

// Lambda sweep: solve at each lambda from the same start and look for the
// smallest lambda beyond which the minimized values stop changing and the
// iterates are feasible.

#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "exactpen/solver.hpp"

namespace exactpen {

struct PlateauPoint {
  double lambda = 0.0;
  double Phi = 0.0;  // I + lambda * phi, true phi
  double objective = 0.0;
  double phi = 0.0;
  Status status = Status::iteration_limit;
  int inner_iterations = 0;
  std::string error;  // non-empty when the solve threw
};

struct PlateauReport {
  std::vector<PlateauPoint> points;
  std::optional<std::size_t> plateau_index;
  std::optional<double> plateau_lambda;
  std::optional<double> plateau_value;
  bool nondecreasing = true;  // within 10 * tol_stat
  std::optional<double> lambda_star;
  std::optional<bool> consistent_with_lambda_star;  // plateau_lambda <= lambda_star
};

/// Smallest k with |Phi_j - Phi_k| < tol and phi_j < tol_feas for all j >= k.
inline std::optional<std::size_t> detect_plateau(const std::vector<PlateauPoint>& pts, double tol,
                                                 double tol_feas) {
  for (std::size_t k = 0; k < pts.size(); ++k) {
    bool ok = pts[k].error.empty();
    for (std::size_t j = k; ok && j < pts.size(); ++j)
      ok = pts[j].error.empty() && std::abs(pts[j].Phi - pts[k].Phi) < tol && pts[j].phi < tol_feas;
    if (ok) return k;
  }
  return std::nullopt;
}

/// Each lambda is run as a continuation with lambda held fixed, so only the
/// smoothing shrinks. Runs are independent and execute concurrently.
template <class Problem>
PlateauReport exactness_plateau_experiment(const Problem& prob, const std::vector<double>& lambdas,
                                           const SolverConfig& cfg, const Trajectory& init,
                                           std::optional<double> lambda_star = std::nullopt) {
  cfg.validate();
  if (lambdas.empty()) throw InvalidArgument("lambda grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw InvalidArgument("lambda grid values must be > 0");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw InvalidArgument("lambda grid must increase");
  }

  std::vector<std::future<PlateauPoint>> jobs;
  for (double lambda : lambdas) {
    jobs.push_back(std::async(std::launch::async, [&prob, &cfg, &init, lambda] {
      PlateauPoint pt;
      pt.lambda = lambda;
      SolverConfig c = cfg;
      c.lambda_init = lambda;
      c.lambda_max = lambda;
      c.trace_every = c.max_inner + 1;
      try {
        const Solution s = penalty_continuation(prob, c, init);
        pt.Phi = s.objective + lambda * s.phi;
        pt.objective = s.objective;
        pt.phi = s.phi;
        pt.status = s.status;
        pt.inner_iterations = s.inner_iterations;
      } catch (const std::exception& e) {
        pt.error = e.what();
        pt.Phi = pt.objective = pt.phi = std::nan("");
      }
      return pt;
    }));
  }

  PlateauReport rep;
  for (auto& j : jobs) rep.points.push_back(j.get());
  for (std::size_t i = 1; i < rep.points.size(); ++i)
    if (rep.points[i].Phi < rep.points[i - 1].Phi - 10.0 * cfg.tol_stat) rep.nondecreasing = false;
  rep.plateau_index = detect_plateau(rep.points, cfg.tol_plateau, cfg.tol_feas);
  if (rep.plateau_index) {
    rep.plateau_lambda = rep.points[*rep.plateau_index].lambda;
    rep.plateau_value = rep.points[*rep.plateau_index].Phi;
  }
  rep.lambda_star = lambda_star;
  if (lambda_star && rep.plateau_lambda) rep.consistent_with_lambda_star = *rep.plateau_lambda <= *lambda_star;
  return rep;
}

template <class Problem>
PlateauReport exactness_plateau_experiment(const Problem& prob, const std::vector<double>& lambdas,
                                           const SolverConfig& cfg, const Grid& grid,
                                           std::optional<double> lambda_star = std::nullopt) {
  return exactness_plateau_experiment(prob, lambdas, cfg, detail::default_initial(prob, grid),
                                      lambda_star);
}

}  // namespace exactpen
