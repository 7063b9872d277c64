#pragma once

// Run configuration, batch execution and output files.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exactpen/catalog.hpp"
#include "exactpen/certificates.hpp"
#include "exactpen/plateau.hpp"
#include "exactpen/solver.hpp"
#include "json.hpp"

namespace exactpen {

inline constexpr const char* kVersion = "0.1.0";

enum class RunMode { solve, certify, plateau };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::solve:
      return "solve";
    case RunMode::certify:
      return "certify";
    case RunMode::plateau:
      return "plateau";
  }
  return "unknown";
}

struct RunConfig {
  std::string problem;
  int grid = 100;
  double p = 2.0;
  double q = 2.0;
  EvaluationRule rule = EvaluationRule::left_endpoint;
  SolverConfig solver;
  bool certificate = false;
  std::vector<double> plateau_lambdas;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int samples = 4096;

  void validate() const {
    catalog_get(problem);  // throws NotFound
    if (grid < 1) throw InvalidArgument("grid must be >= 1");
    if (!(p > 1.0) || std::isinf(p)) throw InvalidArgument("p must lie in (1, inf)");
    if (!(q >= 1.0)) throw InvalidArgument("q must lie in [1, inf]");
    if (samples < 1) throw InvalidArgument("samples must be >= 1");
    solver.validate();
  }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline const char* rule_name(EvaluationRule r) {
  return r == EvaluationRule::midpoint ? "midpoint" : "left";
}

inline EvaluationRule parse_rule(const std::string& s) {
  if (s == "left" || s == "left-endpoint") return EvaluationRule::left_endpoint;
  if (s == "midpoint") return EvaluationRule::midpoint;
  throw InvalidArgument("quadrature must be 'left' or 'midpoint', got '" + s + "'");
}

inline nlohmann::json solver_json(const SolverConfig& c) {
  return {{"max_outer", c.max_outer},
          {"max_inner", c.max_inner},
          {"lambda_init", c.lambda_init},
          {"lambda_growth", c.lambda_growth},
          {"lambda_max", c.lambda_max},
          {"eps_init", c.eps_init},
          {"eps_decay", c.eps_decay},
          {"eps_min", c.eps_min},
          {"tol_feas", c.tol_feas},
          {"tol_stat", c.tol_stat},
          {"tol_plateau", c.tol_plateau},
          {"step_init", c.step_init},
          {"backtrack", c.backtrack},
          {"sufficient_decrease", c.sufficient_decrease},
          {"memory", c.memory},
          {"trace_every", c.trace_every}};
}

inline void apply_solver_overrides(SolverConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("'solver' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "max_outer") c.max_outer = value.get<int>();
    else if (key == "max_inner") c.max_inner = value.get<int>();
    else if (key == "lambda_init") c.lambda_init = value.get<double>();
    else if (key == "lambda_growth") c.lambda_growth = value.get<double>();
    else if (key == "lambda_max") c.lambda_max = value.get<double>();
    else if (key == "eps_init") c.eps_init = value.get<double>();
    else if (key == "eps_decay") c.eps_decay = value.get<double>();
    else if (key == "eps_min") c.eps_min = value.get<double>();
    else if (key == "tol_feas") c.tol_feas = value.get<double>();
    else if (key == "tol_stat") c.tol_stat = value.get<double>();
    else if (key == "tol_plateau") c.tol_plateau = value.get<double>();
    else if (key == "step_init") c.step_init = value.get<double>();
    else if (key == "backtrack") c.backtrack = value.get<double>();
    else if (key == "sufficient_decrease") c.sufficient_decrease = value.get<double>();
    else if (key == "memory") c.memory = value.get<int>();
    else if (key == "trace_every") c.trace_every = value.get<int>();
    else throw InvalidArgument("unknown solver option '" + key + "'");
  }
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"problem", c.problem},
          {"grid", c.grid},
          {"p", c.p},
          {"q", c.q},
          {"quadrature", detail::rule_name(c.rule)},
          {"solver", detail::solver_json(c.solver)},
          {"certificate", c.certificate},
          {"plateau_lambdas", c.plateau_lambdas},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"samples", c.samples}};
}

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("malformed config JSON", line, col);
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object", 1, 1);

  RunConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "problem") c.problem = value.get<std::string>();
      else if (key == "grid") c.grid = value.get<int>();
      else if (key == "p") c.p = value.get<double>();
      else if (key == "q") c.q = value.is_string() && value.get<std::string>() == "inf" ? kInfinity
                                                                                     : value.get<double>();
      else if (key == "quadrature") c.rule = detail::parse_rule(value.get<std::string>());
      else if (key == "solver") detail::apply_solver_overrides(c.solver, value);
      else if (key == "certificate") c.certificate = value.get<bool>();
      else if (key == "plateau_lambdas") c.plateau_lambdas = value.get<std::vector<double>>();
      else if (key == "output_dir") c.output_dir = value.get<std::string>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "samples") c.samples = value.get<int>();
      else throw InvalidArgument("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config has a value of the wrong type: ") + e.what());
  }
  if (c.problem.empty()) throw InvalidArgument("config needs a 'problem' id");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

// ---------------------------------------------------------------------------
// Running

struct RunReport {
  RunConfig config;
  RunMode mode = RunMode::solve;
  std::optional<Solution> solution;
  std::optional<ExactnessCertificate> certificate;
  std::optional<GrowthFit> growth;
  std::optional<PlateauReport> plateau;
  std::string error;  // set when the run stopped early
  double total_seconds = 0.0;
  int dim_state = 0;
  int dim_control = 0;

  /// 0 feasible-stationary, 2 any other solver outcome, 1 errors.
  int exit_code() const {
    if (!error.empty()) return 1;
    if (mode == RunMode::plateau) return plateau && plateau->plateau_index ? 0 : 2;
    if (mode == RunMode::certify) return certificate ? 0 : 1;
    if (!solution) return 1;
    return solution->status == Status::feasible_stationary ? 0 : 2;
  }
};

/// Catalog problem with the run's p and q applied.
inline AnyProblem configured_problem(const RunConfig& c, CertificateRecipe* recipe = nullptr) {
  CatalogEntry e = catalog_get(c.problem);
  if (recipe) *recipe = e.recipe;
  return std::visit(
      [&](auto prob) -> AnyProblem {
        prob.p = c.p;
        if constexpr (std::is_same_v<decltype(prob), ProblemSpec>) prob.q = c.q;
        prob.validate();
        return prob;
      },
      e.problem);
}

inline RunReport run(const RunConfig& config, RunMode mode) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = config;
  rep.mode = mode;
  try {
    config.validate();
    CertificateRecipe recipe;
    const AnyProblem problem = configured_problem(config, &recipe);
    const Grid grid = make_uniform_grid(problem_horizon(problem), config.grid, config.rule);
    std::visit(
        [&](const auto& prob) {
          using P = std::decay_t<decltype(prob)>;
          rep.dim_state = prob.dim_state;
          rep.dim_control = detail::control_dim_of(prob);
          const SamplingBudget budget{config.samples, config.seed};
          if (config.certificate || mode == RunMode::certify) {
            rep.certificate = certify(prob, recipe, budget);
            if constexpr (std::is_same_v<P, ProblemSpec>) {
              const double radius = rep.certificate->region.state_upper.maxCoeff();
              if (recipe.control_lower.size() == prob.dim_control && radius > 0.0)
                rep.growth = growth_condition_fit(prob.f, 1.0, 1.0, radius, recipe.control_lower,
                                                  recipe.control_upper, grid, prob.dim_state, budget);
            }
          }
          std::optional<double> lambda_star;
          if (rep.certificate) lambda_star = rep.certificate->lambda_star;
          if (mode == RunMode::solve) {
            rep.solution = penalty_continuation(prob, config.solver, grid, lambda_star);
          } else if (mode == RunMode::plateau) {
            if (config.plateau_lambdas.empty())
              throw InvalidArgument("plateau mode needs 'plateau_lambdas'");
            rep.plateau = exactness_plateau_experiment(prob, config.plateau_lambdas, config.solver,
                                                       grid, lambda_star);
          }
        },
        problem);
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  rep.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const PlateauReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    nlohmann::json e{{"lambda", p.lambda},
                     {"Phi", p.Phi},
                     {"objective", p.objective},
                     {"phi", p.phi},
                     {"status", to_string(p.status)},
                     {"inner_iterations", p.inner_iterations}};
    if (!p.error.empty()) e["error"] = p.error;
    pts.push_back(std::move(e));
  }
  nlohmann::json j{{"points", pts},
                   {"plateau_detected", r.plateau_index.has_value()},
                   {"nondecreasing", r.nondecreasing}};
  j["plateau_lambda"] = r.plateau_lambda ? nlohmann::json(*r.plateau_lambda) : nlohmann::json();
  j["plateau_value"] = r.plateau_value ? nlohmann::json(*r.plateau_value) : nlohmann::json();
  j["lambda_star"] = r.lambda_star ? nlohmann::json(*r.lambda_star) : nlohmann::json();
  j["consistent_with_lambda_star"] =
      r.consistent_with_lambda_star ? nlohmann::json(*r.consistent_with_lambda_star) : nlohmann::json();
  return j;
}

inline nlohmann::json solution_json(const Solution& s) {
  nlohmann::json j{{"status", to_string(s.status)},
                   {"objective", s.objective},
                   {"phi", s.phi},
                   {"Phi", s.Phi},
                   {"lambda", s.lambda},
                   {"eps", s.eps},
                   {"stationarity", s.stationarity},
                   {"inner_iterations", s.inner_iterations},
                   {"outer_iterations", s.outer_iterations}};
  j["lambda_star"] = s.lambda_star ? nlohmann::json(*s.lambda_star) : nlohmann::json();
  j["exceeded_lambda_star"] =
      s.exceeded_lambda_star ? nlohmann::json(*s.exceeded_lambda_star) : nlohmann::json();
  return j;
}

/// Everything except wall-clock data sits outside "timing", so two runs with the
/// same config produce identical documents once that field is dropped.
inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j{{"version", kVersion}, {"mode", to_string(r.mode)}, {"config", to_json(r.config)}};
  j["error"] = r.error.empty() ? nlohmann::json() : nlohmann::json(r.error);
  j["exit_code"] = r.exit_code();
  nlohmann::json timing{{"total_seconds", r.total_seconds}};
  if (r.solution) {
    j["solution"] = solution_json(*r.solution);
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& it : r.solution->trace)
      iters.push_back({{"iteration", it.iteration},
                       {"lambda", it.lambda},
                       {"eps", it.eps},
                       {"Phi", it.Phi},
                       {"I", it.I},
                       {"phi", it.phi},
                       {"stationarity", it.stationarity},
                       {"step", it.step}});
    j["iterations"] = std::move(iters);
    timing["iteration_wall_seconds"] = r.solution->wall_times;
  }
  if (r.certificate) j["certificate"] = *r.certificate;
  if (r.growth) j["growth_fit"] = *r.growth;
  if (r.plateau) j["plateau"] = to_json(*r.plateau);
  j["timing"] = std::move(timing);
  return j;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trajectory_csv(const Trajectory& traj, const Vector& x0, const std::string& path) {
  const SampleArray x = traj.x ? *traj.x : integrate_derivative(traj.grid, traj.z, x0);
  const int d = traj.dim_state(), m = traj.dim_control(), n = traj.intervals();
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << "t";
  for (int k = 1; k <= d; ++k) out << ",x" << k;
  for (int k = 1; k <= d; ++k) out << ",z" << k;
  for (int k = 1; k <= m; ++k) out << ",u" << k;
  out << "\n";
  for (int i = 0; i <= n; ++i) {
    out << detail::fmt17(traj.grid.nodes[i]);
    for (int k = 0; k < d; ++k) out << "," << detail::fmt17(x(i, k));
    for (int k = 0; k < d; ++k) out << "," << (i < n ? detail::fmt17(traj.z(i, k)) : "");
    for (int k = 0; k < m; ++k) out << "," << (i < n ? detail::fmt17(traj.u(i, k)) : "");
    out << "\n";
  }
}

/// Reads a trajectory written by write_trajectory_csv. The grid is rebuilt from
/// the node count and final time; states are recomputed from z by the caller.
inline Trajectory read_trajectory_csv(const std::string& path,
                                      EvaluationRule rule = EvaluationRule::left_endpoint) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trajectory file", 1, 1);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int d = 0, m = 0;
  for (const auto& h : header) {
    if (!h.empty() && h[0] == 'z') ++d;
    if (!h.empty() && h[0] == 'u') ++m;
  }
  if (header.empty() || header[0] != "t" || static_cast<int>(header.size()) != 1 + 2 * d + m)
    throw ParseError("unexpected trajectory header", 1, 1);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(header.size());
    rows.push_back(std::move(cells));
  }
  if (rows.size() < 2) throw ParseError("trajectory needs at least two nodes", 2, 1);
  const int n = static_cast<int>(rows.size()) - 1;
  const double horizon = std::stod(rows.back()[0]);
  Trajectory traj = make_trajectory(make_uniform_grid(horizon, n, rule), d, m);
  for (int i = 0; i < n; ++i) {
    try {
      for (int k = 0; k < d; ++k) traj.z(i, k) = std::stod(rows[i][1 + d + k]);
      for (int k = 0; k < m; ++k) traj.u(i, k) = std::stod(rows[i][1 + 2 * d + k]);
    } catch (const std::logic_error&) {
      throw ParseError("bad number in trajectory", static_cast<std::size_t>(i) + 2, 1);
    }
  }
  return traj;
}

inline void write_outputs(const RunReport& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  if (rep.solution) {
    const AnyProblem prob = configured_problem(rep.config);
    const Vector x0 = std::visit([](const auto& p) { return p.x0; }, prob);
    write_trajectory_csv(rep.solution->trajectory, x0, (base / "trajectory.csv").string());
  }
  {
    std::ofstream out(base / "report.json");
    if (!out) throw InvalidArgument("cannot write report.json in '" + dir + "'");
    out << to_json(rep).dump(2) << "\n";
  }
  if (rep.certificate) {
    nlohmann::json j = *rep.certificate;
    if (rep.growth) j["growth_fit"] = *rep.growth;
    std::ofstream out(base / "certificate.json");
    out << j.dump(2) << "\n";
  }
}

}  // namespace exactpen
