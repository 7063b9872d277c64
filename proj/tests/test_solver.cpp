#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "exactpen/catalog.hpp"
#include "exactpen/plateau.hpp"
#include "exactpen/solver.hpp"
#include "support.hpp"

using namespace exactpen;
using namespace testing_support;

namespace {

ProblemSpec lq() { return std::get<ProblemSpec>(catalog_get("lq-scalar").problem); }
ProblemSpec di() { return std::get<ProblemSpec>(catalog_get("double-integrator").problem); }
ProblemSpec logistic() { return std::get<ProblemSpec>(catalog_get("logistic-harvest").problem); }
InclusionProblemSpec inclusion() {
  return std::get<InclusionProblemSpec>(catalog_get("inclusion-ball").problem);
}

/// x' = u with nothing to minimize: every feasible point is stationary.
ProblemSpec zero_objective() {
  ProblemSpec p = lq();
  p.theta = [](const Vector&, const Vector&, double) { return 0.0; };
  p.grad_theta_x = [](const Vector& x, const Vector&, double) -> Vector { return Vector::Zero(x.size()); };
  p.grad_theta_u = [](const Vector&, const Vector& u, double) -> Vector { return Vector::Zero(u.size()); };
  return p;
}

}  // namespace

TEST(ProjectControl, BoxAndBall) {
  SampleArray u(3, 1);
  u << -2.0, 0.5, 3.0;
  const SampleArray b = project_control(u, ControlSet::box(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)));
  EXPECT_EQ(b(0, 0), -1.0);
  EXPECT_EQ(b(1, 0), 0.5);
  EXPECT_EQ(b(2, 0), 1.0);
  SampleArray v(1, 2);
  v << 3.0, 4.0;
  const SampleArray r = project_control(v, ControlSet::ball(Vector::Zero(2), 1.0));
  EXPECT_NEAR(r(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(r(0, 1), 0.8, 1e-15);
  EXPECT_EQ(project_control(u, ControlSet::unconstrained()), u);
}

TEST(ProjectControl, Idempotent) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 2.0);
  const ControlSet set = ControlSet::box(Vector::Constant(2, -0.5), Vector::Constant(2, 1.5));
  for (int trial = 0; trial < 50; ++trial) {
    SampleArray u(10, 2);
    for (auto& v : u.reshaped()) v = nd(rng);
    const SampleArray once = project_control(u, set);
    EXPECT_EQ(project_control(once, set), once);
  }
}

TEST(MinimizePhi, ZeroLambdaDrivesControlToZero) {
  SolverConfig cfg;
  const Solution s = minimize_Phi(lq(), 0.0, 1e-2, make_uniform_grid(1.0, 40), cfg);
  EXPECT_LT(s.trajectory.u.cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ(s.status, Status::stationary_infeasible);
}

TEST(MinimizePhi, RejectsBadArguments) {
  SolverConfig cfg;
  const Grid g = make_uniform_grid(1.0, 10);
  EXPECT_THROW(minimize_Phi(lq(), -1.0, 1e-2, g, cfg), InvalidArgument);
  EXPECT_THROW(minimize_Phi(lq(), 1.0, 0.0, g, cfg), InvalidArgument);
  EXPECT_THROW(minimize_Phi(lq(), 1.0, 1e-2, make_trajectory(g, 2, 1), cfg), InvalidArgument);
}

TEST(Continuation, FeasibleStationaryStartEndsAtOnce) {
  SolverConfig cfg;
  const Solution s = penalty_continuation(zero_objective(), cfg, make_uniform_grid(1.0, 20));
  EXPECT_EQ(s.status, Status::feasible_stationary);
  EXPECT_EQ(s.outer_iterations, 1);
  EXPECT_EQ(s.inner_iterations, 1);
  EXPECT_EQ(s.phi, 0.0);
  EXPECT_EQ(s.lambda, cfg.lambda_init);
}

TEST(Continuation, LqMatchesLeastSquaresOracle) {
  for (auto rule : {EvaluationRule::left_endpoint, EvaluationRule::midpoint}) {
    const Grid g = make_uniform_grid(1.0, 50, rule);
    const LqOracle oracle = lq_discrete_oracle(g);
    SolverConfig cfg;
    const Solution s = penalty_continuation(lq(), cfg, g);
    EXPECT_EQ(s.status, Status::feasible_stationary);
    EXPECT_LE(s.phi, cfg.tol_feas);
    EXPECT_NEAR(s.objective, oracle.I, 1e-5);
    EXPECT_LT((s.trajectory.u.col(0) - oracle.u).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Continuation, SmallLambdaCapIsReportedInfeasible) {
  SolverConfig cfg;
  cfg.lambda_init = 0.01;
  cfg.lambda_max = 0.01;
  const Solution s = penalty_continuation(lq(), cfg, make_uniform_grid(1.0, 30));
  EXPECT_EQ(s.status, Status::stationary_infeasible);
  EXPECT_GT(s.phi, cfg.tol_feas);
  EXPECT_EQ(s.lambda, 0.01);
}

TEST(Continuation, ScheduleIsMonotoneAndWarmStarted) {
  SolverConfig cfg;
  const double lambda_star = 17.6;
  const Solution s = penalty_continuation(di(), cfg, make_uniform_grid(2.0, 60), lambda_star);
  ASSERT_GT(s.trace.size(), 2u);
  ASSERT_EQ(s.trace.size(), s.wall_times.size());
  int stage_changes = 0;
  for (std::size_t k = 1; k < s.trace.size(); ++k) {
    const auto& a = s.trace[k - 1];
    const auto& b = s.trace[k];
    EXPECT_GE(b.lambda, a.lambda);
    EXPECT_LE(b.eps, a.eps);
    EXPECT_GE(s.wall_times[k], s.wall_times[k - 1]);
    if (b.lambda != a.lambda || b.eps != a.eps) {
      // the next stage starts from the last iterate of the previous one
      EXPECT_EQ(b.phi, a.phi);
      EXPECT_EQ(b.I, a.I);
      ++stage_changes;
    }
  }
  EXPECT_GE(stage_changes, 1);
  ASSERT_TRUE(s.exceeded_lambda_star.has_value());
  EXPECT_EQ(*s.exceeded_lambda_star, s.lambda > lambda_star);
}

TEST(Continuation, TraceSubsampling) {
  SolverConfig cfg;
  cfg.trace_every = 5;
  const Solution s = penalty_continuation(lq(), cfg, make_uniform_grid(1.0, 20));
  for (const auto& r : s.trace) EXPECT_EQ(r.iteration % 5, 0);
}

TEST(Restore, ReachesFeasibilityFromRandomStarts) {
  std::mt19937_64 rng(31);
  SolverConfig cfg;
  for (const ProblemSpec& p : {lq(), di(), logistic()}) {
    for (int trial = 0; trial < 3; ++trial) {
      const Trajectory init = random_trajectory(make_uniform_grid(p.horizon, 40), p.dim_state, p.dim_control, rng);
      const Solution s = feasibility_restore(p, init, cfg);
      EXPECT_EQ(s.status, Status::feasible_stationary);
      EXPECT_LE(eval_penalty(s.trajectory, p, 0.0), cfg.tol_feas);
      EXPECT_TRUE(p.control_set.contains(s.trajectory.u.row(0).transpose(), 1e-12));
    }
  }
}

TEST(Restore, InclusionIntoConstantBall) {
  InclusionProblemSpec p = inclusion();
  p.set_model = constant_ball(Vector::Zero(2), 1.0);
  std::mt19937_64 rng(37);
  SolverConfig cfg;
  for (int trial = 0; trial < 3; ++trial) {
    const Trajectory init = random_trajectory(make_uniform_grid(2.0, 40), 2, 0, rng, 3.0);
    const Solution s = feasibility_restore(p, init, cfg);
    EXPECT_EQ(s.status, Status::feasible_stationary);
    EXPECT_LE(eval_penalty(s.trajectory, p, 0.0), cfg.tol_feas);
  }
  const Trajectory catalog_init = random_trajectory(make_uniform_grid(2.0, 40), 2, 0, rng);
  EXPECT_LE(feasibility_restore(inclusion(), catalog_init, cfg).phi, cfg.tol_feas);
}

TEST(SimulateForward, ResidualVanishes) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ud(0.0, 0.8);
  for (auto rule : {EvaluationRule::left_endpoint, EvaluationRule::midpoint}) {
    for (const ProblemSpec& p : {lq(), di(), logistic()}) {
      const Grid g = make_uniform_grid(p.horizon, 50, rule);
      SampleArray u(50, 1);
      for (auto& v : u.reshaped()) v = ud(rng);
      const Trajectory t = simulate_forward(p, g, u);
      EXPECT_LT(residual(t, p).values.cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT(eval_penalty(t, p, 0.0), 1e-12);
    }
  }
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto mutate) {
    SolverConfig x;
    mutate(x);
    return x;
  };
  EXPECT_THROW(bad([](SolverConfig& x) { x.lambda_init = 0.0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.lambda_growth = 1.0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.lambda_max = 0.5; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.eps_min = 1.0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.eps_decay = 1.0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.backtrack = 1.0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.memory = 0; }).validate(), InvalidArgument);
  EXPECT_THROW(bad([](SolverConfig& x) { x.tol_feas = 0.0; }).validate(), InvalidArgument);
}

TEST(Plateau, DetectionRule) {
  auto pt = [](double lambda, double Phi, double phi) {
    PlateauPoint p;
    p.lambda = lambda;
    p.Phi = Phi;
    p.phi = phi;
    return p;
  };
  EXPECT_EQ(detect_plateau({pt(1, 0.5, 0.1), pt(10, 0.7, 0.0), pt(100, 0.7, 0.0)}, 1e-3, 1e-6), 1u);
  EXPECT_FALSE(detect_plateau({pt(1, 0.5, 0.1), pt(10, 0.6, 0.01)}, 1e-3, 1e-6).has_value());
  // a late jump breaks an earlier candidate
  EXPECT_EQ(detect_plateau({pt(1, 0.7, 0.0), pt(10, 0.7, 0.0), pt(100, 0.8, 0.0)}, 1e-3, 1e-6), 2u);
}

TEST(Plateau, SmallLambdasHaveNoPlateau) {
  SolverConfig cfg;
  const PlateauReport r = exactness_plateau_experiment(lq(), {0.001, 0.01}, cfg, make_uniform_grid(1.0, 30));
  EXPECT_FALSE(r.plateau_index.has_value());
  EXPECT_TRUE(r.nondecreasing);
}

TEST(Plateau, LqSweepFindsPlateau) {
  SolverConfig cfg;
  const PlateauReport r =
      exactness_plateau_experiment(lq(), {0.1, 1.0, 10.0, 100.0}, cfg, make_uniform_grid(1.0, 50), 17.6);
  ASSERT_EQ(r.points.size(), 4u);
  ASSERT_TRUE(r.plateau_lambda.has_value());
  EXPECT_LE(*r.plateau_lambda, 10.0);
  EXPECT_TRUE(r.nondecreasing);
  ASSERT_TRUE(r.consistent_with_lambda_star.has_value());
  EXPECT_TRUE(*r.consistent_with_lambda_star);
}

TEST(Plateau, RejectsBadGrid) {
  SolverConfig cfg;
  const Grid g = make_uniform_grid(1.0, 10);
  EXPECT_THROW(exactness_plateau_experiment(lq(), {1.0, 1.0}, cfg, g), InvalidArgument);
  EXPECT_THROW(exactness_plateau_experiment(lq(), {10.0, 1.0}, cfg, g), InvalidArgument);
  EXPECT_THROW(exactness_plateau_experiment(lq(), {}, cfg, g), InvalidArgument);
  EXPECT_THROW(exactness_plateau_experiment(lq(), {-1.0, 1.0}, cfg, g), InvalidArgument);
}
