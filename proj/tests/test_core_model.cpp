#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "exactpen/core_model.hpp"

using namespace exactpen;

namespace {

ProblemSpec scalar_problem() {
  ProblemSpec p;
  p.x0 = Vector::Constant(1, 1.0);
  p.theta = [](const Vector& x, const Vector& u, double) { return x.squaredNorm() + u.squaredNorm(); };
  p.f = [](const Vector&, const Vector& u, double) -> Vector { return u; };
  p.zeta = [](const Vector&) { return 0.0; };
  return p;
}

}  // namespace

TEST(ConjugateExponent, KnownValues) {
  EXPECT_DOUBLE_EQ(conjugate_exponent(2.0), 2.0);
  EXPECT_DOUBLE_EQ(conjugate_exponent(3.0), 1.5);
  EXPECT_TRUE(std::isinf(conjugate_exponent(1.0)));
  EXPECT_DOUBLE_EQ(conjugate_exponent(kInfinity), 1.0);
  EXPECT_DOUBLE_EQ(horizon_power(4.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(horizon_power(4.0, kInfinity), 1.0);
}

TEST(Grid, UniformNodes) {
  const Grid g = make_uniform_grid(1.0, 4);
  ASSERT_EQ(g.nodes.size(), 5u);
  EXPECT_DOUBLE_EQ(g.dt, 0.25);
  EXPECT_DOUBLE_EQ(g.nodes[2], 0.5);
  EXPECT_EQ(g.nodes.back(), 1.0);
  EXPECT_DOUBLE_EQ(g.eval_time(1), 0.25);
  const Grid m = make_uniform_grid(1.0, 4, EvaluationRule::midpoint);
  EXPECT_DOUBLE_EQ(m.eval_time(1), 0.375);
}

TEST(Grid, LastNodeIsHorizonExactly) {
  const Grid g = make_uniform_grid(0.7, 3);
  EXPECT_EQ(g.nodes.back(), 0.7);
}

TEST(Grid, RejectsBadInput) {
  EXPECT_THROW(make_uniform_grid(1.0, 0), InvalidArgument);
  EXPECT_THROW(make_uniform_grid(0.0, 10), InvalidArgument);
  EXPECT_THROW(make_uniform_grid(kInfinity, 10), InvalidArgument);
}

TEST(ControlSet, BoxClamp) {
  const auto box = ControlSet::box(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(box.project(Vector::Constant(1, 3.0))[0], 1.0);
  EXPECT_DOUBLE_EQ(box.project(Vector::Constant(1, 0.25))[0], 0.25);
}

TEST(ControlSet, BallRadialScaling) {
  const auto ball = ControlSet::ball(Vector::Zero(2), 2.0);
  const Vector p = ball.project((Vector(2) << 3.0, 4.0).finished());
  EXPECT_NEAR(p[0], 1.2, 1e-15);
  EXPECT_NEAR(p[1], 1.6, 1e-15);
  const Vector inside = (Vector(2) << 0.5, -0.5).finished();
  EXPECT_EQ(ball.project(inside), inside);
}

TEST(ControlSet, RejectsInvertedBox) {
  EXPECT_THROW(ControlSet::box(Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)), InvalidArgument);
  EXPECT_THROW(ControlSet::ball(Vector::Zero(2), -1.0), InvalidArgument);
}

TEST(ControlSet, ProjectionIsIdempotentAndInside) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 3.0);
  const auto box = ControlSet::box((Vector(3) << -1, 0, 2).finished(), (Vector(3) << 1, 0.5, 5).finished());
  const auto ball = ControlSet::ball((Vector(3) << 1, -1, 0).finished(), 0.7);
  for (int trial = 0; trial < 500; ++trial) {
    Vector u(3);
    for (auto& v : u) v = nd(rng);
    for (const ControlSet* s : {&box, &ball}) {
      const Vector p1 = s->project(u);
      EXPECT_TRUE(s->contains(p1, 1e-14));
      EXPECT_LE((s->project(p1) - p1).norm(), 1e-14);
    }
  }
}

TEST(IntegrateDerivative, MatchesCumulativeSum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  const Grid g = make_uniform_grid(2.0, 17);
  SampleArray z(17, 1);
  for (int i = 0; i < 17; ++i) z(i, 0) = ud(rng);
  const SampleArray x = integrate_derivative(g, z, Vector::Constant(1, 0.5));
  std::vector<double> steps(17);
  for (int i = 0; i < 17; ++i) steps[i] = g.dt * z(i, 0);
  std::vector<double> partial(17);
  std::partial_sum(steps.begin(), steps.end(), partial.begin());
  EXPECT_EQ(x(0, 0), 0.5);
  for (int i = 0; i < 17; ++i) EXPECT_NEAR(x(i + 1, 0), 0.5 + partial[i], 1e-14);
}

TEST(IntegrateDerivative, ConstantDerivativeIsLinear) {
  const Grid g = make_uniform_grid(1.0, 8);
  const SampleArray z = SampleArray::Ones(8, 2);
  const SampleArray x = integrate_derivative(g, z, Vector::Zero(2));
  for (int i = 0; i <= 8; ++i) EXPECT_NEAR(x(i, 1), g.nodes[i], 1e-15);
}

TEST(IntegrateDerivative, RejectsShapeMismatch) {
  const Grid g = make_uniform_grid(1.0, 4);
  EXPECT_THROW(integrate_derivative(g, SampleArray::Zero(3, 1), Vector::Zero(1)), InvalidArgument);
  SampleArray z = SampleArray::Zero(4, 1);
  z(1, 0) = std::nan("");
  EXPECT_THROW(integrate_derivative(g, z, Vector::Zero(1)), InvalidArgument);
}

TEST(EvaluationStates, MidpointShiftsByHalfStep) {
  const Grid g = make_uniform_grid(1.0, 4, EvaluationRule::midpoint);
  const SampleArray z = SampleArray::Constant(4, 1, 2.0);
  const SampleArray x = integrate_derivative(g, z, Vector::Zero(1));
  const SampleArray xe = evaluation_states(g, x, z);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(xe(i, 0), 2.0 * (g.nodes[i] + 0.125), 1e-15);
}

TEST(Residual, VanishesOnFeasibleTrajectory) {
  const ProblemSpec p = scalar_problem();
  Trajectory t = make_trajectory(make_uniform_grid(1.0, 10), 1, 1);
  t.u.setConstant(0.3);
  t.z = t.u;
  const ResidualField r = residual(t, p);
  EXPECT_EQ(r.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Residual, ReportsNonFiniteDynamics) {
  ProblemSpec p = scalar_problem();
  p.f = [](const Vector& x, const Vector&, double t) -> Vector {
    return Vector::Constant(1, t > 0.5 ? std::nan("") : x[0]);
  };
  const Trajectory t = make_trajectory(make_uniform_grid(1.0, 4), 1, 1);
  try {
    residual(t, p);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.index(), 3);
    EXPECT_DOUBLE_EQ(e.time(), 0.75);
  }
}

TEST(LpNorm, ConstantSamples) {
  const Grid g = make_uniform_grid(2.0, 5);
  const SampleArray c = SampleArray::Constant(5, 1, -3.0);
  EXPECT_NEAR(lp_norm(c, 2.0, g), 3.0 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(lp_norm(c, 3.0, g), 3.0 * std::cbrt(2.0), 1e-14);
  SampleArray v(5, 2);
  v.col(0).setConstant(3.0);
  v.col(1).setConstant(4.0);
  EXPECT_NEAR(lp_norm(v, 2.0, g), 5.0 * std::sqrt(2.0), 1e-14);
  EXPECT_THROW(lp_norm(c, 1.0, g), InvalidArgument);
}

TEST(SmoothedRoot, AgreesWithDirectFormulaInLongDouble) {
  for (double p : {1.5, 2.0, 3.0}) {
    for (double eps : {1e-1, 1e-4, 1e-8}) {
      for (double P : {1e-30, 1e-12, 1e-3, 1.0, 1e4}) {
        const long double direct =
            std::pow(static_cast<long double>(P) + std::pow(static_cast<long double>(eps), p), 1.0L / p) - eps;
        const double got = smoothed_root(P, eps, p);
        EXPECT_NEAR(got, static_cast<double>(direct), 1e-12 * std::max(1e-300L, std::abs(direct)) + 1e-18)
            << "p=" << p << " eps=" << eps << " P=" << P;
      }
    }
  }
}

TEST(SmoothedRoot, BelowUnsmoothedAndConvergesAsEpsVanishes) {
  for (double P : {1e-6, 0.1, 2.0}) {
    const double exact = std::sqrt(P);
    double prev = 0.0;
    for (double eps : {1.0, 1e-2, 1e-4, 1e-8}) {
      const double s = smoothed_root(P, eps, 2.0);
      EXPECT_LE(s, exact);
      EXPECT_GE(s, prev);
      prev = s;
    }
    EXPECT_NEAR(prev, exact, 1e-7);
    EXPECT_EQ(smoothed_root(P, 0.0, 2.0), exact);
  }
}

TEST(ProblemSpec, Validation) {
  ProblemSpec p = scalar_problem();
  EXPECT_NO_THROW(p.validate());
  p.x0 = Vector::Zero(2);
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = scalar_problem();
  p.p = 1.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = scalar_problem();
  p.horizon = -1.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = scalar_problem();
  p.f = nullptr;
  EXPECT_THROW(p.validate(), InvalidArgument);
}
