#pragma once

// Built-in problems. Each entry carries the growth constants its certificate
// needs; those are worked out by hand for the specific dynamics below.

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "exactpen/certificates.hpp"
#include "exactpen/inclusion.hpp"

namespace exactpen {

using AnyProblem = std::variant<ProblemSpec, InclusionProblemSpec>;

struct CatalogEntry {
  std::string id;
  std::string description;
  AnyProblem problem;
  CertificateRecipe recipe;
};

namespace catalog {

inline CatalogEntry lq_scalar() {
  ProblemSpec p;
  p.dim_state = 1;
  p.dim_control = 1;
  p.horizon = 1.0;
  p.x0 = Vector::Constant(1, 1.0);
  p.theta = [](const Vector& x, const Vector& u, double) { return x.squaredNorm() + u.squaredNorm(); };
  p.grad_theta_x = [](const Vector& x, const Vector&, double) -> Vector { return 2.0 * x; };
  p.grad_theta_u = [](const Vector&, const Vector& u, double) -> Vector { return 2.0 * u; };
  p.f = [](const Vector&, const Vector& u, double) -> Vector { return u; };
  p.jac_f_x = [](const Vector&, const Vector&, double) -> Matrix { return Matrix::Zero(1, 1); };
  p.jac_f_u = [](const Vector&, const Vector&, double) -> Matrix { return Matrix::Identity(1, 1); };
  p.zeta = [](const Vector&) { return 0.0; };
  p.grad_zeta = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };

  // theta >= |u|^2 and zeta = 0, so Phi_lambda >= I >= 0 for every lambda.
  // The sublevel set {I <= c} with c = I(u = 0) = 1 (x stays at 1) bounds
  // ||u||_2 <= sqrt(c) = K; with |f| <= |u| this gives C_R = 0 and
  // ||omega_R||_1 <= T^{1/2} K. U is all of R, so the control sampling box is
  // the L_2 bound K used as a radius.
  const double level = 1.0;
  const double k = std::sqrt(level);
  CertificateRecipe r;
  r.boundedness = CoerciveCase::coercive_in_control;
  r.gronwall = GronwallConstants{0.0, std::sqrt(p.horizon) * k, 0.0, 0.0};
  r.delta = 1.0;
  r.control_lower = Vector::Constant(1, -r.inflation * k);
  r.control_upper = Vector::Constant(1, r.inflation * k);
  r.note = "unbounded U: control box radius taken from the L_2 bound on the sublevel set";
  return {"lq-scalar", "min int_0^1 x^2 + u^2, x' = u, x(0) = 1, u free", std::move(p), r};
}

inline CatalogEntry double_integrator() {
  ProblemSpec p;
  p.dim_state = 2;
  p.dim_control = 1;
  p.horizon = 2.0;
  p.x0 = Vector::Zero(2);
  const Vector target = (Vector(2) << 1.0, 0.0).finished();
  p.theta = [](const Vector&, const Vector& u, double) { return u.squaredNorm(); };
  p.grad_theta_x = [](const Vector& x, const Vector&, double) -> Vector { return Vector::Zero(x.size()); };
  p.grad_theta_u = [](const Vector&, const Vector& u, double) -> Vector { return 2.0 * u; };
  p.f = [](const Vector& x, const Vector& u, double) -> Vector {
    return (Vector(2) << x[1], u[0]).finished();
  };
  p.jac_f_x = [](const Vector&, const Vector&, double) -> Matrix {
    return (Matrix(2, 2) << 0.0, 1.0, 0.0, 0.0).finished();
  };
  p.jac_f_u = [](const Vector&, const Vector&, double) -> Matrix {
    return (Matrix(2, 1) << 0.0, 1.0).finished();
  };
  p.zeta = [target](const Vector& x) { return (x - target).squaredNorm(); };
  p.grad_zeta = [target](const Vector& x) -> Vector { return 2.0 * (x - target); };
  p.control_set = ControlSet::box(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));

  // |f| <= |x| + |u| <= |x| + 1 on U; theta, zeta >= 0.
  CertificateRecipe r;
  r.boundedness = CoerciveCase::bounded_control;
  r.gronwall = GronwallConstants{1.0, p.horizon, 0.0, 0.0};
  r.control_lower = Vector::Constant(1, -1.0);
  r.control_upper = Vector::Constant(1, 1.0);
  return {"double-integrator",
          "min int_0^2 u^2 + |x(2) - (1,0)|^2, x1' = x2, x2' = u, |u| <= 1", std::move(p), r};
}

inline CatalogEntry logistic_harvest() {
  ProblemSpec p;
  p.dim_state = 1;
  p.dim_control = 1;
  p.horizon = 2.0;
  p.x0 = Vector::Constant(1, 0.5);
  p.theta = [](const Vector& x, const Vector& u, double) { return -u[0] * x[0]; };
  p.grad_theta_x = [](const Vector&, const Vector& u, double) -> Vector { return -u; };
  p.grad_theta_u = [](const Vector& x, const Vector&, double) -> Vector { return -x; };
  p.f = [](const Vector& x, const Vector& u, double) -> Vector {
    return Vector::Constant(1, x[0] * (1.0 - x[0]) - u[0]);
  };
  p.jac_f_x = [](const Vector& x, const Vector&, double) -> Matrix {
    return Matrix::Constant(1, 1, 1.0 - 2.0 * x[0]);
  };
  p.jac_f_u = [](const Vector&, const Vector&, double) -> Matrix { return Matrix::Constant(1, 1, -1.0); };
  p.zeta = [](const Vector&) { return 0.0; };
  p.grad_zeta = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  p.control_set = ControlSet::box(Vector::Constant(1, 0.0), Vector::Constant(1, 0.8));

  // On |x| <= R: |f| <= (1 + R)|x| + 0.8 and theta >= -0.8|x|. The growth is
  // only linear on a ball, so the constants below are taken at R = 1 and the
  // resulting sup bound is not self-consistent (it exceeds R).
  const double radius = 1.0;
  CertificateRecipe r;
  r.boundedness = CoerciveCase::bounded_control;
  r.gronwall = GronwallConstants{1.0 + radius, 0.8 * p.horizon, 0.0, 0.0};
  r.control_lower = Vector::Constant(1, 0.0);
  r.control_upper = Vector::Constant(1, 0.8);
  r.note = "growth constants fitted on |x| <= 1; the Grönwall sup bound exceeds that radius, "
           "so the certificate is not self-consistent";
  return {"logistic-harvest", "max int_0^2 u x, x' = x(1 - x) - u, 0 <= u <= 0.8", std::move(p), r};
}

inline CatalogEntry inclusion_ball() {
  InclusionProblemSpec p;
  p.dim_state = 2;
  p.horizon = 2.0;
  p.x0 = (Vector(2) << 1.0, 0.0).finished();
  const Matrix a = (Matrix(2, 2) << 0.0, -1.0, 1.0, 0.0).finished();
  p.theta = [](const Vector& x, double) { return x.squaredNorm(); };
  p.grad_theta_x = [](const Vector& x, double) -> Vector { return 2.0 * x; };
  p.zeta = [](const Vector&) { return 0.0; };
  p.grad_zeta = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  p.set_model = linear_ball(a, 0.5);

  // dist(0, F(x)) <= |A x| + 0.5 with |A| = 1.
  CertificateRecipe r;
  r.boundedness = CoerciveCase::bounded_control;
  r.gronwall = GronwallConstants{1.0, 0.5 * p.horizon, 0.0, 0.0};
  return {"inclusion-ball", "min int_0^2 |x|^2, x' in B(A x, 0.5), A = rotation by 90 degrees",
          std::move(p), r};
}

}  // namespace catalog

inline std::vector<CatalogEntry> catalog_entries() {
  return {catalog::lq_scalar(), catalog::double_integrator(), catalog::logistic_harvest(),
          catalog::inclusion_ball()};
}

inline std::vector<std::pair<std::string, std::string>> catalog_list() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : catalog_entries()) out.emplace_back(e.id, e.description);
  return out;
}

inline CatalogEntry catalog_get(const std::string& id) {
  std::vector<std::string> ids;
  for (auto& e : catalog_entries()) {
    if (e.id == id) return e;
    ids.push_back(e.id);
  }
  throw NotFound(id, ids);
}

inline double problem_horizon(const AnyProblem& p) {
  return std::visit([](const auto& q) { return q.horizon; }, p);
}

inline int problem_dim_state(const AnyProblem& p) {
  return std::visit([](const auto& q) { return q.dim_state; }, p);
}

}  // namespace exactpen
