// exactpen command line: list | solve | certify | plateau <config.json>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "exactpen/exactpen.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> grid;
  std::optional<double> lambda;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("config", o.config_path, "run configuration (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "sampling seed");
  cmd->add_option("--grid", o.grid, "number of grid intervals N");
  cmd->add_option("--lambda", o.lambda, "initial penalty parameter");
}

void print_summary(const exactpen::RunReport& rep) {
  using namespace exactpen;
  if (!rep.error.empty()) std::fprintf(stderr, "error: %s\n", rep.error.c_str());
  if (rep.certificate) {
    const auto& c = *rep.certificate;
    std::printf("certificate: L=%.6g (sampled) M=%.6g (sampled) a=%.6g lambda0=%.6g lambda*=%.6g\n",
                c.L, c.M, c.a, c.lambda0, c.lambda_star);
  }
  if (rep.solution) {
    const auto& s = *rep.solution;
    std::printf("%s: I=%.10g phi=%.3e lambda=%g eps=%g iterations=%d stationarity=%.3e\n",
                to_string(s.status), s.objective, s.phi, s.lambda, s.eps, s.inner_iterations,
                s.stationarity);
  }
  if (rep.plateau) {
    for (const auto& p : rep.plateau->points)
      std::printf("lambda=%-10g Phi=%.10g I=%.10g phi=%.3e %s\n", p.lambda, p.Phi, p.objective,
                  p.phi, p.error.empty() ? to_string(p.status) : p.error.c_str());
    if (rep.plateau->plateau_lambda)
      std::printf("plateau from lambda=%g, value %.10g\n", *rep.plateau->plateau_lambda,
                  *rep.plateau->plateau_value);
    else
      std::printf("no plateau detected on this lambda grid\n");
  }
}

int execute(const Overrides& o, exactpen::RunMode mode) {
  using namespace exactpen;
  RunConfig cfg;
  try {
    cfg = load_run_config(o.config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.grid) cfg.grid = *o.grid;
  if (o.lambda) {
    cfg.solver.lambda_init = *o.lambda;
    cfg.solver.lambda_max = std::max(cfg.solver.lambda_max, *o.lambda);
  }
  const RunReport rep = run(cfg, mode);
  print_summary(rep);
  try {
    write_outputs(rep, cfg.output_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rep.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact penalty solver for free-endpoint optimal control"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list catalog problems");
  Overrides solve_o, cert_o, plat_o;
  auto* solve = app.add_subcommand("solve", "penalty continuation solve");
  add_common(solve, solve_o);
  auto* certify = app.add_subcommand("certify", "compute the exactness certificate");
  add_common(certify, cert_o);
  auto* plateau = app.add_subcommand("plateau", "lambda sweep and plateau detection");
  add_common(plateau, plat_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (list->parsed()) {
    for (const auto& [id, desc] : exactpen::catalog_list()) std::printf("%-18s %s\n", id.c_str(), desc.c_str());
    return 0;
  }
  if (solve->parsed()) return execute(solve_o, exactpen::RunMode::solve);
  if (certify->parsed()) return execute(cert_o, exactpen::RunMode::certify);
  if (plateau->parsed()) return execute(plat_o, exactpen::RunMode::plateau);
  return 1;
}
