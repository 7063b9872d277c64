#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "exactpen/io.hpp"
#include "support.hpp"

using namespace exactpen;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("exactpen_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

RunConfig lq_config(int grid = 60) {
  RunConfig c;
  c.problem = "lq-scalar";
  c.grid = grid;
  c.rule = EvaluationRule::midpoint;
  c.seed = 7;
  c.samples = 500;
  return c;
}

}  // namespace

TEST(Catalog, ListsFourProblemsWithUniqueIds) {
  const auto list = catalog_list();
  ASSERT_EQ(list.size(), 4u);
  std::set<std::string> ids;
  for (const auto& [id, desc] : list) {
    ids.insert(id);
    EXPECT_FALSE(desc.empty());
    EXPECT_EQ(catalog_get(id).id, id);
  }
  EXPECT_EQ(ids.size(), 4u);
}

TEST(Catalog, UnknownIdListsAlternatives) {
  try {
    catalog_get("no-such-problem");
    FAIL() << "expected NotFound";
  } catch (const NotFound& e) {
    EXPECT_NE(std::string(e.what()).find("lq-scalar"), std::string::npos);
  }
}

TEST(Config, ParsesFieldsAndOverrides) {
  const RunConfig c = parse_run_config(R"({
    "problem": "double-integrator", "grid": 40, "p": 3, "quadrature": "midpoint",
    "solver": {"lambda_init": 2, "tol_feas": 1e-7}, "plateau_lambdas": [1, 10], "seed": 5
  })");
  EXPECT_EQ(c.problem, "double-integrator");
  EXPECT_EQ(c.grid, 40);
  EXPECT_EQ(c.p, 3.0);
  EXPECT_EQ(c.rule, EvaluationRule::midpoint);
  EXPECT_EQ(c.solver.lambda_init, 2.0);
  EXPECT_EQ(c.solver.tol_feas, 1e-7);
  EXPECT_EQ(c.solver.max_inner, SolverConfig{}.max_inner);
  EXPECT_EQ(c.plateau_lambdas.size(), 2u);
  EXPECT_EQ(c.seed, 5u);
  // round trip through the serialized form
  const RunConfig back = parse_run_config(to_json(c).dump());
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Config, MalformedJsonReportsLine) {
  try {
    parse_run_config("{\n  \"problem\": \"lq-scalar\",\n  \"grid\": ,\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config(R"({"problem": "lq-scalar", "gird": 10})"), InvalidArgument);
  EXPECT_THROW(parse_run_config(R"({"problem": "lq-scalar", "solver": {"lamda": 1}})"), InvalidArgument);
  EXPECT_THROW(parse_run_config(R"({"problem": "lq-scalar", "quadrature": "simpson"})"), InvalidArgument);
  EXPECT_THROW(parse_run_config(R"({"grid": 10})"), InvalidArgument);
  EXPECT_THROW(parse_run_config(R"({"problem": "lq-scalar", "grid": "ten"})"), InvalidArgument);
  EXPECT_THROW(parse_run_config("[1, 2]"), ParseError);
}

TEST(Config, ShippedConfigsLoad) {
  for (const auto& entry : fs::directory_iterator(EXACTPEN_SOURCE_DIR "/configs")) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_run_config(entry.path().string()).validate()) << entry.path();
  }
}

TEST(Outputs, TrajectoryCsvLayout) {
  RunConfig c = lq_config(200);
  const RunReport rep = run(c, RunMode::solve);
  ASSERT_TRUE(rep.error.empty()) << rep.error;
  const fs::path dir = scratch_dir("csv");
  write_outputs(rep, dir.string());
  const fs::path csv = dir / "trajectory.csv";
  ASSERT_TRUE(fs::exists(csv));
  EXPECT_EQ(count_lines(csv), 202);  // header + N + 1 nodes
  std::ifstream in(csv);
  std::string header, last;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x1,z1,u1");
  for (std::string line; std::getline(in, line);) last = line;
  // z and u are interval samples: blank on the final node
  EXPECT_EQ(last.substr(last.size() - 2), ",,");
  EXPECT_TRUE(last.rfind("1,", 0) == 0);
  EXPECT_FALSE(fs::exists(dir / "certificate.json"));
}

TEST(Outputs, CsvRoundTripPreservesValues) {
  const RunReport rep = run(lq_config(), RunMode::solve);
  ASSERT_TRUE(rep.solution.has_value());
  const fs::path dir = scratch_dir("roundtrip");
  write_outputs(rep, dir.string());
  const Trajectory back = read_trajectory_csv((dir / "trajectory.csv").string(), EvaluationRule::midpoint);
  const ProblemSpec p = std::get<ProblemSpec>(configured_problem(rep.config));
  EXPECT_EQ(back.z, rep.solution->trajectory.z);
  EXPECT_EQ(back.u, rep.solution->trajectory.u);
  EXPECT_NEAR(eval_penalty(back, p, 0.0), rep.solution->phi, 1e-12);
  EXPECT_NEAR(eval_objective(back, p), rep.solution->objective, 1e-12);
}

TEST(Outputs, ReportIsDeterministicApartFromTiming) {
  RunConfig c = lq_config();
  c.certificate = true;
  auto strip = [](nlohmann::json j) {
    j.erase("timing");
    return j.dump();
  };
  const nlohmann::json a = to_json(run(c, RunMode::solve));
  const nlohmann::json b = to_json(run(c, RunMode::solve));
  EXPECT_TRUE(a.contains("timing"));
  EXPECT_EQ(strip(a), strip(b));
}

TEST(Outputs, CertificateFileWithProvenance) {
  RunConfig c = lq_config();
  const RunReport rep = run(c, RunMode::certify);
  EXPECT_EQ(rep.exit_code(), 0);
  const fs::path dir = scratch_dir("cert");
  write_outputs(rep, dir.string());
  ASSERT_TRUE(fs::exists(dir / "certificate.json"));
  std::ifstream in(dir / "certificate.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  for (const char* key : {"L", "M", "omega", "a", "lambda0", "lambda_star"}) {
    ASSERT_TRUE(j.contains(key)) << key;
    EXPECT_TRUE(j[key].contains("provenance")) << key;
  }
  EXPECT_NEAR(j["lambda_star"]["value"].get<double>(), 17.6, 1e-9);
  EXPECT_TRUE(j.contains("growth_fit"));
  EXPECT_FALSE(fs::exists(dir / "trajectory.csv"));
}

TEST(Outputs, PlateauReportHasOneEntryPerLambda) {
  RunConfig c = lq_config(40);
  c.plateau_lambdas = {0.1, 1.0, 10.0, 100.0};
  const RunReport rep = run(c, RunMode::plateau);
  ASSERT_TRUE(rep.error.empty()) << rep.error;
  const nlohmann::json j = to_json(rep);
  ASSERT_TRUE(j.contains("plateau"));
  EXPECT_EQ(j["plateau"]["points"].size(), 4u);
  EXPECT_EQ(rep.exit_code(), 0);
}

TEST(ExitCodes, SuccessSolverFailureAndError) {
  EXPECT_EQ(run(lq_config(), RunMode::solve).exit_code(), 0);

  RunConfig capped = lq_config();
  capped.solver.lambda_init = 0.01;
  capped.solver.lambda_max = 0.01;
  EXPECT_EQ(run(capped, RunMode::solve).exit_code(), 2);

  RunConfig unknown = lq_config();
  unknown.problem = "no-such-problem";
  const RunReport bad = run(unknown, RunMode::solve);
  EXPECT_EQ(bad.exit_code(), 1);
  EXPECT_FALSE(bad.error.empty());

  RunConfig no_grid = lq_config();
  EXPECT_EQ(run(no_grid, RunMode::plateau).exit_code(), 1);
}
