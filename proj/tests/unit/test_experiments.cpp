#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "glift/experiments.hpp"

using namespace glift;
namespace fs = std::filesystem;

namespace {

GridSpec small_phase() {
  GridSpec g;
  g.x_axis = {"k", {0.5, 3.0}};
  g.y_axis = Axis{"gamma", {0.02, 0.05}};
  g.fixed = {{"N", 40}, {"M", 30}, {"K", 2}, {"J", 2}};
  g.trials = 3;
  g.base_seed = 5;
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void check_same(const ExperimentTable& a, const ExperimentTable& b) {
  CHECK(a.kind == b.kind);
  CHECK(a.metric == b.metric);
  CHECK(a.axis_names == b.axis_names);
  CHECK(a.axis_lengths == b.axis_lengths);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].point == b.records[i].point);
    CHECK(a.records[i].success_count == b.records[i].success_count);
    CHECK(a.records[i].trial_count == b.records[i].trial_count);
    CHECK(a.records[i].mean_error == b.records[i].mean_error);
    CHECK(a.records[i].std_error == b.records[i].std_error);
  }
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("grid validation") {
  GridSpec g = small_phase();
  CHECK_NOTHROW(g.validate());
  CHECK(g.point_count() == 4);
  g.trials = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small_phase();
  g.fixed["k"] = 1.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small_phase();
  g.x_axis.name = "bogus";
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small_phase();
  g.x_axis.values.clear();
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small_phase();
  g.fixed["N"] = 40.5;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small_phase();
  g.y_axis->name = "k";
  CHECK_THROWS_AS(g.validate(), ConfigError);
  // Wrong axes for the experiment.
  CHECK_THROWS_AS(run_n_vs_k_phase(small_phase()), ConfigError);
  // gamma rescaling with sigma = 0.
  g = small_phase();
  g.fixed["sigma"] = 0.0;
  CHECK_THROWS_AS(run_lambda_gamma_phase(g), ConfigError);
  RunOptions o;
  o.workers = 0;
  CHECK_THROWS_AS(run_lambda_gamma_phase(small_phase(), o), ConfigError);
}

TEST_CASE("default grids are valid and sized") {
  for (ExperimentKind k : {ExperimentKind::phase_lambda, ExperimentKind::phase_nk,
                           ExperimentKind::phase_nj, ExperimentKind::error_lambda,
                           ExperimentKind::error_j}) {
    CHECK_NOTHROW(default_grid(k).validate());
    CHECK_NOTHROW(default_grid(k, true).validate());
    CHECK(parse_experiment_kind(to_string(k)) == k);
  }
  CHECK(default_grid(ExperimentKind::phase_lambda).trials == 20);
  CHECK(default_grid(ExperimentKind::phase_lambda, true).trials == 50);
  CHECK(default_grid(ExperimentKind::error_lambda, true).trials == 100);
  CHECK_THROWS_AS(parse_experiment_kind("phase-xyz"), ConfigError);
}

TEST_CASE("tables are deterministic and independent of the worker count") {
  GridSpec g = small_phase();
  g.trials = 1;
  const std::string a = table_to_csv(run_lambda_gamma_phase(g));
  const std::string b = table_to_csv(run_lambda_gamma_phase(g));
  CHECK(a == b);

  g.trials = 4;
  RunOptions one, three;
  three.workers = 3;
  CHECK(table_to_csv(run_lambda_gamma_phase(g, one)) == table_to_csv(run_lambda_gamma_phase(g, three)));
}

TEST_CASE("record invariants") {
  const ExperimentTable t = run_lambda_gamma_phase(small_phase());
  CHECK(t.axis_lengths == std::vector<std::size_t>{2, 2});
  REQUIRE(t.records.size() == 4);
  CHECK(t.records[1].value("k") == 0.5);
  CHECK(t.records[1].value("gamma") == 0.05);
  CHECK(t.records[2].value("k") == 3.0);
  for (const auto& r : t.records) {
    CHECK(r.success_count <= r.trial_count);
    CHECK(r.mean_error.has_value() == (r.success_count >= 1));
    CHECK(r.std_error.has_value() == (r.success_count >= 1));
  }
  CHECK_THROWS_AS(t.records[0].value("N"), ConfigError);
}

TEST_CASE("single point table and CSV round trip") {
  GridSpec g;
  g.x_axis = {"k", {3.0}};
  g.fixed = {{"N", 40}, {"M", 30}, {"K", 2}, {"J", 2}};
  g.trials = 4;
  const ExperimentTable t = run_error_vs_lambda(g);
  const std::string csv = table_to_csv(t);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 2);
  CHECK(csv.rfind("experiment,k,trials,successes,success_rate,metric,mean_error,std_error\r\n", 0) == 0);
  check_same(t, table_from_csv(csv));

  const ExperimentTable p = run_lambda_gamma_phase(small_phase());
  check_same(p, table_from_csv(table_to_csv(p)));
  CHECK(table_to_csv(table_from_csv(table_to_csv(p))) == table_to_csv(p));
}

TEST_CASE("CSV parser errors carry locations") {
  CHECK_THROWS_AS(table_from_csv(""), ParseError);
  CHECK_THROWS_AS(table_from_csv("foo,bar\r\n"), ParseError);
  const std::string header = "experiment,k,trials,successes,success_rate,metric,mean_error,std_error\r\n";
  try {
    table_from_csv(header + "error-lambda,abc,4,4,1,l2inf,,\r\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 2);
  }
  CHECK_THROWS_AS(table_from_csv(header + "error-lambda,1,4,5,1,l2inf,,\r\n"), ParseError);
  CHECK_THROWS_AS(table_from_csv(header + "error-lambda,1,4\r\n"), ParseError);
  CHECK_THROWS_AS(table_from_csv(header + "\"error-lambda,1,4,4,1,l2inf,,\r\n"), ParseError);
  // Quoted fields are accepted.
  const ExperimentTable t = table_from_csv(header + "\"error-lambda\",1,4,4,1,\"l2inf\",0.5,0.1\r\n");
  CHECK(t.records.at(0).mean_error.value() == 0.5);
}

TEST_CASE("reports") {
  const fs::path dir = fs::temp_directory_path() / "glift_report_test";
  fs::remove_all(dir);
  const ExperimentTable p = run_lambda_gamma_phase(small_phase());
  const auto files = emit_report(p, ReportFormat::both, dir.string(), "phase");
  CHECK(files.size() == 3);
  CHECK(slurp(dir / "phase.csv") == table_to_csv(p));
  std::istringstream pgm(slurp(dir / "phase.pgm"));
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  pgm >> magic >> w >> h >> maxv;
  CHECK(magic == "P2");
  CHECK(w == 2);
  CHECK(h == 2);
  CHECK(maxv == 255);
  std::vector<int> px(4);
  for (int& v : px) pgm >> v;
  // Bottom-left pixel is (k[0], gamma[0]).
  CHECK(px[2] == std::lround(255 * p.records[0].success_rate()));
  CHECK(px[1] == std::lround(255 * p.records[3].success_rate()));

  GridSpec g;
  g.x_axis = {"k", {2.0, 3.0}};
  g.fixed = {{"N", 40}, {"M", 30}, {"K", 2}, {"J", 2}};
  g.trials = 3;
  const ExperimentTable e = run_error_vs_lambda(g);
  emit_report(e, ReportFormat::plot, dir.string(), "err");
  const std::string ppm = slurp(dir / "err.ppm");
  CHECK(ppm.rfind("P6\n640 480\n255\n", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "err.csv"));

  CHECK_THROWS_AS(emit_report(p, ReportFormat::csv, "/proc/glift_nope", "x"), IoError);
  fs::remove_all(dir);
  CHECK(parse_report_format("both") == ReportFormat::both);
  CHECK_THROWS_AS(parse_report_format("svg"), ConfigError);
}

TEST_CASE("fit_line") {
  const LinearFit f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  // y = x^2 on {-1, 0, 1}: slope 0, r2 0.
  const LinearFit q = fit_line({-1, 0, 1}, {1, 0, 1});
  CHECK(q.slope == doctest::Approx(0.0));
  CHECK(q.r2 == doctest::Approx(0.0));
  CHECK_THROWS_AS(fit_line({1}, {1}), ParameterError);
  CHECK_THROWS_AS(fit_line({1, 1}, {1, 2}), ParameterError);
  CHECK_THROWS_AS(fit_line({1, 2}, {1}), ShapeError);
}

TEST_CASE("phase boundary on a synthetic table") {
  ExperimentTable t;
  t.kind = ExperimentKind::phase_nk;
  t.axis_names = {"N", "K"};
  t.axis_lengths = {4, 2};
  const double rates[4][2] = {{0.0, 0.0}, {0.4, 0.0}, {0.8, 0.2}, {1.0, 0.9}};
  const double ns[4] = {10, 20, 30, 40};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      ExperimentRecord r;
      r.point = {{"N", ns[i]}, {"K", double(j + 1)}};
      r.trial_count = 10;
      r.success_count = std::lround(rates[i][j] * 10);
      t.records.push_back(r);
    }
  const auto b = phase_boundary(t, "N", "K", 0.1);
  REQUIRE(b.size() == 2);
  CHECK(b[0].across == 1.0);
  CHECK(b[0].crossing.value() == doctest::Approx(22.5));
  CHECK(b[1].crossing.value() == doctest::Approx(30 + 10 * 0.3 / 0.7));
  CHECK(b[0].monotone);
  const LinearFit f = fit_boundary(b);
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.slope == doctest::Approx(b[1].crossing.value() - 22.5));
  CHECK(boundary_to_csv(b, "K").rfind("K,crossing,monotone\r\n1,22.5,1\r\n", 0) == 0);

  // Never crossing, and a drop beyond the slack.
  t.records[7].success_count = 1;
  t.records[5].success_count = 4;
  const auto b2 = phase_boundary(t, "N", "K", 0.1);
  CHECK_FALSE(b2[1].crossing.has_value());
  CHECK_FALSE(b2[1].monotone);
  CHECK(fit_boundary(b2).r2 == 0.0);
}

TEST_CASE("noiseless lambda sweep drives the error to zero") {
  GridSpec g;
  g.x_axis = {"lambda", {1.0, 0.1, 0.01, 0.001}};
  g.fixed = {{"N", 40}, {"M", 20}, {"K", 2}, {"J", 2}, {"sigma", 0.0}, {"gamma", 0.0}};
  g.trials = 5;
  RunOptions o;
  o.solver.kkt_tol = 1e-10;
  o.solver.max_iters = 20000;
  const ExperimentTable t = run_error_vs_lambda(g, o);
  std::vector<double> means;
  for (const auto& r : t.records) {
    REQUIRE(r.mean_error.has_value());
    means.push_back(*r.mean_error);
  }
  for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] < means[i - 1]);
  CHECK(means.back() < 0.01);
}

TEST_CASE("underdetermined and easy corners of the N x K plane") {
  GridSpec g;
  g.x_axis = {"N", {4, 100}};
  g.y_axis = Axis{"K", {1, 3}};
  g.fixed = {{"J", 3}};
  g.trials = 10;
  const ExperimentTable t = run_n_vs_k_phase(g);
  // N = 4 < JK for K = 3.
  CHECK(t.records[1].success_rate() == 0.0);
  // Largest N, smallest K.
  CHECK(t.records[2].success_rate() >= 0.9);
}

}  // TEST_SUITE
