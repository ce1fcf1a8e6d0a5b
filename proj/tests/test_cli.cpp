#include <doctest.h>

#include "dtrans/cli.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

CliOutcome run(const std::string& command, const std::string& problem, const std::string& experiment = "") {
  CliOptions o;
  o.command = command;
  o.experiment = experiment;
  o.problem_path = oracle::fixture(problem);
  return run_command(o);
}

}  // namespace

TEST_CASE("exit codes follow the verdict") {
  CHECK(run("check-transversality", "example23.json").exit_code == 1);
  CHECK(run("check-transversality", "circle.json").exit_code == 0);
  CHECK(run("validate", "flat.json").exit_code == 0);
  CHECK(run("validate", "invalid_frontier.json").exit_code == 1);
  CHECK(run("check-regularity", "cone.json").exit_code == 1);
  CHECK(run("check-regularity", "umbrella.json").exit_code == 0);
  CHECK(run("perturb", "perturb_flat.json").exit_code == 0);
  CHECK(run("check-jet-transversality", "perturb_flat.json").exit_code == 1);
  CHECK(run("experiment", "d0.json", "d0").exit_code == 0);
}

TEST_CASE("errors become exit code 2 with an error block") {
  const CliOutcome missing = run("validate", "nope.json");
  CHECK(missing.exit_code == 2);
  CHECK(missing.report.at("error").at("code") == "SchemaError");

  const CliOutcome exhausted = run("perturb", "perturb_exhausted.json");
  CHECK(exhausted.exit_code == 2);
  CHECK(exhausted.report.at("error").at("code") == "ExhaustedDraws");

  const CliOutcome no_fault = run("experiment", "umbrella.json", "trotman");
  CHECK(no_fault.exit_code == 2);
  CHECK(no_fault.report.at("error").at("code") == "HypothesisFailed");

  CHECK(run("construct-prescribed", "circle.json").exit_code == 2);
  CHECK(run("bogus", "flat.json").exit_code == 2);
}

TEST_CASE("exact mode refuses non-polynomial data") {
  CliOptions o;
  o.command = "perturb";
  o.problem_path = oracle::fixture("perturb_flat.json");
  o.exact = true;
  const CliOutcome r = run_command(o);
  CHECK(r.exit_code == 2);
  CHECK(r.report.at("error").at("code") == "NotPolynomial");

  o.command = "check-transversality";
  o.problem_path = oracle::fixture("circle_tangent.json");
  const CliOutcome t = run_command(o);
  CHECK(t.exit_code == 1);
  CHECK(t.report.at("options").at("exact") == true);
}

TEST_CASE("reports are deterministic and carry time only on request") {
  CliOptions o;
  o.command = "experiment";
  o.experiment = "trotman";
  o.problem_path = oracle::fixture("cone.json");
  o.seed = 7;
  const CliOutcome a = run_command(o), b = run_command(o);
  CHECK(a.report.dump() == b.report.dump());
  CHECK_FALSE(a.report.contains("wall_clock_seconds"));
  CHECK(a.report.at("seed") == 7);
  o.timing = true;
  CHECK(run_command(o).report.contains("wall_clock_seconds"));
}

TEST_CASE("overrides from the command line") {
  CliOptions o;
  o.command = "check-transversality";
  o.problem_path = oracle::fixture("example23.json");
  o.samples = 5;
  o.seed = 99;
  const CliOutcome r = run_command(o);
  CHECK(r.report.at("seed") == 99);
  CHECK(r.report.at("options").at("samples") == 5);
  CHECK(r.report.at("results").at("samples") == 5);
}
