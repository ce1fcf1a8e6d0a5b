#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dtrans/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dtrans: transversality, jets and Whitney (a)-regularity checks"};
  app.require_subcommand(1);
  app.fallthrough();

  dtrans::CliOptions opts;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int samples = 0;
  std::string report_path;
  auto* seed_opt = app.add_option("--seed", seed, "seed for every random draw (overrides the problem file)");
  auto* tol_opt = app.add_option("--tol", tol, "membership tolerance")->check(CLI::PositiveNumber);
  auto* samples_opt = app.add_option("--samples", samples, "sample count per axis or per stratum")->check(CLI::PositiveNumber);
  app.add_option("--report", report_path, "write the JSON report here instead of stdout");
  app.add_flag("--exact", opts.exact, "rational arithmetic only; refuse non-polynomial data");
  app.add_flag("--timing", opts.timing, "include wall-clock time in the report");

  const char* plain[] = {"check-transversality", "check-jet-transversality", "check-regularity", "perturb",
                         "construct-prescribed", "tubular",                 "validate"};
  for (const char* name : plain) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("problem", opts.problem_path, "problem file")->required();
    sub->callback([&opts, name] { opts.command = name; });
  }
  auto* exp = app.add_subcommand("experiment", "run a scripted experiment");
  exp->add_option("name", opts.experiment, "experiment name")
      ->required()
      ->check(CLI::IsMember({"escape", "d0", "openness", "trotman", "density"}));
  exp->add_option("problem", opts.problem_path, "problem file")->required();
  exp->callback([&opts] { opts.command = "experiment"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) opts.seed = seed;
  if (*tol_opt) opts.tol = tol;
  if (*samples_opt) opts.samples = samples;

  const dtrans::CliOutcome out = dtrans::run_command(opts);
  const std::string text = out.report.dump(2) + "\n";
  if (report_path.empty()) {
    std::cout << text;
    std::cerr << out.summary << "\n";
  } else {
    std::ofstream f(report_path, std::ios::binary);
    f << text;
    if (!f) {
      std::cerr << "error: cannot write " << report_path << "\n";
      return 2;
    }
    std::cout << out.summary << "\n";
  }
  return out.exit_code;
}
