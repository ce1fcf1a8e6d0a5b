#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dtrans/parse.hpp"

namespace dtrans {

struct CliOptions {
  // check-transversality, check-jet-transversality, check-regularity, perturb,
  // construct-prescribed, tubular, experiment, validate
  std::string command;
  // experiment only: escape, d0, openness, trotman, density
  std::string experiment;
  std::string problem_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> samples;
  bool exact = false;
  bool timing = false;
};

struct CliOutcome {
  // 0 clean verdict, 1 negative verdict, 2 input or convergence error
  int exit_code = 2;
  Json report;
  std::string summary;
};

// Never throws; errors become exit code 2 with an "error" block in the report.
CliOutcome run_command(const CliOptions& opts);

}  // namespace dtrans
