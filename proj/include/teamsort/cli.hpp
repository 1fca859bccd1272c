#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "teamsort/dist.hpp"

namespace teamsort::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kSolverFailure = 3 };

// Parses a distribution spec: "uniform", "uniform:a,b", "beta:a,b",
// "figure1", or a path to a p,I knot CSV.
TypeDistribution parse_dist_spec(const std::string& spec);

// Runs one subcommand. Human-readable messages go to `err`, a short report to
// `out`. A summary JSON is written next to the primary output unless
// --summary names another path.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace teamsort::cli
