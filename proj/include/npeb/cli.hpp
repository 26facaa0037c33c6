#pragma once

// Command-line front end. Exit codes: 0 success, 1 input error, 2 numerical
// failure (solver did not converge, infeasible constraints, degenerate fit).

#include <string>
#include <vector>

#include "npeb/model.hpp"

namespace npeb {

int run_cli(int argc, const char* const* argv);

/// "start:step:stop" or a comma-separated list of values.
std::vector<double> parse_grid_spec(const std::string& spec);

/// Observation CSV: an `outcome` column and an optional `count` column.
std::vector<std::string> read_observations_csv(const std::string& path);

/// Calibration CSV: `target`, optional `name`, and one column per grid label
/// holding that cell's coefficient (absent labels get 0).
std::vector<CalibrationConstraint> read_calibration_csv(const std::string& path,
                                                        const SupportGrid& grid);

/// h-file: columns `label,h` covering every grid label exactly once.
Functional read_functional_csv(const std::string& path, const SupportGrid& grid);

}  // namespace npeb
