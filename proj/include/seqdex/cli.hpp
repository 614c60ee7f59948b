#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqdex/gp.hpp"
#include "seqdex/lhd.hpp"

namespace seqdex::cli {

/// Settings read from a `--config` JSON file for `fit` and `suggest`.
/// Recognised keys: domain ([[lo, hi], ...]), nugget, max_nugget,
/// log10_theta_bounds ([lo, hi]), n_starts, max_iterations. Anything else is
/// rejected.
struct RunConfig {
    std::optional<Domain> domain;
    FitConfig fit;
};

RunConfig parse_run_config(const std::string& json_text);

/// "lo:hi,lo:hi,..." -> domain.
Domain parse_bounds(const std::string& text);

/// Comma-separated numbers.
std::vector<double> parse_number_list(const std::string& text);

/// Training data from a CSV with columns x1..xd,y in domain coordinates.
struct Dataset {
    DesignMatrix design;  // unit coordinates plus domain
    Eigen::VectorXd y;
};

/// Scales the CSV inputs into the unit cube using `domain` (unit cube when
/// absent). Throws when a point falls outside the domain.
Dataset load_dataset(const std::string& csv_text, const std::optional<Domain>& domain);

enum ExitCode : int { kOk = 0, kError = 1, kUsage = 2, kFailedReplications = 3 };

/// Entry point of the `seqdex` tool. Writes results to `out` and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seqdex::cli
