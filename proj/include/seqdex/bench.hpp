#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "seqdex/acquisition.hpp"
#include "seqdex/gp.hpp"
#include "seqdex/lhd.hpp"

namespace seqdex {

struct TestFunction {
    std::string name;
    int d = 0;
    Domain domain;
    std::function<double(const Eigen::VectorXd&)> eval;
};

/// gramacy_lee, two_dim, branin, product3, poly4.
const TestFunction& get_test_function(std::string_view name);
const std::vector<std::string>& test_function_names();

/// Evaluates at a domain-scaled point; throws std::invalid_argument outside the domain.
double evaluate_test_function(std::string_view name, const Eigen::VectorXd& x);

/// Root mean square of pred - truth. Throws on length mismatch or empty input.
double rmspe(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);
/// max |pred - truth|. Throws on length mismatch or empty input.
double max_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Fixed settings of one simulated example.
struct ExampleSetup {
    std::string name;      // ex1 .. ex5
    std::string function;  // test function name
    int n0 = 0;
    int budget = 0;
    int mc_k = 10;
    std::vector<double> mc_levels;   // fixed MC levels; empty -> k equispaced
    std::optional<double> ei_level;  // default level for ei-contour
};

const ExampleSetup& get_example(std::string_view name);

/// Method names accepted by the harness.
inline constexpr std::string_view kOneShotMethod = "maximin-lhd-oneshot";
/// The six-method roster used when `--methods all` is given.
const std::vector<std::string>& all_methods();

struct ExperimentRecord {
    std::string method;
    int replication = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double rmspe = 0.0;
    double max_error = 0.0;
    std::optional<double> rmspe_initial;     // sequential methods: hold-out RMSPE of the n0-point fit
    std::optional<double> max_error_initial;
    double interp_residual = 0.0;            // worst |yhat - y| / range(y) at training inputs over all fits
    double interp_variance_ratio = 0.0;      // worst s^2 / sigma2_hat at training inputs over all fits
    std::vector<Eigen::VectorXd> added_points;  // domain coordinates of sequentially added runs
    std::string trajectory_path;
};

struct Quartiles {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Linear-interpolation sample quantiles (the R type 7 default).
Quartiles quartiles(std::vector<double> values);

struct MethodSummary {
    std::string method;
    int n_ok = 0;
    int n_failed = 0;
    Quartiles rmspe;
    Quartiles max_error;
};

struct MetricsSummary {
    std::string example;
    std::vector<MethodSummary> methods;

    const MethodSummary& method(std::string_view name) const;
    std::string to_csv() const;
    static MetricsSummary from_csv(const std::string& text);
    /// Markdown table of the quartiles.
    std::string to_markdown() const;
    /// Whitespace-separated candlestick data: index method min q1 median q3 max (rmspe), then max error.
    std::string to_gnuplot() const;
};

struct BenchConfig {
    std::string example = "ex3";
    std::vector<std::string> methods;  // empty -> all_methods()
    int reps = 50;
    std::uint64_t base_seed = 20240601;
    int workers = 1;
    std::string out_dir;               // empty: keep results in memory only
    bool resume = false;               // reuse completed rep<k>.jsonl files
    double alpha = 2.0;
    std::optional<int> k;
    std::vector<double> levels;        // overrides the example's MC / ei-contour levels
    double p = 0.0;                    // SMED exponent, 0 -> 2d
    int n0 = 0;                        // 0 -> example default
    int budget = 0;                    // 0 -> example default
    FitConfig fit;
    MaximinOptions maximin;
};

struct BenchResult {
    MetricsSummary summary;
    std::vector<ExperimentRecord> records;  // ordered by (method, replication)
    int failures = 0;
};

/// Seed of replication `rep`: derive_seed(base_seed, rep).
std::uint64_t replication_seed(std::uint64_t base_seed, int rep);

/// Runs every method on `reps` paired replications: per replication all
/// methods share the maximin initial design, the hold-out LHD of 1000 d
/// points and the per-stage candidate seeds.
BenchResult run_benchmark(const BenchConfig& config);

/// Acquisition spec used for sequential `method` on `example` under `config`.
/// ei-contour without a configured level uses the midpoint of the initial
/// responses' range.
AcquisitionSpec method_spec(const std::string& method, const ExampleSetup& example, const BenchConfig& config,
                            const Eigen::VectorXd& initial_responses);

}  // namespace seqdex
