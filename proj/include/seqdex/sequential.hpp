#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqdex/acquisition.hpp"
#include "seqdex/gp.hpp"
#include "seqdex/lhd.hpp"

namespace seqdex {

/// The simulator returned a non-finite response.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CandidateSet {
    enum class Provenance { Grid, Lhd };

    Eigen::MatrixXd points;  // unit coordinates
    Provenance provenance = Provenance::Grid;
    std::uint64_t seed = 0;
};

/// d = 1: 1000 equispaced points on [0,1]; d = 2: 100 x 100 grid; d >= 3: a
/// fresh random LHD of 1000 d points drawn from `seed`. Rows within 1e-10 of
/// an existing design point are dropped.
CandidateSet make_candidates(int d, std::uint64_t seed, const Eigen::MatrixXd& existing);

/// Everything needed to replay one stage.
struct StageRecord {
    int stage = 0;                 // 1-based index of the added run
    Eigen::VectorXd x_unit;
    Eigen::VectorXd x_chosen;      // domain coordinates
    double y_observed = 0.0;
    std::string criterion;
    double criterion_value = 0.0;
    std::vector<double> levels;
    Eigen::VectorXd theta;
    double mu_hat = 0.0;
    double sigma2_hat = 0.0;
    double nugget = 0.0;
    std::uint64_t stage_seed = 0;
    std::uint64_t candidate_seed = 0;
    std::uint64_t fit_seed = 0;
    std::size_t n_candidates = 0;
    std::optional<double> smed_shift;
    double smed_p = 0.0;
    /// Interpolation check of the stage's fit at its own training inputs.
    double interp_residual = 0.0;        // max |yhat - y| / (max y - min y)
    double interp_variance_ratio = 0.0;  // max s^2 / sigma2_hat

    /// One JSON-lines record (no trailing newline).
    std::string to_json_line() const;
};

struct SequentialState {
    DesignMatrix design;
    Eigen::VectorXd responses;
    int n0 = 0;
    int budget = 0;
    int stage = 0;  // runs added so far
    std::uint64_t seed = 0;
    std::vector<StageRecord> history;

    int n() const { return design.n(); }
};

/// Simulator callback taking a point in domain coordinates.
using Oracle = std::function<double(const Eigen::VectorXd&)>;

/// Called after every completed stage (for incremental trajectory output).
using StageObserver = std::function<void(const SequentialState&, const StageRecord&)>;

/// Seeds for stage `stage` of a run seeded with `run_seed`.
struct StageSeeds {
    std::uint64_t stage_seed = 0;
    std::uint64_t candidate_seed = 0;
    std::uint64_t fit_seed = 0;
};
StageSeeds stage_seeds(std::uint64_t run_seed, int stage);

/// Outcome of fitting, scoring and picking without touching the simulator.
struct Proposal {
    Eigen::VectorXd x_unit;
    GpSurrogate model;
    CandidateSet candidates;
    CandidateScores scores;
    StageSeeds seeds;
};

/// Fits the surrogate to (design, responses), builds the stage's candidate
/// set and returns the extremal candidate. Shared by the loop and the CLI.
Proposal propose_next(const DesignMatrix& design, const Eigen::VectorXd& responses, const AcquisitionSpec& spec,
                      const FitConfig& fit_config, std::uint64_t run_seed, int stage);

struct InterpolationCheck {
    double residual = 0.0;        // max |yhat(x_i) - y_i| / (max y - min y), range 0 -> absolute
    double variance_ratio = 0.0;  // max s^2(x_i) / sigma2_hat, 0 when sigma2_hat == 0
};
InterpolationCheck interpolation_check(const GpSurrogate& model);

/// Initial state: n0 = design.n(), nothing added yet.
SequentialState initial_state(DesignMatrix design, Eigen::VectorXd responses, int budget, std::uint64_t seed);

/// Adds one run. Throws std::logic_error when the budget is exhausted and
/// OracleError on a non-finite simulator response.
SequentialState step(SequentialState state, const Oracle& oracle, const AcquisitionSpec& spec,
                     const FitConfig& fit_config);

/// Steps until the design holds `budget` runs.
SequentialState run(DesignMatrix initial, Eigen::VectorXd responses, const Oracle& oracle,
                    const AcquisitionSpec& spec, int budget, const FitConfig& fit_config, std::uint64_t seed,
                    const StageObserver& observer = {});

}  // namespace seqdex
