#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "seqdex/gp.hpp"

namespace seqdex {

enum class Criterion { ContourEI, MultiContourEI, SeqContourVar, EIGF, SMED, MaxVar };

/// CLI spelling: ei-contour | mc | sc-var | eigf | smed | max-var.
std::string_view criterion_name(Criterion c);
/// Throws std::invalid_argument on an unknown name.
Criterion parse_criterion(std::string_view name);

/// Which follow-up criterion to use and its parameters.
///
/// `levels` is the fixed contour set. ContourEI needs exactly one level.
/// MultiContourEI uses `levels` when non-empty, otherwise `k` levels spaced
/// evenly inside the fitted response range each stage. SeqContourVar picks its
/// own level every stage. `p <= 0` means the SMED default of 2d.
struct AcquisitionSpec {
    Criterion kind = Criterion::MultiContourEI;
    std::vector<double> levels;
    double alpha = 2.0;
    double p = 0.0;
    int k = 10;

    /// Checks alpha > 0, p >= 1 (when set), k >= 1 and distinct levels.
    void validate() const;
    std::string to_json() const;
    static AcquisitionSpec from_json(const std::string& text);
};

/// Integration limits of the per-level bands. Empty segments have lower > upper.
struct SegmentBounds {
    std::vector<double> lower;
    std::vector<double> upper;
};

double normal_pdf(double u);
double normal_cdf(double u);

/// Expected contour improvement E[eps^2 - min{(Y - a)^2, eps^2}] with
/// Y ~ N(mean, s^2) and eps = alpha * s. Zero when s == 0.
double ei_contour(const PredictiveDistribution& pred, double level, double alpha);

/// Band limits for sorted, strictly increasing levels: each band a_j +- eps,
/// clipped at the midpoints between neighbouring levels.
SegmentBounds segment_bounds(const PredictiveDistribution& pred, const std::vector<double>& levels, double alpha);

/// Multiple-contour expected improvement: sum over levels of the single
/// contour integral restricted to that level's segment. Levels are sorted
/// first; throws on duplicates. With one level this is ei_contour exactly.
double ei_multi_contour(const PredictiveDistribution& pred, const std::vector<double>& levels, double alpha);

struct AdaptiveLevel {
    std::size_t index = 0;
    double level = 0.0;
};

/// Candidate with the largest predictive variance (lowest index on ties) and its predicted mean.
AdaptiveLevel select_adaptive_level(const std::vector<PredictiveDistribution>& preds);

/// Expected improvement for global fit: squared gap between the predicted
/// mean and the response at the Euclidean-nearest training input, plus s^2.
double eigf(const PredictiveDistribution& pred, const Eigen::VectorXd& x, const Eigen::MatrixXd& train_X,
            const Eigen::VectorXd& train_y);

/// Sequential minimum-energy score sum_i (q_i q_0 / |x_i - x_0|)^p with charges
/// q = (yhat + shift)^(-1/(2d)). Smaller is better; +inf when x0 coincides
/// with a training input.
double smed_score(const Eigen::VectorXd& x0, double x0_prediction, const Eigen::MatrixXd& train_X,
                  const Eigen::VectorXd& train_predictions, double p, double shift);

/// Overload that predicts through the surrogate.
double smed_score(const Eigen::VectorXd& x0, const GpSurrogate& model, double p, double shift);

/// Positivity shift max(0, -min yhat) + 0.05 * (max yhat - min yhat), plus 1
/// when that still leaves the smallest prediction non-positive (flat data).
double smed_shift(const std::vector<double>& predictions);

double max_var(const PredictiveDistribution& pred);

/// k levels evenly spaced strictly inside [min mean, max mean] of the
/// predictions: lo + j (hi - lo)/(k + 1), j = 1..k. Collapses to the single
/// level lo when the predicted range is zero.
std::vector<double> equispaced_levels(const std::vector<PredictiveDistribution>& preds, int k);

/// Result of scoring one candidate set.
struct CandidateScores {
    std::vector<double> scores;
    std::vector<double> levels;        // contour levels actually used (empty for EIGF/SMED/MaxVar)
    std::size_t best_index = 0;
    double best_value = 0.0;
    bool minimize = false;             // true for SMED
    std::optional<double> smed_shift;  // SMED only
    double smed_p = 0.0;               // SMED only
};

/// Scores every candidate row under `spec` and picks the extremal one with
/// lowest-index tie-breaking.
CandidateScores score_candidates(const GpSurrogate& model, const Eigen::MatrixXd& candidates,
                                 const AcquisitionSpec& spec);

}  // namespace seqdex
