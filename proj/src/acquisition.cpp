#include "seqdex/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace seqdex {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// P(u1 < Z < u2), evaluated on the tail side to avoid cancellation near 1.
double normal_mass(double u1, double u2) {
    if (u1 > 0.0) return 0.5 * (std::erfc(u1 * kInvSqrt2) - std::erfc(u2 * kInvSqrt2));
    return 0.5 * (std::erfc(-u2 * kInvSqrt2) - std::erfc(-u1 * kInvSqrt2));
}

// Closed form of int_{v1}^{v2} [eps^2 - (t - a)^2] N(t; mean, s^2) dt, s > 0, v1 <= v2.
double band_term(double mean, double s, double level, double eps, double v1, double v2) {
    const double u1 = (v1 - mean) / s;
    const double u2 = (v2 - mean) / s;
    const double gap = mean - level;
    const double phi1 = normal_pdf(u1);
    const double phi2 = normal_pdf(u2);
    return (eps * eps - gap * gap - s * s) * normal_mass(u1, u2) + s * s * (u2 * phi2 - u1 * phi1) +
           2.0 * gap * s * (phi2 - phi1);
}

void check_strictly_increasing(const std::vector<double>& levels) {
    if (levels.empty()) throw std::invalid_argument("contour levels must be non-empty");
    for (std::size_t j = 0; j < levels.size(); ++j) {
        if (!std::isfinite(levels[j])) throw std::invalid_argument("contour levels must be finite");
        if (j > 0 && !(levels[j - 1] < levels[j])) {
            throw std::invalid_argument("contour levels must be strictly increasing");
        }
    }
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
}

bool better(double candidate, double incumbent, bool minimize) {
    if (std::isnan(candidate)) return false;
    if (std::isnan(incumbent)) return true;
    return minimize ? candidate < incumbent : candidate > incumbent;
}

}  // namespace

std::string_view criterion_name(Criterion c) {
    switch (c) {
        case Criterion::ContourEI: return "ei-contour";
        case Criterion::MultiContourEI: return "mc";
        case Criterion::SeqContourVar: return "sc-var";
        case Criterion::EIGF: return "eigf";
        case Criterion::SMED: return "smed";
        case Criterion::MaxVar: return "max-var";
    }
    return "?";
}

Criterion parse_criterion(std::string_view name) {
    for (auto c : {Criterion::ContourEI, Criterion::MultiContourEI, Criterion::SeqContourVar, Criterion::EIGF,
                   Criterion::SMED, Criterion::MaxVar}) {
        if (criterion_name(c) == name) return c;
    }
    throw std::invalid_argument("unknown criterion '" + std::string(name) +
                                "' (expected ei-contour, mc, sc-var, eigf, smed or max-var)");
}

void AcquisitionSpec::validate() const {
    check_alpha(alpha);
    if (p > 0.0 && p < 1.0) throw std::invalid_argument("SMED exponent p must be >= 1");
    if (k < 1) throw std::invalid_argument("contour count k must be >= 1");
    if (kind == Criterion::ContourEI && levels.size() != 1) {
        throw std::invalid_argument("ei-contour needs exactly one contour level");
    }
    if (!levels.empty()) {
        auto sorted = levels;
        std::sort(sorted.begin(), sorted.end());
        check_strictly_increasing(sorted);
    }
}

std::string AcquisitionSpec::to_json() const {
    nlohmann::json j;
    j["criterion"] = std::string(criterion_name(kind));
    j["levels"] = levels;
    j["alpha"] = alpha;
    j["p"] = p;
    j["k"] = k;
    return j.dump();
}

AcquisitionSpec AcquisitionSpec::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [key, _] : j.items()) {
        if (key != "criterion" && key != "levels" && key != "alpha" && key != "p" && key != "k") {
            throw std::invalid_argument("acquisition spec: unknown field '" + key + "'");
        }
    }
    AcquisitionSpec spec;
    spec.kind = parse_criterion(j.at("criterion").get<std::string>());
    spec.levels = j.value("levels", std::vector<double>{});
    spec.alpha = j.value("alpha", 2.0);
    spec.p = j.value("p", 0.0);
    spec.k = j.value("k", 10);
    spec.validate();
    return spec;
}

double normal_pdf(double u) { return std::exp(-0.5 * u * u) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

double normal_cdf(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }

double ei_contour(const PredictiveDistribution& pred, double level, double alpha) {
    check_alpha(alpha);
    const double s = pred.sd();
    if (!(s > 0.0)) return 0.0;
    const double eps = alpha * s;
    return std::max(0.0, band_term(pred.mean, s, level, eps, level - eps, level + eps));
}

SegmentBounds segment_bounds(const PredictiveDistribution& pred, const std::vector<double>& levels, double alpha) {
    check_alpha(alpha);
    check_strictly_increasing(levels);
    const double eps = alpha * pred.sd();
    const auto k = levels.size();
    SegmentBounds out;
    out.lower.resize(k);
    out.upper.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double a = levels[j];
        out.lower[j] = j == 0 ? a - eps : std::max(a - eps, 0.5 * (levels[j - 1] + a));
        out.upper[j] = j + 1 == k ? a + eps : std::min(a + eps, 0.5 * (a + levels[j + 1]));
    }
    return out;
}

double ei_multi_contour(const PredictiveDistribution& pred, const std::vector<double>& levels, double alpha) {
    check_alpha(alpha);
    auto sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    const auto bounds = segment_bounds(pred, sorted, alpha);
    const double s = pred.sd();
    if (!(s > 0.0)) return 0.0;
    const double eps = alpha * s;
    double total = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        if (bounds.lower[j] > bounds.upper[j]) continue;
        total += band_term(pred.mean, s, sorted[j], eps, bounds.lower[j], bounds.upper[j]);
    }
    return std::max(0.0, total);
}

AdaptiveLevel select_adaptive_level(const std::vector<PredictiveDistribution>& preds) {
    if (preds.empty()) throw std::invalid_argument("select_adaptive_level: empty candidate set");
    AdaptiveLevel out;
    for (std::size_t i = 1; i < preds.size(); ++i) {
        if (preds[i].variance > preds[out.index].variance) out.index = i;
    }
    out.level = preds[out.index].mean;
    return out;
}

double eigf(const PredictiveDistribution& pred, const Eigen::VectorXd& x, const Eigen::MatrixXd& train_X,
            const Eigen::VectorXd& train_y) {
    if (train_X.rows() == 0 || train_X.rows() != train_y.size()) {
        throw std::invalid_argument("eigf: training set must be non-empty and consistent");
    }
    Eigen::Index nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < train_X.rows(); ++i) {
        const double dist = (train_X.row(i).transpose() - x).squaredNorm();
        if (dist < best) {
            best = dist;
            nearest = i;
        }
    }
    const double gap = pred.mean - train_y(nearest);
    return gap * gap + std::max(0.0, pred.variance);
}

double smed_shift(const std::vector<double>& predictions) {
    if (predictions.empty()) throw std::invalid_argument("smed_shift: no predictions");
    const auto [lo, hi] = std::minmax_element(predictions.begin(), predictions.end());
    const double shift = std::max(0.0, -*lo) + 0.05 * (*hi - *lo);
    // Flat non-positive predictions: every charge is equal anyway, any offset works.
    if (*lo + shift <= 0.0) return shift + 1.0;
    return shift;
}

double smed_score(const Eigen::VectorXd& x0, double x0_prediction, const Eigen::MatrixXd& train_X,
                  const Eigen::VectorXd& train_predictions, double p, double shift) {
    if (!(p >= 1.0)) throw std::invalid_argument("smed_score: p must be >= 1");
    const double d = static_cast<double>(x0.size());
    const double charge_exp = -1.0 / (2.0 * d);
    const double base0 = x0_prediction + shift;
    if (!(base0 > 0.0)) throw std::invalid_argument("smed_score: shifted prediction must be positive");
    const double q0 = std::pow(base0, charge_exp);
    double total = 0.0;
    for (Eigen::Index i = 0; i < train_X.rows(); ++i) {
        const double dist = (train_X.row(i).transpose() - x0).norm();
        if (dist < 1e-12) return std::numeric_limits<double>::infinity();
        const double base_i = train_predictions(i) + shift;
        if (!(base_i > 0.0)) throw std::invalid_argument("smed_score: shifted prediction must be positive");
        total += std::pow(std::pow(base_i, charge_exp) * q0 / dist, p);
    }
    return total;
}

double smed_score(const Eigen::VectorXd& x0, const GpSurrogate& model, double p, double shift) {
    const auto train = model.predict_batch(model.X());
    Eigen::VectorXd train_means(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) train_means(static_cast<Eigen::Index>(i)) = train[i].mean;
    return smed_score(x0, model.predict(x0).mean, model.X(), train_means, p, shift);
}

double max_var(const PredictiveDistribution& pred) { return std::max(0.0, pred.variance); }

std::vector<double> equispaced_levels(const std::vector<PredictiveDistribution>& preds, int k) {
    if (preds.empty()) throw std::invalid_argument("equispaced_levels: no predictions");
    if (k < 1) throw std::invalid_argument("equispaced_levels: k must be >= 1");
    double lo = preds.front().mean;
    double hi = lo;
    for (const auto& p : preds) {
        lo = std::min(lo, p.mean);
        hi = std::max(hi, p.mean);
    }
    const double step = (hi - lo) / (k + 1);
    std::vector<double> levels;
    for (int j = 1; j <= k; ++j) {
        const double a = lo + j * step;
        if (levels.empty() || a > levels.back()) levels.push_back(a);
    }
    if (levels.empty()) levels.push_back(lo);
    return levels;
}

CandidateScores score_candidates(const GpSurrogate& model, const Eigen::MatrixXd& candidates,
                                 const AcquisitionSpec& spec) {
    spec.validate();
    if (candidates.rows() == 0) throw std::invalid_argument("score_candidates: empty candidate set");
    if (candidates.cols() != model.d()) throw std::invalid_argument("score_candidates: dimension mismatch");

    const auto preds = model.predict_batch(candidates);
    const auto m = preds.size();
    CandidateScores out;
    out.scores.resize(m);

    switch (spec.kind) {
        case Criterion::ContourEI:
            out.levels = spec.levels;
            for (std::size_t i = 0; i < m; ++i) out.scores[i] = ei_contour(preds[i], spec.levels.front(), spec.alpha);
            break;
        case Criterion::MultiContourEI:
            out.levels = spec.levels.empty() ? equispaced_levels(preds, spec.k) : spec.levels;
            std::sort(out.levels.begin(), out.levels.end());
            for (std::size_t i = 0; i < m; ++i) out.scores[i] = ei_multi_contour(preds[i], out.levels, spec.alpha);
            break;
        case Criterion::SeqContourVar: {
            const auto adaptive = select_adaptive_level(preds);
            out.levels = {adaptive.level};
            for (std::size_t i = 0; i < m; ++i) out.scores[i] = ei_contour(preds[i], adaptive.level, spec.alpha);
            break;
        }
        case Criterion::EIGF:
            for (std::size_t i = 0; i < m; ++i) {
                out.scores[i] = eigf(preds[i], candidates.row(static_cast<Eigen::Index>(i)).transpose(), model.X(),
                                     model.y());
            }
            break;
        case Criterion::SMED: {
            out.minimize = true;
            const auto train = model.predict_batch(model.X());
            std::vector<double> means;
            means.reserve(m + train.size());
            Eigen::VectorXd train_means(static_cast<Eigen::Index>(train.size()));
            for (std::size_t i = 0; i < train.size(); ++i) {
                train_means(static_cast<Eigen::Index>(i)) = train[i].mean;
                means.push_back(train[i].mean);
            }
            for (const auto& p : preds) means.push_back(p.mean);
            const double shift = smed_shift(means);
            const double p = spec.p > 0.0 ? spec.p : 2.0 * model.d();
            out.smed_shift = shift;
            out.smed_p = p;
            for (std::size_t i = 0; i < m; ++i) {
                out.scores[i] = smed_score(candidates.row(static_cast<Eigen::Index>(i)).transpose(), preds[i].mean,
                                           model.X(), train_means, p, shift);
            }
            break;
        }
        case Criterion::MaxVar:
            for (std::size_t i = 0; i < m; ++i) out.scores[i] = max_var(preds[i]);
            break;
    }

    out.best_index = 0;
    for (std::size_t i = 1; i < m; ++i) {
        if (better(out.scores[i], out.scores[out.best_index], out.minimize)) out.best_index = i;
    }
    out.best_value = out.scores[out.best_index];
    return out;
}

}  // namespace seqdex
