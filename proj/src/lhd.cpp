#include "seqdex/lhd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "seqdex/csv.hpp"
#include "seqdex/rng.hpp"

namespace seqdex {

Domain unit_domain(int d) { return Domain(static_cast<std::size_t>(d), Bounds{0.0, 1.0}); }

void validate_domain(const Domain& domain) {
    for (std::size_t j = 0; j < domain.size(); ++j) {
        const auto& b = domain[j];
        if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || !(b.lower < b.upper)) {
            throw std::invalid_argument("domain dimension " + std::to_string(j + 1) +
                                        ": need finite lower < upper");
        }
    }
}

DesignMatrix::DesignMatrix(Eigen::MatrixXd points, Domain domain)
    : points_(std::move(points)), domain_(std::move(domain)) {
    if (static_cast<Eigen::Index>(domain_.size()) != points_.cols()) {
        throw std::invalid_argument("DesignMatrix: domain has " + std::to_string(domain_.size()) +
                                    " dimensions but points have " + std::to_string(points_.cols()));
    }
    validate_domain(domain_);
    if ((points_.array() < 0.0).any() || (points_.array() > 1.0).any() || !points_.allFinite()) {
        throw std::invalid_argument("DesignMatrix: coordinates must lie in [0,1]");
    }
}

void DesignMatrix::append(const Eigen::VectorXd& unit_point) {
    if (unit_point.size() != points_.cols()) throw std::invalid_argument("DesignMatrix::append: dimension mismatch");
    if ((unit_point.array() < 0.0).any() || (unit_point.array() > 1.0).any()) {
        throw std::invalid_argument("DesignMatrix::append: coordinates must lie in [0,1]");
    }
    points_.conservativeResize(points_.rows() + 1, Eigen::NoChange);
    points_.row(points_.rows() - 1) = unit_point.transpose();
}

namespace {

void check_sizes(int n, int d) {
    if (n < 1) throw std::invalid_argument("run size n must be >= 1");
    if (d < 1) throw std::invalid_argument("dimension d must be >= 1");
}

std::vector<int> identity_permutation(int n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    return perm;
}

// Integer stratum layout used by the maximin search. With points at stratum
// midpoints, squared distances are (sum of squared stratum offsets) / n^2,
// so comparisons are exact in integer arithmetic.
class StratumLayout {
public:
    StratumLayout(int n, int d, Rng& rng) : n_(n), d_(d), strata_(static_cast<std::size_t>(n * d)) {
        for (int j = 0; j < d; ++j) {
            auto perm = identity_permutation(n);
            rng.shuffle(std::span<int>(perm));
            for (int i = 0; i < n; ++i) at(i, j) = perm[static_cast<std::size_t>(i)];
        }
        dist2_.assign(static_cast<std::size_t>(n * n), 0);
        for (int a = 0; a < n; ++a) refresh_row(a);
    }

    int& at(int i, int j) { return strata_[static_cast<std::size_t>(i * d_ + j)]; }
    int at(int i, int j) const { return strata_[static_cast<std::size_t>(i * d_ + j)]; }

    void swap_entries(int col, int a, int b) {
        std::swap(at(a, col), at(b, col));
        refresh_row(a);
        refresh_row(b);
    }

    /// (minimum squared integer distance, number of pairs attaining it)
    std::pair<long long, int> objective() const {
        long long best = std::numeric_limits<long long>::max();
        int count = 0;
        for (int a = 0; a < n_; ++a) {
            for (int b = a + 1; b < n_; ++b) {
                const long long v = dist2(a, b);
                if (v < best) {
                    best = v;
                    count = 1;
                } else if (v == best) {
                    ++count;
                }
            }
        }
        return {best, count};
    }

    Eigen::MatrixXd midpoints() const {
        Eigen::MatrixXd pts(n_, d_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < d_; ++j) pts(i, j) = (at(i, j) + 0.5) / n_;
        }
        return pts;
    }

private:
    long long dist2(int a, int b) const { return dist2_[static_cast<std::size_t>(a * n_ + b)]; }

    void refresh_row(int a) {
        for (int b = 0; b < n_; ++b) {
            long long s = 0;
            for (int j = 0; j < d_; ++j) {
                const long long diff = at(a, j) - at(b, j);
                s += diff * diff;
            }
            dist2_[static_cast<std::size_t>(a * n_ + b)] = s;
            dist2_[static_cast<std::size_t>(b * n_ + a)] = s;
        }
    }

    int n_;
    int d_;
    std::vector<int> strata_;
    std::vector<long long> dist2_;
};

bool improves(std::pair<long long, int> candidate, std::pair<long long, int> incumbent) {
    return candidate.first > incumbent.first ||
           (candidate.first == incumbent.first && candidate.second < incumbent.second);
}

}  // namespace

DesignMatrix random_lhd(int n, int d, std::uint64_t seed) {
    check_sizes(n, d);
    Rng rng(seed);
    Eigen::MatrixXd pts(n, d);
    for (int j = 0; j < d; ++j) {
        auto perm = identity_permutation(n);
        rng.shuffle(std::span<int>(perm));
        for (int i = 0; i < n; ++i) {
            pts(i, j) = (perm[static_cast<std::size_t>(i)] + rng.uniform_open()) / n;
        }
    }
    return DesignMatrix(std::move(pts), unit_domain(d));
}

MaximinResult maximin_lhd_search(int n, int d, std::uint64_t seed, const MaximinOptions& options) {
    check_sizes(n, d);
    if (n < 2) throw std::invalid_argument("maximin_lhd: need n >= 2");
    if (options.restarts < 1 || options.swaps < 0) throw std::invalid_argument("maximin_lhd: bad effort");

    std::pair<long long, int> best_obj{-1, 0};
    Eigen::MatrixXd best_points;
    double start_distance = 0.0;

    for (int r = 0; r < options.restarts; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        StratumLayout layout(n, d, rng);
        auto obj = layout.objective();
        if (r == 0) start_distance = min_pairwise_distance(layout.midpoints());

        for (int t = 0; t < options.swaps; ++t) {
            const int col = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
            const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
            if (b >= a) ++b;
            layout.swap_entries(col, a, b);
            const auto trial = layout.objective();
            if (improves(trial, obj)) {
                obj = trial;
            } else {
                layout.swap_entries(col, a, b);
            }
        }
        if (improves(obj, best_obj)) {
            best_obj = obj;
            best_points = layout.midpoints();
        }
    }

    MaximinResult result;
    result.min_distance = min_pairwise_distance(best_points);
    result.start_min_distance = start_distance;
    result.design = DesignMatrix(std::move(best_points), unit_domain(d));
    return result;
}

DesignMatrix maximin_lhd(int n, int d, std::uint64_t seed, const MaximinOptions& options) {
    return maximin_lhd_search(n, d, seed, options).design;
}

double min_pairwise_distance(const Eigen::MatrixXd& points) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < points.rows(); ++a) {
        for (Eigen::Index b = a + 1; b < points.rows(); ++b) {
            best = std::min(best, (points.row(a) - points.row(b)).squaredNorm());
        }
    }
    return std::sqrt(best);
}

bool is_latin_hypercube(const Eigen::MatrixXd& points) {
    const auto n = points.rows();
    if (n == 0) return false;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = points(i, j);
            if (!(v >= 0.0 && v <= 1.0)) return false;
            auto s = static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * v));
            s = std::min(s, n - 1);
            if (seen[static_cast<std::size_t>(s)]) return false;
            seen[static_cast<std::size_t>(s)] = true;
        }
    }
    return true;
}

Eigen::VectorXd point_to_domain(const Eigen::VectorXd& unit_point, const Domain& domain) {
    Eigen::VectorXd out(unit_point.size());
    for (Eigen::Index j = 0; j < unit_point.size(); ++j) {
        const auto& b = domain[static_cast<std::size_t>(j)];
        out(j) = b.lower + unit_point(j) * b.width();
    }
    return out;
}

Eigen::VectorXd point_to_unit(const Eigen::VectorXd& domain_point, const Domain& domain) {
    Eigen::VectorXd out(domain_point.size());
    for (Eigen::Index j = 0; j < domain_point.size(); ++j) {
        const auto& b = domain[static_cast<std::size_t>(j)];
        out(j) = (domain_point(j) - b.lower) / b.width();
    }
    return out;
}

Eigen::MatrixXd scale_to_domain(const Eigen::MatrixXd& unit_points, const Domain& domain) {
    if (static_cast<Eigen::Index>(domain.size()) != unit_points.cols()) {
        throw std::invalid_argument("scale_to_domain: dimension mismatch");
    }
    Eigen::MatrixXd out(unit_points.rows(), unit_points.cols());
    for (Eigen::Index i = 0; i < unit_points.rows(); ++i) {
        out.row(i) = point_to_domain(unit_points.row(i).transpose(), domain).transpose();
    }
    return out;
}

Eigen::MatrixXd scale_to_domain(const DesignMatrix& design) {
    return scale_to_domain(design.points(), design.domain());
}

Eigen::MatrixXd scale_to_unit(const Eigen::MatrixXd& domain_points, const Domain& domain) {
    if (static_cast<Eigen::Index>(domain.size()) != domain_points.cols()) {
        throw std::invalid_argument("scale_to_unit: dimension mismatch");
    }
    Eigen::MatrixXd out(domain_points.rows(), domain_points.cols());
    for (Eigen::Index i = 0; i < domain_points.rows(); ++i) {
        out.row(i) = point_to_unit(domain_points.row(i).transpose(), domain).transpose();
    }
    return out;
}

std::string design_to_csv(const DesignMatrix& design) {
    std::string out;
    for (int j = 0; j < design.d(); ++j) {
        if (j) out += ',';
        out += "x" + std::to_string(j + 1);
    }
    out += '\n';
    for (int i = 0; i < design.n(); ++i) {
        for (int j = 0; j < design.d(); ++j) {
            if (j) out += ',';
            out += format_double(design.points()(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string design_sidecar_json(const DesignMatrix& design, std::uint64_t seed) {
    nlohmann::json j;
    j["d"] = design.d();
    j["n"] = design.n();
    j["seed"] = seed;
    auto& bounds = j["domain"] = nlohmann::json::array();
    for (const auto& b : design.domain()) bounds.push_back({b.lower, b.upper});
    return j.dump(2) + "\n";
}

DesignMatrix design_from_csv(const std::string& csv_text, const std::string& sidecar_json) {
    const auto table = parse_csv(csv_text);
    const auto meta = nlohmann::json::parse(sidecar_json);
    Domain domain;
    for (const auto& b : meta.at("domain")) domain.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    return DesignMatrix(table.values, std::move(domain));
}

}  // namespace seqdex
