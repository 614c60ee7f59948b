#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqdex {

struct Bounds {
    double lower = 0.0;
    double upper = 1.0;

    double width() const { return upper - lower; }
    bool operator==(const Bounds&) const = default;
};

using Domain = std::vector<Bounds>;

/// The unit hypercube [0,1]^d.
Domain unit_domain(int d);

/// Throws std::invalid_argument unless lower < upper (and both finite) in every dimension.
void validate_domain(const Domain& domain);

/// An n x d point set stored in unit-hypercube coordinates together with the
/// box it maps onto. All modelling happens in unit coordinates; the domain is
/// only consulted when talking to a simulator or a user.
class DesignMatrix {
public:
    DesignMatrix() = default;
    DesignMatrix(Eigen::MatrixXd points, Domain domain);

    const Eigen::MatrixXd& points() const { return points_; }
    const Domain& domain() const { return domain_; }
    int n() const { return static_cast<int>(points_.rows()); }
    int d() const { return static_cast<int>(points_.cols()); }

    Eigen::VectorXd row(int i) const { return points_.row(i).transpose(); }

    /// Appends a unit-coordinate point.
    void append(const Eigen::VectorXd& unit_point);

private:
    Eigen::MatrixXd points_;
    Domain domain_;
};

/// Random Latin hypercube: one point drawn uniformly inside each of the n
/// strata of every axis, strata matched across axes by independent random
/// permutations.
DesignMatrix random_lhd(int n, int d, std::uint64_t seed);

struct MaximinOptions {
    int swaps = 10000;   // swap attempts per restart
    int restarts = 5;
};

struct MaximinResult {
    DesignMatrix design;
    double min_distance = 0.0;
    /// Minimum distance of the first restart's random starting design.
    double start_min_distance = 0.0;
};

/// Maximin Latin hypercube with points at stratum midpoints. Each restart
/// starts from random permutations and hill-climbs with random within-column
/// swaps, accepting a swap when it raises the minimum pairwise distance (or
/// keeps it and reduces the number of pairs attaining it). The best restart
/// wins; ties go to the earliest.
MaximinResult maximin_lhd_search(int n, int d, std::uint64_t seed, const MaximinOptions& options = {});

DesignMatrix maximin_lhd(int n, int d, std::uint64_t seed, const MaximinOptions& options = {});

double min_pairwise_distance(const Eigen::MatrixXd& points);

/// True when every column, binned into n strata, hits each stratum exactly once.
bool is_latin_hypercube(const Eigen::MatrixXd& points);

Eigen::MatrixXd scale_to_domain(const DesignMatrix& design);
Eigen::MatrixXd scale_to_domain(const Eigen::MatrixXd& unit_points, const Domain& domain);
Eigen::VectorXd point_to_domain(const Eigen::VectorXd& unit_point, const Domain& domain);

Eigen::MatrixXd scale_to_unit(const Eigen::MatrixXd& domain_points, const Domain& domain);
Eigen::VectorXd point_to_unit(const Eigen::VectorXd& domain_point, const Domain& domain);

/// Design CSV: header `x1,...,xd`, one row per point, unit coordinates.
std::string design_to_csv(const DesignMatrix& design);
/// Sidecar JSON holding the domain bounds and the generating seed.
std::string design_sidecar_json(const DesignMatrix& design, std::uint64_t seed);
DesignMatrix design_from_csv(const std::string& csv_text, const std::string& sidecar_json);

}  // namespace seqdex
