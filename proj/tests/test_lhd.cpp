#include "doctest.h"

#include <algorithm>
#include <vector>

#include "seqdex/lhd.hpp"

using namespace seqdex;

namespace {

bool column_is_permutation(const Eigen::MatrixXd& X, int j) {
    const auto n = X.rows();
    std::vector<int> bins;
    for (Eigen::Index i = 0; i < n; ++i) {
        bins.push_back(std::min(static_cast<int>(n) - 1, static_cast<int>(static_cast<double>(n) * X(i, j))));
    }
    std::sort(bins.begin(), bins.end());
    for (int i = 0; i < n; ++i) {
        if (bins[static_cast<std::size_t>(i)] != i) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("random_lhd: single run") {
    const auto D = random_lhd(1, 3, 99);
    REQUIRE(D.n() == 1);
    REQUIRE(D.d() == 3);
    for (int j = 0; j < 3; ++j) {
        CHECK(D.points()(0, j) > 0.0);
        CHECK(D.points()(0, j) < 1.0);
    }
}

TEST_CASE("random_lhd: strata are permutations") {
    const auto D = random_lhd(4, 2, 7);
    CHECK(column_is_permutation(D.points(), 0));
    CHECK(column_is_permutation(D.points(), 1));
    CHECK(is_latin_hypercube(D.points()));
}

TEST_CASE("random_lhd: column means near one half") {
    const auto D = random_lhd(2000, 2, 12345);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(D.points().col(j).mean() - 0.5) < 0.02);
}

TEST_CASE("random_lhd: deterministic in the seed and rejects empty shapes") {
    CHECK(random_lhd(9, 3, 5).points() == random_lhd(9, 3, 5).points());
    CHECK(random_lhd(9, 3, 5).points() != random_lhd(9, 3, 6).points());
    CHECK_THROWS_AS(random_lhd(0, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(random_lhd(3, 0, 1), std::invalid_argument);
}

TEST_CASE("maximin_lhd: two points sit in opposite strata") {
    const auto D = maximin_lhd(2, 1, 3);
    CHECK(is_latin_hypercube(D.points()));
    // Midpoints 0.25 and 0.75.
    CHECK(min_pairwise_distance(D.points()) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(maximin_lhd(1, 2, 3), std::invalid_argument);
}

TEST_CASE("maximin_lhd: beats the median random design") {
    std::vector<double> random_minima;
    for (std::uint64_t s = 0; s < 100; ++s) random_minima.push_back(min_pairwise_distance(random_lhd(10, 2, 1000 + s).points()));
    std::nth_element(random_minima.begin(), random_minima.begin() + 50, random_minima.end());
    const double median_hi = random_minima[50];
    std::nth_element(random_minima.begin(), random_minima.begin() + 49, random_minima.end());
    const double median = 0.5 * (random_minima[49] + median_hi);
    const auto D = maximin_lhd(10, 2, 2024);
    CHECK(min_pairwise_distance(D.points()) > median);
    CHECK(is_latin_hypercube(D.points()));
}

TEST_CASE("maximin_lhd: reported distances") {
    const auto res = maximin_lhd_search(12, 3, 8);
    CHECK(res.min_distance >= res.start_min_distance);
    CHECK(res.min_distance == min_pairwise_distance(res.design.points()));
}

TEST_CASE("is_latin_hypercube rejects a doubled stratum") {
    Eigen::MatrixXd X(3, 1);
    X << 0.1, 0.2, 0.9;
    CHECK_FALSE(is_latin_hypercube(X));
}

TEST_CASE("scale_to_domain") {
    const Domain branin{{-5.0, 10.0}, {0.0, 15.0}};
    Eigen::MatrixXd mid(1, 2);
    mid << 0.5, 0.5;
    const auto m = scale_to_domain(mid, branin);
    CHECK(m(0, 0) == 2.5);
    CHECK(m(0, 1) == 7.5);

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 2);
    const auto z = scale_to_domain(zero, branin);
    CHECK(z(0, 0) == -5.0);
    CHECK(z(0, 1) == 0.0);

    const Domain box{{0.0, 1.0}, {0.0, 2.0}, {0.0, 3.0}};
    const auto one = point_to_domain(Eigen::VectorXd::Ones(3), box);
    CHECK(one(0) == 1.0);
    CHECK(one(1) == 2.0);
    CHECK(one(2) == 3.0);
}

TEST_CASE("domain validation") {
    CHECK_THROWS(validate_domain({{1.0, 1.0}}));
    CHECK_THROWS(validate_domain({{2.0, 1.0}}));
    CHECK_NOTHROW(validate_domain(unit_domain(3)));
    Eigen::MatrixXd bad(1, 1);
    bad << 1.5;
    CHECK_THROWS(DesignMatrix(bad, unit_domain(1)));
    CHECK_THROWS(DesignMatrix(Eigen::MatrixXd::Zero(2, 2), unit_domain(3)));
}

TEST_CASE("design CSV and sidecar round trip") {
    const Domain box{{-1.0, 1.0}, {0.0, 4.0}};
    const DesignMatrix D(maximin_lhd(6, 2, 4).points(), box);
    const auto csv = design_to_csv(D);
    CHECK(csv.rfind("x1,x2\n", 0) == 0);
    const auto back = design_from_csv(csv, design_sidecar_json(D, 4));
    CHECK(back.points() == D.points());
    CHECK(back.domain() == box);
}

TEST_CASE("append keeps the unit cube") {
    DesignMatrix D(Eigen::MatrixXd::Zero(1, 2), unit_domain(2));
    D.append(Eigen::VectorXd::Constant(2, 0.5));
    CHECK(D.n() == 2);
    CHECK_THROWS(D.append(Eigen::VectorXd::Constant(2, 1.5)));
    CHECK_THROWS(D.append(Eigen::VectorXd::Constant(3, 0.5)));
}
