#include "seqdex/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"

#include "seqdex/lhd.hpp"

namespace seqdex {

namespace {

void check_theta(const Eigen::VectorXd& theta) {
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        if (!(theta(k) > 0.0) || !std::isfinite(theta(k))) {
            throw std::invalid_argument("correlation parameters must be positive and finite");
        }
    }
}

double weighted_sq_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                            const Eigen::Ref<const Eigen::RowVectorXd>& b, const Eigen::VectorXd& theta) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double diff = a(k) - b(k);
        s += theta(k) * diff * diff;
    }
    return s;
}

Eigen::LLT<Eigen::MatrixXd> factor_correlation(Eigen::MatrixXd K, double nugget) {
    K.diagonal().array() += nugget;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        throw CholeskyError("correlation matrix is not positive definite at nugget " + std::to_string(nugget));
    }
    const auto diag = llt.matrixLLT().diagonal();
    if (!diag.allFinite() || (diag.array() <= 0.0).any()) {
        throw CholeskyError("correlation matrix is numerically singular at nugget " + std::to_string(nugget));
    }
    return llt;
}

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta, double nugget) {
    return factor_correlation(correlation_matrix(X, theta), nugget);
}

bool is_constant(const Eigen::VectorXd& y) { return y.size() > 0 && y.maxCoeff() == y.minCoeff(); }

struct GlsSolution {
    ProfileEstimates estimates;
    Eigen::VectorXd weights;  // K^{-1}(y - mu 1)
};

GlsSolution solve_gls(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y) {
    const auto n = y.size();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd k_inv_one = llt.solve(ones);
    const Eigen::VectorXd k_inv_y = llt.solve(y);
    GlsSolution out;
    out.estimates.mu_hat = ones.dot(k_inv_y) / ones.dot(k_inv_one);
    out.weights = k_inv_y - out.estimates.mu_hat * k_inv_one;
    const Eigen::VectorXd resid = y - out.estimates.mu_hat * ones;
    out.estimates.sigma2_hat = std::max(0.0, resid.dot(out.weights) / static_cast<double>(n));
    return out;
}

// Bound-constrained log10(theta) reached through a logistic map, so the
// quasi-Newton iteration below runs unconstrained.
struct BoxMap {
    double lower;
    double upper;

    double to_box(double z) const { return lower + (upper - lower) / (1.0 + std::exp(-z)); }
    double from_box(double beta) const {
        const double u = std::clamp((beta - lower) / (upper - lower), 1e-12, 1.0 - 1e-12);
        return std::log(u / (1.0 - u));
    }
    double derivative(double z) const {
        const double s = 1.0 / (1.0 + std::exp(-z));
        return (upper - lower) * s * (1.0 - s);
    }
};

struct Objective {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    double nugget;
    BoxMap box;
    double max_residual;
    int refinement_steps;

    Eigen::VectorXd theta_of(const Eigen::VectorXd& z) const {
        Eigen::VectorXd theta(z.size());
        for (Eigen::Index k = 0; k < z.size(); ++k) theta(k) = std::pow(10.0, box.to_box(z(k)));
        return theta;
    }

    // Negative profile log-likelihood in z; +inf where R + nugget*I fails to
    // factor or the nugget keeps the predictor from reproducing the data.
    double operator()(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const {
        try {
            const auto lv = profile_log_likelihood(X, y, theta_of(z), nugget, grad != nullptr, refinement_steps);
            if (!std::isfinite(lv.value) || lv.interp_residual > max_residual) {
                return std::numeric_limits<double>::infinity();
            }
            if (grad) {
                grad->resize(z.size());
                for (Eigen::Index k = 0; k < z.size(); ++k) {
                    (*grad)(k) = -lv.gradient_log10_theta(k) * box.derivative(z(k));
                }
            }
            return -lv.value;
        } catch (const CholeskyError&) {
            return std::numeric_limits<double>::infinity();
        }
    }
};

// BFGS with Armijo backtracking. Only ever moves to points that lower f.
double minimize_bfgs(const Objective& f, Eigen::VectorXd& z, int max_iterations) {
    const auto d = z.size();
    Eigen::VectorXd g;
    double fz = f(z, &g);
    if (!std::isfinite(fz)) return fz;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);

    for (int iter = 0; iter < max_iterations; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() < 1e-7) break;
        Eigen::VectorXd dir = -H * g;
        double slope = g.dot(dir);
        if (slope >= 0.0) {
            H.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        // Keep steps in z moderate; the logistic map saturates beyond |z| ~ 30.
        const double max_step = 5.0;
        double step = std::min(1.0, max_step / std::max(dir.lpNorm<Eigen::Infinity>(), 1e-300));

        Eigen::VectorXd z_new;
        Eigen::VectorXd g_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            z_new = z + step * dir;
            f_new = f(z_new, &g_new);
            if (std::isfinite(f_new) && f_new <= fz + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd s = z_new - z;
        const Eigen::VectorXd yk = g_new - g;
        const double sy = s.dot(yk);
        const double improvement = fz - f_new;
        z = z_new;
        g = g_new;
        fz = f_new;
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
            H = (I - rho * s * yk.transpose()) * H * (I - rho * yk * s.transpose()) + rho * s * s.transpose();
        }
        if (improvement <= 1e-12 * (1.0 + std::abs(fz))) break;
    }
    return fz;
}

}  // namespace

double correlation(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj, const Eigen::VectorXd& theta) {
    if (xi.size() != xj.size() || xi.size() != theta.size()) {
        throw std::invalid_argument("correlation: dimension mismatch");
    }
    check_theta(theta);
    return std::exp(-weighted_sq_distance(xi.transpose(), xj.transpose(), theta));
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
    check_theta(theta);
    const auto n = X.rows();
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double diff = X(i, k) - X(j, k);
                R(i, j) += theta(k) * diff * diff;
            }
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        R(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) R(j, i) = R(i, j) = std::exp(-R(i, j));
    }
    return R;
}

Eigen::VectorXd correlation_vector(const Eigen::MatrixXd& X, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& theta) {
    const Eigen::RowVectorXd row = x0.transpose();
    Eigen::VectorXd r(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) r(i) = std::exp(-weighted_sq_distance(X.row(i), row, theta));
    return r;
}

ProfileEstimates profile_estimates(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& theta, double nugget) {
    if (X.rows() != y.size() || X.rows() == 0) throw std::invalid_argument("profile_estimates: bad sizes");
    return solve_gls(factor(X, theta, nugget), y).estimates;
}

Eigen::VectorXd refined_weights(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::VectorXd& base, double nugget,
                                int steps) {
    Eigen::VectorXd w = base;
    for (int m = 0; m < steps; ++m) w = base + nugget * chol.solve(w);
    return w;
}

LikelihoodValue profile_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& theta, double nugget, bool with_gradient,
                                       int refinement_steps) {
    const Eigen::MatrixXd R = correlation_matrix(X, theta);
    const auto llt = factor_correlation(R, nugget);
    const auto gls = solve_gls(llt, y);
    const double n = static_cast<double>(y.size());
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    LikelihoodValue out;
    out.estimates = gls.estimates;
    out.value = gls.estimates.sigma2_hat > 0.0
                    ? -0.5 * n * std::log(gls.estimates.sigma2_hat) - 0.5 * log_det
                    : std::numeric_limits<double>::quiet_NaN();
    // (R + nugget I) w = y - mu 1, so the misfit at the training points is nugget * w.
    out.interp_residual = nugget * gls.weights.lpNorm<Eigen::Infinity>();
    if (!with_gradient && refinement_steps == 0) return out;

    const auto m = X.rows();
    const Eigen::MatrixXd K_inv = llt.solve(Eigen::MatrixXd::Identity(m, m));
    if (refinement_steps > 0) {
        // Same iteration as refined_weights, with the explicit inverse at hand.
        Eigen::VectorXd w = gls.weights;
        for (int step = 0; step < refinement_steps; ++step) w = gls.weights + nugget * (K_inv * w);
        out.interp_residual = ((y.array() - gls.estimates.mu_hat).matrix() - R * w).lpNorm<Eigen::Infinity>();
    }
    if (!with_gradient) return out;

    // dL/dtheta_k = 1/2 tr(W dR/dtheta_k), W = a a^T / sigma2 - K^{-1}, a = K^{-1}(y - mu 1),
    // dR_ij/dtheta_k = -(x_ik - x_jk)^2 R_ij. mu and sigma2 drop out at their profile optimum.
    Eigen::MatrixXd W = gls.weights * gls.weights.transpose() / gls.estimates.sigma2_hat - K_inv;
    W.array() *= R.array();

    out.gradient_log10_theta = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = j + 1; i < m; ++i) {
                const double diff = X(i, k) - X(j, k);
                acc += W(i, j) * diff * diff;
            }
        }
        // Off-diagonal pairs count twice; the 1/2 cancels that, the sign comes from dR.
        out.gradient_log10_theta(k) = -acc * theta(k) * std::numbers::ln10;
    }
    return out;
}

double PredictiveDistribution::sd() const { return std::sqrt(std::max(variance, 0.0)); }

void check_distinct_rows(const Eigen::MatrixXd& X, double tol) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
            if ((X.row(i) - X.row(j)).norm() < tol) {
                throw std::invalid_argument("duplicate design points at rows " + std::to_string(i + 1) + " and " +
                                            std::to_string(j + 1));
            }
        }
    }
}

void GpSurrogate::factorize() {
    chol_ = factor(X_, theta_, nugget_);
    if (is_constant(y_)) {
        degenerate_ = true;
        mu_hat_ = y_(0);
        sigma2_hat_ = 0.0;
        weights_ = Eigen::VectorXd::Zero(y_.size());
        log_likelihood_ = std::numeric_limits<double>::infinity();
        return;
    }
    auto gls = solve_gls(chol_, y_);
    mu_hat_ = gls.estimates.mu_hat;
    sigma2_hat_ = gls.estimates.sigma2_hat;
    weights_ = refined_weights(chol_, gls.weights, nugget_, refinement_steps_);
    const double log_det = 2.0 * chol_.matrixLLT().diagonal().array().log().sum();
    log_likelihood_ = sigma2_hat_ > 0.0
                          ? -0.5 * static_cast<double>(y_.size()) * std::log(sigma2_hat_) - 0.5 * log_det
                          : std::numeric_limits<double>::infinity();
}

GpSurrogate GpSurrogate::from_parameters(Eigen::MatrixXd X, Eigen::VectorXd y, Eigen::VectorXd theta,
                                         double nugget, int refinement_steps) {
    if (X.rows() != y.size() || X.rows() < 1) throw std::invalid_argument("GpSurrogate: need n >= 1 matching rows");
    if (theta.size() != X.cols()) throw std::invalid_argument("GpSurrogate: theta has wrong dimension");
    if (!(nugget >= 0.0)) throw std::invalid_argument("GpSurrogate: nugget must be non-negative");
    if (refinement_steps < 0) throw std::invalid_argument("GpSurrogate: refinement_steps must be non-negative");
    check_theta(theta);
    GpSurrogate gp;
    gp.X_ = std::move(X);
    gp.y_ = std::move(y);
    gp.theta_ = std::move(theta);
    gp.nugget_ = nugget;
    gp.refinement_steps_ = refinement_steps;
    gp.factorize();
    return gp;
}

GpSurrogate GpSurrogate::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitConfig& config) {
    const auto n = X.rows();
    const auto d = static_cast<int>(X.cols());
    if (n < 2) throw std::invalid_argument("GpSurrogate::fit: need at least 2 runs");
    if (y.size() != n) throw std::invalid_argument("GpSurrogate::fit: X and y row counts differ");
    if (d < 1) throw std::invalid_argument("GpSurrogate::fit: need d >= 1");
    if (!y.allFinite() || !X.allFinite()) throw std::invalid_argument("GpSurrogate::fit: non-finite data");
    if (!(config.log10_theta_lower < config.log10_theta_upper)) {
        throw std::invalid_argument("GpSurrogate::fit: empty log10(theta) box");
    }
    check_distinct_rows(X);

    const BoxMap box{config.log10_theta_lower, config.log10_theta_upper};

    if (is_constant(y)) {
        const double mid = std::pow(10.0, 0.5 * (box.lower + box.upper));
        for (double nugget = config.nugget; nugget <= config.max_nugget * (1 + 1e-12); nugget *= 10.0) {
            try {
                return from_parameters(X, y, Eigen::VectorXd::Constant(d, mid), nugget);
            } catch (const CholeskyError&) {
            }
        }
        throw FitError("GpSurrogate::fit: correlation matrix singular for every nugget");
    }

    const int n_starts = config.n_starts > 0 ? config.n_starts : 2 * d + 4;
    const auto starts = random_lhd(n_starts, d, config.seed).points();

    for (double nugget = config.nugget; nugget <= config.max_nugget * (1 + 1e-12); nugget *= 10.0) {
        const Objective objective{X, y, nugget, box, config.interp_tolerance * (y.maxCoeff() - y.minCoeff()),
                                  config.refinement_steps};
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_z;
        std::vector<double> start_values;
        for (int s = 0; s < n_starts; ++s) {
            Eigen::VectorXd z(d);
            for (int k = 0; k < d; ++k) z(k) = box.from_box(box.lower + starts(s, k) * (box.upper - box.lower));
            start_values.push_back(-objective(z, nullptr));
            // Larger theta means a better conditioned R: slide an infeasible
            // start toward the upper corner until it can be used.
            for (int pull = 0; pull < 12 && !std::isfinite(objective(z, nullptr)); ++pull) {
                for (int k = 0; k < d; ++k) {
                    const double beta = box.to_box(z(k));
                    z(k) = box.from_box(pull == 11 ? box.upper : 0.5 * (beta + box.upper));
                }
            }
            const double value = minimize_bfgs(objective, z, config.max_iterations);
            if (value < best) {
                best = value;
                best_z = z;
            }
        }
        if (!std::isfinite(best)) continue;

        auto gp = from_parameters(X, y, objective.theta_of(best_z), nugget, config.refinement_steps);
        gp.start_log_likelihoods_ = std::move(start_values);
        return gp;
    }
    throw FitError("GpSurrogate::fit: every likelihood start failed up to nugget " +
                   std::to_string(config.max_nugget));
}

PredictiveDistribution GpSurrogate::predict(const Eigen::VectorXd& x0) const {
    if (x0.size() != X_.cols()) throw std::invalid_argument("predict: dimension mismatch");
    const Eigen::VectorXd r = correlation_vector(X_, x0, theta_);
    PredictiveDistribution out;
    out.mean = mu_hat_ + r.dot(weights_);
    const Eigen::VectorXd v = chol_.matrixL().solve(r);
    out.variance = std::max(0.0, sigma2_hat_ * (1.0 - v.squaredNorm()));
    return out;
}

std::vector<PredictiveDistribution> GpSurrogate::predict_batch(const Eigen::MatrixXd& X0) const {
    if (X0.cols() != X_.cols()) throw std::invalid_argument("predict_batch: dimension mismatch");
    const auto m = X0.rows();
    const auto n = X_.rows();
    Eigen::MatrixXd Rt = Eigen::MatrixXd::Zero(n, m);  // column c = r(x0_c)
    for (Eigen::Index k = 0; k < X_.cols(); ++k) {
        for (Eigen::Index c = 0; c < m; ++c) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double diff = X_(i, k) - X0(c, k);
                Rt(i, c) += theta_(k) * diff * diff;
            }
        }
    }
    Rt = Rt.unaryExpr([](double v) { return std::exp(-v); });
    std::vector<PredictiveDistribution> out(static_cast<std::size_t>(m));
    for (Eigen::Index c = 0; c < m; ++c) out[static_cast<std::size_t>(c)].mean = mu_hat_ + Rt.col(c).dot(weights_);
    chol_.matrixL().solveInPlace(Rt);
    for (Eigen::Index c = 0; c < m; ++c) {
        out[static_cast<std::size_t>(c)].variance = std::max(0.0, sigma2_hat_ * (1.0 - Rt.col(c).squaredNorm()));
    }
    return out;
}

Eigen::VectorXd GpSurrogate::loo_residuals() const {
    const auto n = X_.rows();
    const Eigen::MatrixXd K_inv = chol_.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::VectorXd w = chol_.solve((y_.array() - mu_hat_).matrix());
    return w.cwiseQuotient(K_inv.diagonal());
}

std::string GpSurrogate::to_json() const {
    nlohmann::json j;
    j["n"] = n();
    j["d"] = d();
    j["theta"] = std::vector<double>(theta_.data(), theta_.data() + theta_.size());
    j["mu_hat"] = mu_hat_;
    j["sigma2_hat"] = sigma2_hat_;
    j["nugget"] = nugget_;
    j["refinement_steps"] = refinement_steps_;
    auto& rows = j["X"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < X_.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(X_.cols()));
        for (Eigen::Index k = 0; k < X_.cols(); ++k) row[static_cast<std::size_t>(k)] = X_(i, k);
        rows.push_back(row);
    }
    j["y"] = std::vector<double>(y_.data(), y_.data() + y_.size());
    return j.dump(2);
}

GpSurrogate GpSurrogate::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto theta_v = j.at("theta").get<std::vector<double>>();
    const auto y_v = j.at("y").get<std::vector<double>>();
    const auto& rows = j.at("X");
    const auto d = static_cast<Eigen::Index>(theta_v.size());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != d) throw std::invalid_argument("surrogate JSON: ragged X");
        for (Eigen::Index k = 0; k < d; ++k) X(static_cast<Eigen::Index>(i), k) = row[static_cast<std::size_t>(k)];
    }
    Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(theta_v.data(), d);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_v.data(), static_cast<Eigen::Index>(y_v.size()));
    return from_parameters(std::move(X), std::move(y), std::move(theta), j.at("nugget").get<double>(),
                           j.value("refinement_steps", 0));
}

}  // namespace seqdex
