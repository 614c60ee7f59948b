#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqdex {

/// Raised when R + nugget*I is not numerically positive definite.
class CholeskyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when no likelihood optimization start could be evaluated.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gaussian (squared-exponential) product correlation
/// prod_k exp(-theta_k (xi_k - xj_k)^2). Throws on non-positive theta.
double correlation(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj, const Eigen::VectorXd& theta);

/// n x n correlation matrix of the rows of X (no nugget).
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta);

/// Correlations between x0 and each row of X.
Eigen::VectorXd correlation_vector(const Eigen::MatrixXd& X, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& theta);

struct ProfileEstimates {
    double mu_hat = 0.0;
    double sigma2_hat = 0.0;
};

/// Closed-form generalized-least-squares mean and variance for fixed theta,
/// computed through the Cholesky factor of R + nugget*I.
ProfileEstimates profile_estimates(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& theta, double nugget);

/// Profile log-likelihood -(n/2) log sigma2_hat - (1/2) log det(R + nugget*I),
/// optionally with its gradient with respect to log10(theta).
struct LikelihoodValue {
    double value = 0.0;
    Eigen::VectorXd gradient_log10_theta;  // empty unless requested
    ProfileEstimates estimates;
    double interp_residual = 0.0;  // largest |y_i - yhat(x_i)| of the (refined) predictor
};

LikelihoodValue profile_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& theta, double nugget, bool with_gradient = false,
                                       int refinement_steps = 0);

/// Predictor weights for R w = y - mu 1 from the factor of K = R + nugget*I:
/// w_0 = K^{-1} resid, w_{m+1} = w_0 + nugget * K^{-1} w_m. Each step moves the
/// weights toward the nugget-free solution, restoring interpolation.
Eigen::VectorXd refined_weights(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::VectorXd& base, double nugget,
                                int steps);

struct FitConfig {
    double nugget = 1e-8;
    double max_nugget = 1e-4;
    double log10_theta_lower = -2.0;
    double log10_theta_upper = 3.0;
    int n_starts = 0;            // 0 means 2d + 4
    int max_iterations = 200;    // per start
    // Largest training misfit allowed during the search, relative to range(y).
    // theta values whose nugget-perturbed predictor misses the data by more
    // are treated as infeasible.
    double interp_tolerance = 1e-7;
    // Iterative refinement steps applied to the predictor weights.
    int refinement_steps = 50;
    std::uint64_t seed = 0;
};

struct PredictiveDistribution {
    double mean = 0.0;
    double variance = 0.0;

    double sd() const;
};

/// Fitted constant-mean Gaussian-process surrogate. Immutable once built.
/// Inputs are unit-hypercube coordinates.
class GpSurrogate {
public:
    /// Maximum-likelihood fit: multi-start BFGS over log10(theta) in the
    /// configured box, starts drawn from a Latin hypercube. The nugget is
    /// raised tenfold (up to config.max_nugget) while every start fails to
    /// factorize.
    static GpSurrogate fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitConfig& config = {});

    /// Rebuilds a surrogate from known parameters (used when reloading).
    static GpSurrogate from_parameters(Eigen::MatrixXd X, Eigen::VectorXd y, Eigen::VectorXd theta, double nugget,
                                       int refinement_steps = 0);

    PredictiveDistribution predict(const Eigen::VectorXd& x0) const;
    std::vector<PredictiveDistribution> predict_batch(const Eigen::MatrixXd& X0) const;

    const Eigen::MatrixXd& X() const { return X_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXd& theta() const { return theta_; }
    double mu_hat() const { return mu_hat_; }
    double sigma2_hat() const { return sigma2_hat_; }
    double nugget() const { return nugget_; }
    int refinement_steps() const { return refinement_steps_; }
    double log_likelihood() const { return log_likelihood_; }
    int n() const { return static_cast<int>(X_.rows()); }
    int d() const { return static_cast<int>(X_.cols()); }
    /// True when the response was constant and theta was left at its default.
    bool degenerate() const { return degenerate_; }
    /// Log-likelihood at each multi-start initial point (empty for reloaded or degenerate fits).
    const std::vector<double>& start_log_likelihoods() const { return start_log_likelihoods_; }

    /// Leave-one-out residuals y_i - yhat_{-i}(x_i) from the closed-form
    /// identity residual_i = [R^-1 (y - mu)]_i / [R^-1]_ii with theta, mu held fixed.
    Eigen::VectorXd loo_residuals() const;

    /// {theta[], mu_hat, sigma2_hat, nugget, refinement_steps, X (row-major), y, n, d}.
    std::string to_json() const;
    static GpSurrogate from_json(const std::string& text);

private:
    void factorize();

    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    Eigen::VectorXd theta_;
    double nugget_ = 1e-8;
    int refinement_steps_ = 0;
    double mu_hat_ = 0.0;
    double sigma2_hat_ = 0.0;
    double log_likelihood_ = 0.0;
    bool degenerate_ = false;
    std::vector<double> start_log_likelihoods_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd weights_;  // refined_weights of y - mu_hat 1
};

/// Throws std::invalid_argument if two rows of X are within `tol` (Euclidean).
void check_distinct_rows(const Eigen::MatrixXd& X, double tol = 1e-10);

}  // namespace seqdex
