#include "seqdex/sequential.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "seqdex/rng.hpp"

namespace seqdex {

namespace {

Eigen::MatrixXd regular_grid(int d) {
    if (d == 1) {
        constexpr int m = 1000;
        Eigen::MatrixXd g(m, 1);
        for (int i = 0; i < m; ++i) g(i, 0) = static_cast<double>(i) / (m - 1);
        return g;
    }
    constexpr int side = 100;
    Eigen::MatrixXd g(side * side, 2);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            g(i * side + j, 0) = static_cast<double>(i) / (side - 1);
            g(i * side + j, 1) = static_cast<double>(j) / (side - 1);
        }
    }
    return g;
}

Eigen::MatrixXd drop_collisions(const Eigen::MatrixXd& candidates, const Eigen::MatrixXd& existing) {
    constexpr double tol2 = 1e-20;
    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(candidates.rows()));
    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
        bool collides = false;
        for (Eigen::Index j = 0; j < existing.rows() && !collides; ++j) {
            collides = (candidates.row(i) - existing.row(j)).squaredNorm() < tol2;
        }
        if (!collides) keep.push_back(i);
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), candidates.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = candidates.row(keep[r]);
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

CandidateSet make_candidates(int d, std::uint64_t seed, const Eigen::MatrixXd& existing) {
    if (d < 1) throw std::invalid_argument("make_candidates: d must be >= 1");
    if (existing.rows() > 0 && existing.cols() != d) throw std::invalid_argument("make_candidates: dimension mismatch");
    CandidateSet set;
    set.seed = seed;
    if (d <= 2) {
        set.provenance = CandidateSet::Provenance::Grid;
        set.points = regular_grid(d);
    } else {
        set.provenance = CandidateSet::Provenance::Lhd;
        set.points = random_lhd(1000 * d, d, seed).points();
    }
    if (existing.rows() > 0) set.points = drop_collisions(set.points, existing);
    return set;
}

std::string StageRecord::to_json_line() const {
    nlohmann::json j;
    j["stage"] = stage;
    j["x_chosen"] = to_std(x_chosen);
    j["x_unit"] = to_std(x_unit);
    j["y_observed"] = y_observed;
    j["criterion"] = criterion;
    j["criterion_value"] = criterion_value;
    j["levels"] = levels;
    j["theta"] = to_std(theta);
    j["mu_hat"] = mu_hat;
    j["sigma2_hat"] = sigma2_hat;
    j["nugget"] = nugget;
    j["stage_seed"] = stage_seed;
    j["candidate_seed"] = candidate_seed;
    j["fit_seed"] = fit_seed;
    j["n_candidates"] = n_candidates;
    if (smed_shift) {
        j["smed_shift"] = *smed_shift;
        j["smed_p"] = smed_p;
    }
    j["interp_residual"] = interp_residual;
    j["interp_variance_ratio"] = interp_variance_ratio;
    return j.dump();
}

StageSeeds stage_seeds(std::uint64_t run_seed, int stage) {
    StageSeeds s;
    s.stage_seed = derive_seed(run_seed, static_cast<std::uint64_t>(stage));
    s.candidate_seed = derive_seed(s.stage_seed, 1);
    s.fit_seed = derive_seed(s.stage_seed, 2);
    return s;
}

Proposal propose_next(const DesignMatrix& design, const Eigen::VectorXd& responses, const AcquisitionSpec& spec,
                      const FitConfig& fit_config, std::uint64_t run_seed, int stage) {
    if (responses.size() != design.n()) throw std::invalid_argument("propose_next: responses do not match design");
    const auto seeds = stage_seeds(run_seed, stage);
    FitConfig cfg = fit_config;
    cfg.seed = seeds.fit_seed;
    auto model = GpSurrogate::fit(design.points(), responses, cfg);
    auto candidates = make_candidates(design.d(), seeds.candidate_seed, design.points());
    if (candidates.points.rows() == 0) throw std::runtime_error("propose_next: every candidate collides with the design");
    auto scores = score_candidates(model, candidates.points, spec);
    Eigen::VectorXd x = candidates.points.row(static_cast<Eigen::Index>(scores.best_index)).transpose();
    return Proposal{std::move(x), std::move(model), std::move(candidates), std::move(scores), seeds};
}

InterpolationCheck interpolation_check(const GpSurrogate& model) {
    const auto preds = model.predict_batch(model.X());
    const auto& y = model.y();
    const double range = y.maxCoeff() - y.minCoeff();
    InterpolationCheck out;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double r = std::abs(preds[i].mean - y(static_cast<Eigen::Index>(i)));
        out.residual = std::max(out.residual, range > 0.0 ? r / range : r);
        if (model.sigma2_hat() > 0.0) {
            out.variance_ratio = std::max(out.variance_ratio, preds[i].variance / model.sigma2_hat());
        }
    }
    return out;
}

SequentialState initial_state(DesignMatrix design, Eigen::VectorXd responses, int budget, std::uint64_t seed) {
    if (design.n() < 2) throw std::invalid_argument("sequential design needs n0 >= 2");
    if (responses.size() != design.n()) throw std::invalid_argument("responses do not match the initial design");
    if (!responses.allFinite()) throw std::invalid_argument("initial responses must be finite");
    if (budget < design.n()) throw std::invalid_argument("budget is smaller than the initial design");
    SequentialState state;
    state.n0 = design.n();
    state.design = std::move(design);
    state.responses = std::move(responses);
    state.budget = budget;
    state.seed = seed;
    return state;
}

SequentialState step(SequentialState state, const Oracle& oracle, const AcquisitionSpec& spec,
                     const FitConfig& fit_config) {
    if (state.stage >= state.budget - state.n0) throw std::logic_error("step: run size budget exhausted");

    auto proposal = propose_next(state.design, state.responses, spec, fit_config, state.seed, state.stage);
    const Eigen::VectorXd x_domain = point_to_domain(proposal.x_unit, state.design.domain());
    const double y = oracle(x_domain);

    StageRecord rec;
    rec.stage = state.stage + 1;
    rec.x_unit = proposal.x_unit;
    rec.x_chosen = x_domain;
    rec.y_observed = y;
    rec.criterion = std::string(criterion_name(spec.kind));
    rec.criterion_value = proposal.scores.best_value;
    rec.levels = proposal.scores.levels;
    rec.theta = proposal.model.theta();
    rec.mu_hat = proposal.model.mu_hat();
    rec.sigma2_hat = proposal.model.sigma2_hat();
    rec.nugget = proposal.model.nugget();
    rec.stage_seed = proposal.seeds.stage_seed;
    rec.candidate_seed = proposal.seeds.candidate_seed;
    rec.fit_seed = proposal.seeds.fit_seed;
    rec.n_candidates = static_cast<std::size_t>(proposal.candidates.points.rows());
    rec.smed_shift = proposal.scores.smed_shift;
    rec.smed_p = proposal.scores.smed_p;
    const auto interp = interpolation_check(proposal.model);
    rec.interp_residual = interp.residual;
    rec.interp_variance_ratio = interp.variance_ratio;

    if (!std::isfinite(y)) {
        throw OracleError("simulator returned a non-finite response at stage " + std::to_string(rec.stage) + ": " +
                          rec.to_json_line());
    }

    state.design.append(proposal.x_unit);
    state.responses.conservativeResize(state.responses.size() + 1);
    state.responses(state.responses.size() - 1) = y;
    ++state.stage;
    state.history.push_back(std::move(rec));
    return state;
}

SequentialState run(DesignMatrix initial, Eigen::VectorXd responses, const Oracle& oracle,
                    const AcquisitionSpec& spec, int budget, const FitConfig& fit_config, std::uint64_t seed,
                    const StageObserver& observer) {
    spec.validate();
    auto state = initial_state(std::move(initial), std::move(responses), budget, seed);
    while (state.n() < state.budget) {
        state = step(std::move(state), oracle, spec, fit_config);
        if (observer) observer(state, state.history.back());
    }
    return state;
}

}  // namespace seqdex
