#include "seqdex/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "seqdex/csv.hpp"
#include "seqdex/rng.hpp"
#include "seqdex/sequential.hpp"

namespace seqdex {

namespace {

using std::numbers::pi;

double gramacy_lee(const Eigen::VectorXd& x) {
    const double v = x(0);
    return std::sin(10.0 * pi * v) / (2.0 * v) + std::pow(v - 1.0, 4);
}

double two_dim(const Eigen::VectorXd& x) {
    return (1.0 + (4.0 * x(0) + 4.0 * x(1) + 1.0)) * (3.0 + 192.0 * x(0) * x(1));
}

double branin(const Eigen::VectorXd& x) {
    const double x1 = x(0);
    const double x2 = x(1);
    const double t = x2 - 5.1 / (4.0 * pi * pi) * x1 * x1 + 5.0 / pi * x1 - 6.0;
    return t * t + 10.0 * (1.0 - 1.0 / (8.0 * pi)) * std::cos(x1) + 10.0;
}

double product3(const Eigen::VectorXd& x) { return x(0) * x(1) * x(2); }

double poly4(const Eigen::VectorXd& x) { return x(0) * x(1) + x(2) * x(2) * x(3) * x(3); }

const std::vector<TestFunction>& registry() {
    static const std::vector<TestFunction> functions = {
        {"gramacy_lee", 1, {{0.5, 2.5}}, gramacy_lee},
        {"two_dim", 2, {{0.0, 1.0}, {0.0, 1.0}}, two_dim},
        {"branin", 2, {{-5.0, 10.0}, {0.0, 15.0}}, branin},
        {"product3", 3, {{0.0, 1.0}, {0.0, 2.0}, {0.0, 3.0}}, product3},
        {"poly4", 4, {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}}, poly4},
    };
    return functions;
}

const std::vector<ExampleSetup>& examples() {
    static const std::vector<ExampleSetup> list = {
        {"ex1", "gramacy_lee", 5, 20, 20, {}, std::nullopt},
        {"ex2", "two_dim", 10, 40, 10, {150.0, 300.0, 600.0}, 300.0},
        {"ex3", "branin", 10, 30, 10, {}, std::nullopt},
        {"ex4", "product3", 20, 60, 10, {}, std::nullopt},
        {"ex5", "poly4", 27, 80, 10, {}, std::nullopt},
    };
    return list;
}

void check_metric_inputs(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("metric: prediction and truth lengths differ");
    if (pred.size() == 0) throw std::invalid_argument("metric: empty hold-out set");
}

double quantile7(const std::vector<double>& sorted, double prob) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Eigen::VectorXd evaluate_rows(const TestFunction& f, const Eigen::MatrixXd& unit_points) {
    Eigen::VectorXd y(unit_points.rows());
    for (Eigen::Index i = 0; i < unit_points.rows(); ++i) {
        y(i) = f.eval(point_to_domain(unit_points.row(i).transpose(), f.domain));
    }
    return y;
}

struct HoldOut {
    Eigen::MatrixXd points;  // unit coordinates
    Eigen::VectorXd truth;
};

std::pair<double, double> holdout_metrics(const GpSurrogate& model, const HoldOut& holdout) {
    const auto preds = model.predict_batch(holdout.points);
    Eigen::VectorXd mean(static_cast<Eigen::Index>(preds.size()));
    for (std::size_t i = 0; i < preds.size(); ++i) mean(static_cast<Eigen::Index>(i)) = preds[i].mean;
    return {rmspe(mean, holdout.truth), max_error(mean, holdout.truth)};
}


std::string final_line(const ExperimentRecord& rec) {
    nlohmann::json j;
    j["final"] = true;
    j["method"] = rec.method;
    j["replication"] = rec.replication;
    j["seed"] = rec.seed;
    j["failed"] = rec.failed;
    if (rec.failed) {
        j["error"] = rec.error;
    } else {
        j["rmspe"] = rec.rmspe;
        j["max_error"] = rec.max_error;
        if (rec.rmspe_initial) j["rmspe_initial"] = *rec.rmspe_initial;
        if (rec.max_error_initial) j["max_error_initial"] = *rec.max_error_initial;
        j["interp_residual"] = rec.interp_residual;
        j["interp_variance_ratio"] = rec.interp_variance_ratio;
    }
    return j.dump();
}

// Reads a completed trajectory file back into a record; nullopt if the file
// is missing, truncated, or holds a failed run.
std::optional<ExperimentRecord> load_completed(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::vector<nlohmann::json> lines;
    std::string line;
    try {
        while (std::getline(in, line)) {
            if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
        }
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (lines.empty()) return std::nullopt;
    const auto& last = lines.back();
    if (!last.value("final", false) || last.value("failed", true)) return std::nullopt;

    ExperimentRecord rec;
    rec.method = last.at("method").get<std::string>();
    rec.replication = last.at("replication").get<int>();
    rec.seed = last.at("seed").get<std::uint64_t>();
    rec.rmspe = last.at("rmspe").get<double>();
    rec.max_error = last.at("max_error").get<double>();
    if (last.contains("rmspe_initial")) rec.rmspe_initial = last.at("rmspe_initial").get<double>();
    if (last.contains("max_error_initial")) rec.max_error_initial = last.at("max_error_initial").get<double>();
    rec.interp_residual = last.at("interp_residual").get<double>();
    rec.interp_variance_ratio = last.at("interp_variance_ratio").get<double>();
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        const auto x = lines[i].at("x_chosen").get<std::vector<double>>();
        rec.added_points.push_back(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    }
    rec.trajectory_path = path;
    return rec;
}

class TrajectoryWriter {
public:
    explicit TrajectoryWriter(std::string path) : path_(std::move(path)) {
        if (path_.empty()) return;
        std::filesystem::create_directories(std::filesystem::path(path_).parent_path());
        out_.open(path_, std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open trajectory file '" + path_ + "'");
    }

    void write(const std::string& line) {
        if (!out_.is_open()) return;
        out_ << line << '\n';
        out_.flush();
    }

private:
    std::string path_;
    std::ofstream out_;
};

struct ResolvedSetup {
    ExampleSetup example;
    const TestFunction* function = nullptr;
    std::vector<std::string> methods;
    std::string example_dir;  // empty when not writing
};

ResolvedSetup resolve(const BenchConfig& config) {
    ResolvedSetup r;
    r.example = get_example(config.example);
    if (config.n0 > 0) r.example.n0 = config.n0;
    if (config.budget > 0) r.example.budget = config.budget;
    if (r.example.n0 < 2) throw std::invalid_argument("bench: n0 must be >= 2");
    if (r.example.budget < r.example.n0) throw std::invalid_argument("bench: budget must be >= n0");
    if (config.reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
    if (config.workers < 1) throw std::invalid_argument("bench: workers must be >= 1");
    r.function = &get_test_function(r.example.function);
    r.methods = config.methods.empty() ? all_methods() : config.methods;
    for (const auto& m : r.methods) {
        if (m != kOneShotMethod) parse_criterion(m);
    }
    if (!config.out_dir.empty()) r.example_dir = (std::filesystem::path(config.out_dir) / r.example.name).string();
    return r;
}

std::vector<ExperimentRecord> run_replication(const BenchConfig& config, const ResolvedSetup& setup, int rep) {
    const auto& f = *setup.function;
    const int d = f.d;
    const auto rep_seed = replication_seed(config.base_seed, rep);
    const auto init_seed = derive_seed(rep_seed, 1);
    const auto holdout_seed = derive_seed(rep_seed, 2);
    const auto run_seed = derive_seed(rep_seed, 3);
    const auto oneshot_seed = derive_seed(rep_seed, 4);

    HoldOut holdout;
    holdout.points = random_lhd(1000 * d, d, holdout_seed).points();
    holdout.truth = evaluate_rows(f, holdout.points);

    const Oracle oracle = [&f](const Eigen::VectorXd& x) { return f.eval(x); };

    std::vector<ExperimentRecord> out;
    std::optional<DesignMatrix> initial;
    Eigen::VectorXd initial_y;
    std::optional<std::pair<double, double>> initial_metrics;

    for (const auto& method : setup.methods) {
        const std::string path = setup.example_dir.empty()
                                     ? std::string()
                                     : (std::filesystem::path(setup.example_dir) / method /
                                        ("rep" + std::to_string(rep) + ".jsonl"))
                                           .string();
        if (config.resume && !path.empty()) {
            if (auto done = load_completed(path)) {
                out.push_back(std::move(*done));
                continue;
            }
        }

        ExperimentRecord rec;
        rec.method = method;
        rec.replication = rep;
        rec.seed = rep_seed;
        rec.trajectory_path = path;
        TrajectoryWriter writer(path);
        try {
            if (method == kOneShotMethod) {
                const auto design = maximin_lhd(setup.example.budget, d, oneshot_seed, config.maximin);
                const auto y = evaluate_rows(f, design.points());
                FitConfig fc = config.fit;
                fc.seed = derive_seed(oneshot_seed, 2);
                const auto model = GpSurrogate::fit(design.points(), y, fc);
                std::tie(rec.rmspe, rec.max_error) = holdout_metrics(model, holdout);
                const auto interp = interpolation_check(model);
                rec.interp_residual = interp.residual;
                rec.interp_variance_ratio = interp.variance_ratio;
            } else {
                if (!initial) {
                    initial.emplace(maximin_lhd(setup.example.n0, d, init_seed, config.maximin).points(), f.domain);
                    initial_y = evaluate_rows(f, initial->points());
                }
                const auto spec = method_spec(method, setup.example, config, initial_y);
                const auto n0 = setup.example.n0;
                if (!initial_metrics) {
                    FitConfig fc = config.fit;
                    fc.seed = stage_seeds(run_seed, 0).fit_seed;
                    initial_metrics = holdout_metrics(GpSurrogate::fit(initial->points(), initial_y, fc), holdout);
                }
                rec.rmspe_initial = initial_metrics->first;
                rec.max_error_initial = initial_metrics->second;

                const StageObserver observer = [&](const SequentialState&, const StageRecord& stage) {
                    writer.write(stage.to_json_line());
                };
                const auto state = run(*initial, initial_y, oracle, spec, setup.example.budget, config.fit, run_seed,
                                       observer);
                for (const auto& h : state.history) {
                    rec.added_points.push_back(h.x_chosen);
                    rec.interp_residual = std::max(rec.interp_residual, h.interp_residual);
                    rec.interp_variance_ratio = std::max(rec.interp_variance_ratio, h.interp_variance_ratio);
                }
                FitConfig fc = config.fit;
                fc.seed = stage_seeds(run_seed, setup.example.budget - n0).fit_seed;
                const auto model = GpSurrogate::fit(state.design.points(), state.responses, fc);
                std::tie(rec.rmspe, rec.max_error) = holdout_metrics(model, holdout);
                const auto interp = interpolation_check(model);
                rec.interp_residual = std::max(rec.interp_residual, interp.residual);
                rec.interp_variance_ratio = std::max(rec.interp_variance_ratio, interp.variance_ratio);
            }
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        writer.write(final_line(rec));
        out.push_back(std::move(rec));
    }
    return out;
}

std::string meta_json(const BenchConfig& config, const ResolvedSetup& setup) {
    nlohmann::json j;
    j["example"] = setup.example.name;
    j["function"] = setup.function->name;
    j["d"] = setup.function->d;
    auto& dom = j["domain"] = nlohmann::json::array();
    for (const auto& b : setup.function->domain) dom.push_back({b.lower, b.upper});
    j["n0"] = setup.example.n0;
    j["budget"] = setup.example.budget;
    j["reps"] = config.reps;
    j["base_seed"] = config.base_seed;
    j["seed_rule"] =
        "rep_seed = derive_seed(base_seed, rep); streams of rep_seed: 1 initial maximin LHD, 2 hold-out LHD, "
        "3 sequential run (stage s uses derive_seed(run, s), candidates +1, fit +2), 4 one-shot maximin LHD";
    j["methods"] = setup.methods;
    j["alpha"] = config.alpha;
    j["mc_k"] = config.k.value_or(setup.example.mc_k);
    j["mc_levels"] = config.levels.empty() ? setup.example.mc_levels : config.levels;
    j["smed_p"] = config.p > 0.0 ? config.p : 2.0 * setup.function->d;
    j["smed_shift_rule"] = "shift = max(0, -min yhat) + 0.05 * (max yhat - min yhat) over candidates and design";
    j["holdout"] = "random LHD of 1000*d points, shared by all methods within a replication";
    j["fit"] = {{"nugget", config.fit.nugget},
                {"max_nugget", config.fit.max_nugget},
                {"log10_theta_box", {config.fit.log10_theta_lower, config.fit.log10_theta_upper}},
                {"n_starts", config.fit.n_starts > 0 ? config.fit.n_starts : 2 * setup.function->d + 4},
                {"max_iterations", config.fit.max_iterations}};
    j["maximin"] = {{"search", "random within-column swap hill climb, stratum midpoints"},
                    {"swaps", config.maximin.swaps},
                    {"restarts", config.maximin.restarts}};
    j["notes"] = {"max-var is a maximum predictive variance baseline standing in for the treed-GP D-optimal method",
                  "stopping rule: run size budget only"};
    j["version"] = "seqdex 0.1.0";
    return j.dump(2) + "\n";
}

}  // namespace

const std::vector<std::string>& test_function_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& f : registry()) v.push_back(f.name);
        return v;
    }();
    return names;
}

const TestFunction& get_test_function(std::string_view name) {
    for (const auto& f : registry()) {
        if (f.name == name) return f;
    }
    throw std::invalid_argument("unknown test function '" + std::string(name) + "'");
}

double evaluate_test_function(std::string_view name, const Eigen::VectorXd& x) {
    const auto& f = get_test_function(name);
    if (x.size() != f.d) throw std::invalid_argument("test function " + f.name + " expects d = " + std::to_string(f.d));
    for (int j = 0; j < f.d; ++j) {
        const auto& b = f.domain[static_cast<std::size_t>(j)];
        const double slack = 1e-12 * b.width();
        if (!(x(j) >= b.lower - slack && x(j) <= b.upper + slack)) {
            throw std::invalid_argument("point outside the domain of " + f.name);
        }
    }
    return f.eval(x);
}

double rmspe(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    check_metric_inputs(pred, truth);
    return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

double max_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    check_metric_inputs(pred, truth);
    return (pred - truth).cwiseAbs().maxCoeff();
}

const ExampleSetup& get_example(std::string_view name) {
    for (const auto& e : examples()) {
        if (e.name == name) return e;
    }
    throw std::invalid_argument("unknown example '" + std::string(name) + "' (expected ex1..ex5)");
}

const std::vector<std::string>& all_methods() {
    static const std::vector<std::string> methods = {std::string(kOneShotMethod), "max-var", "eigf", "smed", "mc",
                                                     "sc-var"};
    return methods;
}

Quartiles quartiles(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("quartiles: no values");
    std::sort(values.begin(), values.end());
    return {values.front(), quantile7(values, 0.25), quantile7(values, 0.5), quantile7(values, 0.75), values.back()};
}

const MethodSummary& MetricsSummary::method(std::string_view name) const {
    for (const auto& m : methods) {
        if (m.method == name) return m;
    }
    throw std::out_of_range("summary has no method '" + std::string(name) + "'");
}

std::string MetricsSummary::to_csv() const {
    std::string out =
        "method,n_ok,n_failed,rmspe_min,rmspe_q1,rmspe_median,rmspe_q3,rmspe_max,"
        "maxerr_min,maxerr_q1,maxerr_median,maxerr_q3,maxerr_max\n";
    for (const auto& m : methods) {
        out += m.method + ',' + std::to_string(m.n_ok) + ',' + std::to_string(m.n_failed);
        for (const auto* q : {&m.rmspe, &m.max_error}) {
            for (double v : {q->min, q->q1, q->median, q->q3, q->max}) out += ',' + format_double(v);
        }
        out += '\n';
    }
    return out;
}

MetricsSummary MetricsSummary::from_csv(const std::string& text) {
    MetricsSummary s;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 13) throw std::runtime_error("summary.csv: expected 13 columns, got " +
                                                         std::to_string(cells.size()));
        MethodSummary m;
        m.method = cells[0];
        m.n_ok = std::stoi(cells[1]);
        m.n_failed = std::stoi(cells[2]);
        auto num = [&](std::size_t i) { return std::stod(cells[i]); };
        m.rmspe = {num(3), num(4), num(5), num(6), num(7)};
        m.max_error = {num(8), num(9), num(10), num(11), num(12)};
        s.methods.push_back(std::move(m));
    }
    return s;
}

std::string MetricsSummary::to_markdown() const {
    std::ostringstream out;
    out.precision(6);
    if (!example.empty()) out << "### " << example << "\n\n";
    out << "| method | ok | failed | RMSPE q1 | RMSPE median | RMSPE q3 | max err q1 | max err median | max err q3 |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& m : methods) {
        out << "| " << m.method << " | " << m.n_ok << " | " << m.n_failed << " | " << m.rmspe.q1 << " | "
            << m.rmspe.median << " | " << m.rmspe.q3 << " | " << m.max_error.q1 << " | " << m.max_error.median
            << " | " << m.max_error.q3 << " |\n";
    }
    return out.str();
}

std::string MetricsSummary::to_gnuplot() const {
    std::ostringstream out;
    out.precision(10);
    for (const auto* label : {"rmspe", "max_error"}) {
        out << "# " << label << ": index method min q1 median q3 max\n";
        int idx = 0;
        for (const auto& m : methods) {
            const auto& q = std::string(label) == "rmspe" ? m.rmspe : m.max_error;
            out << idx++ << ' ' << m.method << ' ' << q.min << ' ' << q.q1 << ' ' << q.median << ' ' << q.q3 << ' '
                << q.max << '\n';
        }
        out << "\n\n";
    }
    return out.str();
}

std::uint64_t replication_seed(std::uint64_t base_seed, int rep) {
    return derive_seed(base_seed, static_cast<std::uint64_t>(rep));
}

AcquisitionSpec method_spec(const std::string& method, const ExampleSetup& example, const BenchConfig& config,
                            const Eigen::VectorXd& initial_responses) {
    AcquisitionSpec spec;
    spec.kind = parse_criterion(method);
    spec.alpha = config.alpha;
    spec.p = config.p;
    spec.k = config.k.value_or(example.mc_k);
    switch (spec.kind) {
        case Criterion::MultiContourEI:
            if (!config.levels.empty()) {
                spec.levels = config.levels;
            } else if (!config.k) {
                spec.levels = example.mc_levels;
            }
            break;
        case Criterion::ContourEI:
            if (!config.levels.empty()) {
                spec.levels = {config.levels.front()};
            } else if (example.ei_level) {
                spec.levels = {*example.ei_level};
            } else {
                if (initial_responses.size() == 0) throw std::invalid_argument("ei-contour needs a contour level");
                spec.levels = {0.5 * (initial_responses.minCoeff() + initial_responses.maxCoeff())};
            }
            break;
        default:
            break;
    }
    spec.validate();
    return spec;
}

BenchResult run_benchmark(const BenchConfig& config) {
    const auto setup = resolve(config);
    if (!setup.example_dir.empty()) std::filesystem::create_directories(setup.example_dir);

    std::vector<std::vector<ExperimentRecord>> per_rep(static_cast<std::size_t>(config.reps));
    std::atomic<int> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    auto worker = [&] {
        while (true) {
            const int rep = next.fetch_add(1);
            if (rep >= config.reps) return;
            try {
                per_rep[static_cast<std::size_t>(rep)] = run_replication(config, setup, rep);
            } catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    const int n_threads = std::min(config.workers, config.reps);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    BenchResult result;
    result.summary.example = setup.example.name;
    for (std::size_t mi = 0; mi < setup.methods.size(); ++mi) {
        MethodSummary ms;
        ms.method = setup.methods[mi];
        std::vector<double> r;
        std::vector<double> e;
        for (const auto& rep_records : per_rep) {
            const auto& rec = rep_records[mi];
            if (rec.failed) {
                ++ms.n_failed;
            } else {
                ++ms.n_ok;
                r.push_back(rec.rmspe);
                e.push_back(rec.max_error);
            }
            result.records.push_back(rec);
        }
        if (!r.empty()) {
            ms.rmspe = quartiles(r);
            ms.max_error = quartiles(e);
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            ms.rmspe = ms.max_error = {nan, nan, nan, nan, nan};
        }
        result.failures += ms.n_failed;
        result.summary.methods.push_back(std::move(ms));
    }

    if (!setup.example_dir.empty()) {
        const std::filesystem::path dir(setup.example_dir);
        write_text_file((dir / "summary.csv").string(), result.summary.to_csv());
        write_text_file((dir / "meta.json").string(), meta_json(config, setup));
    }
    return result;
}

}  // namespace seqdex
