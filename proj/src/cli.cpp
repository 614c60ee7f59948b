#include "seqdex/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "seqdex/acquisition.hpp"
#include "seqdex/bench.hpp"
#include "seqdex/csv.hpp"
#include "seqdex/sequential.hpp"

namespace seqdex::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

double parse_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

struct CommonModelOptions {
    std::string config_path;
    std::string bounds;
    std::uint64_t seed = 0;
};

RunConfig load_config(const CommonModelOptions& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = parse_run_config(read_text_file(opts.config_path));
    if (!opts.bounds.empty()) cfg.domain = parse_bounds(opts.bounds);
    cfg.fit.seed = opts.seed;
    return cfg;
}

void print_fit_report(const GpSurrogate& model, std::ostream& out, std::ostream& err) {
    const auto loo = model.loo_residuals();
    const double loo_rmspe = std::sqrt(loo.squaredNorm() / static_cast<double>(loo.size()));
    const auto interp = interpolation_check(model);
    out << "n " << model.n() << "\n";
    out << "d " << model.d() << "\n";
    out << "theta";
    for (Eigen::Index k = 0; k < model.theta().size(); ++k) out << ' ' << format_double(model.theta()(k));
    out << "\n";
    out << "mu_hat " << format_double(model.mu_hat()) << "\n";
    out << "sigma2_hat " << format_double(model.sigma2_hat()) << "\n";
    out << "nugget " << format_double(model.nugget()) << "\n";
    out << "log_likelihood " << format_double(model.log_likelihood()) << "\n";
    out << "loo_rmspe " << format_double(loo_rmspe) << "\n";
    out << "interp_residual " << format_double(interp.residual) << "\n";
    if (model.degenerate()) {
        err << "warning: constant response; sigma2_hat = 0 and the surrogate predicts the constant everywhere\n";
    }
}

AcquisitionSpec build_spec(const std::string& criterion, double alpha, std::optional<int> k,
                           const std::vector<double>& levels, double p) {
    AcquisitionSpec spec;
    spec.kind = parse_criterion(criterion);
    spec.alpha = alpha;
    spec.p = p;
    if (k) spec.k = *k;
    if (spec.kind == Criterion::ContourEI) {
        if (levels.size() != 1) throw std::invalid_argument("ei-contour needs exactly one --levels value");
        spec.levels = levels;
    } else if (spec.kind == Criterion::MultiContourEI) {
        spec.levels = levels;
    }
    spec.validate();
    return spec;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    RunConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "domain") {
                Domain dom;
                for (const auto& b : value) {
                    if (b.size() != 2) throw std::invalid_argument("config: domain entries must be [lower, upper]");
                    dom.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
                }
                validate_domain(dom);
                cfg.domain = std::move(dom);
            } else if (key == "nugget") {
                cfg.fit.nugget = value.get<double>();
            } else if (key == "max_nugget") {
                cfg.fit.max_nugget = value.get<double>();
            } else if (key == "log10_theta_bounds") {
                const auto b = value.get<std::vector<double>>();
                if (b.size() != 2 || !(b[0] < b[1])) throw std::invalid_argument("config: bad log10_theta_bounds");
                cfg.fit.log10_theta_lower = b[0];
                cfg.fit.log10_theta_upper = b[1];
            } else if (key == "n_starts") {
                cfg.fit.n_starts = value.get<int>();
            } else if (key == "max_iterations") {
                cfg.fit.max_iterations = value.get<int>();
            } else if (key == "interp_tolerance") {
                cfg.fit.interp_tolerance = value.get<double>();
            } else if (key == "refinement_steps") {
                cfg.fit.refinement_steps = value.get<int>();
            } else {
                throw std::invalid_argument("config: unknown field '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!(cfg.fit.nugget > 0.0) || cfg.fit.max_nugget < cfg.fit.nugget) {
        throw std::invalid_argument("config: need 0 < nugget <= max_nugget");
    }
    if (cfg.fit.n_starts < 0 || cfg.fit.max_iterations < 1) throw std::invalid_argument("config: bad optimizer settings");
    if (!(cfg.fit.interp_tolerance > 0.0) || cfg.fit.refinement_steps < 0) {
        throw std::invalid_argument("config: need interp_tolerance > 0 and refinement_steps >= 0");
    }
    return cfg;
}

Domain parse_bounds(const std::string& text) {
    Domain dom;
    for (const auto& part : split(text, ',')) {
        const auto lohi = split(part, ':');
        if (lohi.size() != 2) throw std::invalid_argument("bounds: expected lo:hi, got '" + part + "'");
        dom.push_back({parse_number(lohi[0]), parse_number(lohi[1])});
    }
    if (dom.empty()) throw std::invalid_argument("bounds: empty");
    validate_domain(dom);
    return dom;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& part : split(text, ',')) out.push_back(parse_number(part));
    return out;
}

Dataset load_dataset(const std::string& csv_text, const std::optional<Domain>& domain) {
    const auto table = parse_csv(csv_text);
    const auto cols = table.values.cols();
    if (cols < 2) throw std::runtime_error("data: need at least one input column and a response column");
    if (table.values.rows() < 2) throw std::runtime_error("data: need at least two rows");
    const int d = static_cast<int>(cols - 1);
    const Domain dom = domain ? *domain : unit_domain(d);
    if (static_cast<int>(dom.size()) != d) {
        throw std::runtime_error("data: " + std::to_string(d) + " input columns but the domain has " +
                                 std::to_string(dom.size()) + " dimensions");
    }
    const Eigen::MatrixXd x = table.values.leftCols(d);
    Eigen::MatrixXd unit = scale_to_unit(x, dom);
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        for (Eigen::Index j = 0; j < unit.cols(); ++j) {
            if (!(unit(i, j) >= -1e-12 && unit(i, j) <= 1.0 + 1e-12)) {
                throw std::runtime_error("data: row " + std::to_string(i + 1) + " lies outside the domain");
            }
            unit(i, j) = std::clamp(unit(i, j), 0.0, 1.0);
        }
    }
    Dataset ds{DesignMatrix(unit, dom), table.values.col(d)};
    if (!ds.y.allFinite()) throw std::runtime_error("data: non-finite response");
    check_distinct_rows(ds.design.points());
    return ds;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sequential design of computer experiments with Gaussian-process surrogates"};
    app.name("seqdex");
    app.require_subcommand(1);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a surrogate to x1..xd,y data");
    CommonModelOptions fit_opts;
    std::string fit_data;
    std::string fit_out;
    fit->add_option("--data", fit_data, "CSV with columns x1..xd,y (domain coordinates)")->required();
    fit->add_option("--config", fit_opts.config_path, "JSON run config");
    fit->add_option("--bounds", fit_opts.bounds, "Domain as lo:hi,lo:hi,...");
    fit->add_option("--seed", fit_opts.seed, "Optimizer seed");
    fit->add_option("--out", fit_out, "Write the surrogate JSON here");

    // suggest
    auto* suggest = app.add_subcommand("suggest", "Propose the next simulator run");
    CommonModelOptions sug_opts;
    std::string sug_data;
    std::string sug_model;
    std::string criterion = "mc";
    double alpha = 2.0;
    std::optional<int> k;
    std::string levels_text;
    double p = 0.0;
    std::optional<int> n0;
    std::string sug_out;
    auto* data_opt = suggest->add_option("--data", sug_data, "CSV with columns x1..xd,y");
    auto* model_opt = suggest->add_option("--model", sug_model, "Surrogate JSON from `fit`");
    data_opt->excludes(model_opt);
    suggest->add_option("--config", sug_opts.config_path, "JSON run config");
    suggest->add_option("--bounds", sug_opts.bounds, "Domain as lo:hi,lo:hi,...");
    suggest->add_option("--seed", sug_opts.seed, "Run seed");
    suggest->add_option("--criterion", criterion, "ei-contour | mc | sc-var | eigf | smed | max-var");
    suggest->add_option("--alpha", alpha, "Band width multiplier");
    suggest->add_option("--k", k, "Number of equispaced MC levels");
    suggest->add_option("--levels", levels_text, "Comma-separated contour levels");
    suggest->add_option("--p", p, "SMED exponent (default 2d)");
    suggest->add_option("--n0", n0, "Initial design size; the stage index is n - n0 (default n)");
    suggest->add_option("--out", sug_out, "Also write the JSON result here");

    // bench
    auto* bench = app.add_subcommand("bench", "Run a benchmark example");
    BenchConfig bc;
    std::string methods_text = "all";
    std::string bench_levels;
    std::string bench_out;
    bench->add_option("example", bc.example, "ex1 .. ex5")->required();
    bench->add_option("--methods", methods_text, "Comma-separated methods or `all`");
    bench->add_option("--reps", bc.reps, "Replications");
    bench->add_option("--seed", bc.base_seed, "Base seed");
    bench->add_option("--workers", bc.workers, "Worker threads");
    bench->add_option("--out", bench_out, "Results root (default $SEQDEX_RESULTS_DIR or ./results)");
    bench->add_option("--k", bc.k, "MC level count");
    bench->add_option("--alpha", bc.alpha, "Band width multiplier");
    bench->add_option("--levels", bench_levels, "Fixed contour levels");
    bench->add_option("--p", bc.p, "SMED exponent (default 2d)");
    bench->add_option("--n0", bc.n0, "Initial design size");
    bench->add_option("--budget", bc.budget, "Total run size");
    bench->add_option("--swaps", bc.maximin.swaps, "Maximin swap attempts per restart");
    bench->add_option("--restarts", bc.maximin.restarts, "Maximin restarts");
    bench->add_flag("--resume", bc.resume, "Reuse completed replication files");

    // report
    auto* report = app.add_subcommand("report", "Render summary.csv as markdown and gnuplot data");
    std::string report_in;
    std::string report_out;
    report->add_option("summary", report_in, "summary.csv or the directory holding it")->required();
    report->add_option("--out", report_out, "Output directory (default: next to summary.csv)");

    // design
    auto* design = app.add_subcommand("design", "Write a Latin hypercube design");
    int design_n = 0;
    int design_d = 0;
    std::uint64_t design_seed = 0;
    bool design_random = false;
    std::string design_bounds;
    std::string design_out;
    design->add_option("--n", design_n, "Run size")->required();
    design->add_option("--d", design_d, "Dimension")->required();
    design->add_option("--seed", design_seed, "Seed");
    design->add_flag("--random", design_random, "Random rather than maximin LHD");
    design->add_option("--bounds", design_bounds, "Domain recorded in the sidecar");
    design->add_option("--out", design_out, "Output prefix; writes <prefix>.csv and <prefix>.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (fit->parsed()) {
            const auto cfg = load_config(fit_opts);
            const auto ds = load_dataset(read_text_file(fit_data), cfg.domain);
            const auto model = GpSurrogate::fit(ds.design.points(), ds.y, cfg.fit);
            print_fit_report(model, out, err);
            if (!fit_out.empty()) write_text_file(fit_out, model.to_json() + "\n");
            return kOk;
        }

        if (suggest->parsed()) {
            if (sug_data.empty() && sug_model.empty()) throw std::invalid_argument("suggest needs --data or --model");
            const auto cfg = load_config(sug_opts);
            const auto spec = build_spec(criterion, alpha, k, levels_text.empty() ? std::vector<double>{}
                                                                                  : parse_number_list(levels_text),
                                         p);
            json j;
            Eigen::VectorXd x_unit;
            Domain dom;
            if (!sug_data.empty()) {
                const auto ds = load_dataset(read_text_file(sug_data), cfg.domain);
                const int stage = ds.design.n() - n0.value_or(ds.design.n());
                if (stage < 0) throw std::invalid_argument("--n0 exceeds the number of data rows");
                auto prop = propose_next(ds.design, ds.y, spec, cfg.fit, sug_opts.seed, stage);
                x_unit = prop.x_unit;
                dom = ds.design.domain();
                j["stage"] = stage;
                j["criterion_value"] = prop.scores.best_value;
                j["levels"] = prop.scores.levels;
                j["candidate_seed"] = prop.seeds.candidate_seed;
                j["fit_seed"] = prop.seeds.fit_seed;
                j["n_candidates"] = prop.candidates.points.rows();
                j["theta"] = to_std(prop.model.theta());
                if (prop.scores.smed_shift) {
                    j["smed_shift"] = *prop.scores.smed_shift;
                    j["smed_p"] = prop.scores.smed_p;
                }
            } else {
                const auto model = GpSurrogate::from_json(read_text_file(sug_model));
                dom = cfg.domain ? *cfg.domain : unit_domain(model.d());
                if (static_cast<int>(dom.size()) != model.d()) throw std::invalid_argument("domain/model dimension mismatch");
                const int stage = model.n() - n0.value_or(model.n());
                if (stage < 0) throw std::invalid_argument("--n0 exceeds the model's run count");
                const auto seeds = stage_seeds(sug_opts.seed, stage);
                const auto cand = make_candidates(model.d(), seeds.candidate_seed, model.X());
                const auto scores = score_candidates(model, cand.points, spec);
                x_unit = cand.points.row(static_cast<Eigen::Index>(scores.best_index)).transpose();
                j["stage"] = stage;
                j["criterion_value"] = scores.best_value;
                j["levels"] = scores.levels;
                j["candidate_seed"] = seeds.candidate_seed;
                j["n_candidates"] = cand.points.rows();
                if (scores.smed_shift) {
                    j["smed_shift"] = *scores.smed_shift;
                    j["smed_p"] = scores.smed_p;
                }
            }
            j["criterion"] = std::string(criterion_name(spec.kind));
            j["x"] = to_std(point_to_domain(x_unit, dom));
            j["x_unit"] = to_std(x_unit);
            const auto text = j.dump(2) + "\n";
            out << text;
            if (!sug_out.empty()) write_text_file(sug_out, text);
            return kOk;
        }

        if (bench->parsed()) {
            if (methods_text != "all") bc.methods = split(methods_text, ',');
            if (!bench_levels.empty()) bc.levels = parse_number_list(bench_levels);
            if (!bench_out.empty()) {
                bc.out_dir = bench_out;
            } else if (const char* env = std::getenv("SEQDEX_RESULTS_DIR"); env && *env) {
                bc.out_dir = env;
            } else {
                bc.out_dir = "results";
            }
            const auto result = run_benchmark(bc);
            out << result.summary.to_markdown();
            for (const auto& rec : result.records) {
                if (rec.failed) {
                    err << "replication " << rec.replication << " of " << rec.method << " failed: " << rec.error
                        << "\n";
                }
            }
            out << "results written to " << (fs::path(bc.out_dir) / result.summary.example).string() << "\n";
            return result.failures > 0 ? kFailedReplications : kOk;
        }

        if (report->parsed()) {
            fs::path in(report_in);
            if (fs::is_directory(in)) in /= "summary.csv";
            auto summary = MetricsSummary::from_csv(read_text_file(in.string()));
            summary.example = in.parent_path().filename().string();
            const fs::path dir = report_out.empty() ? in.parent_path() : fs::path(report_out);
            const auto md = summary.to_markdown();
            write_text_file((dir / "summary.md").string(), md);
            write_text_file((dir / "summary.dat").string(), summary.to_gnuplot());
            out << md;
            return kOk;
        }

        if (design->parsed()) {
            auto dm = design_random ? random_lhd(design_n, design_d, design_seed)
                                    : maximin_lhd(design_n, design_d, design_seed);
            if (!design_bounds.empty()) {
                auto dom = parse_bounds(design_bounds);
                if (static_cast<int>(dom.size()) != design_d) throw std::invalid_argument("--bounds dimension mismatch");
                dm = DesignMatrix(dm.points(), std::move(dom));
            }
            write_text_file(design_out + ".csv", design_to_csv(dm));
            write_text_file(design_out + ".json", design_sidecar_json(dm, design_seed));
            out << "wrote " << design_out << ".csv\n";
            return kOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
    return kUsage;
}

}  // namespace seqdex::cli
