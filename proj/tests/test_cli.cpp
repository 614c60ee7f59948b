#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "seqdex/bench.hpp"
#include "seqdex/cli.hpp"
#include "seqdex/csv.hpp"
#include "seqdex/sequential.hpp"

using namespace seqdex;
namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code = 0;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "seqdex");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("seqdex_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string data_csv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    std::string s;
    for (Eigen::Index j = 0; j < X.cols(); ++j) s += "x" + std::to_string(j + 1) + ",";
    s += "y\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) s += format_double(X(i, j)) + ",";
        s += format_double(y(i)) + "\n";
    }
    return s;
}

double value_after(const std::string& report, const std::string& key) {
    std::istringstream in(report);
    std::string k;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        ls >> k;
        if (k == key) {
            double v;
            ls >> v;
            return v;
        }
    }
    throw std::runtime_error("missing " + key);
}

// Branin evaluated on unit coordinates, so CSV files carry the exact design values.
double branin_unit(const Eigen::VectorXd& u) {
    const auto& f = get_test_function("branin");
    return f.eval(point_to_domain(u, f.domain));
}

}  // namespace

TEST_CASE("run config parsing") {
    const auto cfg = cli::parse_run_config(R"({"domain": [[-5, 10], [0, 15]], "nugget": 1e-7, "n_starts": 3})");
    REQUIRE(cfg.domain.has_value());
    CHECK((*cfg.domain)[0] == Bounds{-5.0, 10.0});
    CHECK(cfg.fit.nugget == 1e-7);
    CHECK(cfg.fit.n_starts == 3);
    CHECK_THROWS_AS(cli::parse_run_config(R"({"domian": [[0, 1]]})"), std::invalid_argument);
    CHECK_THROWS_AS(cli::parse_run_config(R"({"domain": [[1, 0]]})"), std::invalid_argument);
    CHECK_THROWS_AS(cli::parse_run_config(R"({"nugget": "small"})"), std::invalid_argument);
    CHECK_THROWS_AS(cli::parse_run_config("[1, 2]"), std::invalid_argument);
    CHECK_THROWS_AS(cli::parse_run_config(R"({"nugget": 1e-3})"), std::invalid_argument);
}

TEST_CASE("bounds and number lists") {
    const auto d = cli::parse_bounds("-5:10,0:15");
    CHECK(d.size() == 2);
    CHECK(d[1] == Bounds{0.0, 15.0});
    CHECK_THROWS(cli::parse_bounds("0-1"));
    CHECK_THROWS(cli::parse_bounds("1:0"));
    CHECK(cli::parse_number_list("150,300,600") == std::vector<double>{150.0, 300.0, 600.0});
    CHECK_THROWS(cli::parse_number_list("1,x"));
}

TEST_CASE("load_dataset") {
    const auto ds = cli::load_dataset("x1,y\n-5,1\n10,2\n", Domain{{-5.0, 10.0}});
    CHECK(ds.design.points()(0, 0) == 0.0);
    CHECK(ds.design.points()(1, 0) == 1.0);
    CHECK_THROWS(cli::load_dataset("x1,y\n11,1\n0,2\n", Domain{{-5.0, 10.0}}));
    CHECK_THROWS(cli::load_dataset("x1,y\n0.5,1\n0.5,2\n", std::nullopt));
    CHECK_THROWS(cli::load_dataset("x1,y\n0.5,1\n0.6\n", std::nullopt));
    CHECK_THROWS(cli::load_dataset("x1,y\n0.5,1\n0.6,abc\n", std::nullopt));
}

TEST_CASE("fit: linear data, report and deterministic JSON") {
    const auto dir = scratch("fit");
    write_text_file((dir / "lin.csv").string(), "x1,y\n0,0\n0.25,0.25\n0.5,0.5\n0.75,0.75\n1,1\n");
    const auto a = invoke({"fit", "--data", (dir / "lin.csv").string(), "--seed", "4", "--out", (dir / "a.json").string()});
    REQUIRE(a.code == 0);
    CHECK(value_after(a.out, "interp_residual") < 1e-6);
    CHECK(a.out.find("loo_rmspe") != std::string::npos);
    CHECK(a.out.find("log_likelihood") != std::string::npos);
    const auto b = invoke({"fit", "--data", (dir / "lin.csv").string(), "--seed", "4", "--out", (dir / "b.json").string()});
    CHECK(read_text_file((dir / "a.json").string()) == read_text_file((dir / "b.json").string()));
}

TEST_CASE("fit: constant response warns") {
    const auto dir = scratch("fit_const");
    write_text_file((dir / "c.csv").string(), "x1,y\n0,3\n0.5,3\n1,3\n");
    const auto r = invoke({"fit", "--data", (dir / "c.csv").string()});
    CHECK(r.code == 0);
    CHECK(value_after(r.out, "sigma2_hat") == 0.0);
    CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("fit: errors surface as exit codes") {
    const auto dir = scratch("fit_err");
    write_text_file((dir / "dup.csv").string(), "x1,y\n0.2,1\n0.2,2\n");
    write_text_file((dir / "cfg.json").string(), R"({"colour": 1})");
    write_text_file((dir / "ok.csv").string(), "x1,y\n0.2,1\n0.4,2\n");
    CHECK(invoke({"fit", "--data", (dir / "dup.csv").string()}).code == cli::kError);
    CHECK(invoke({"fit", "--data", (dir / "ok.csv").string(), "--config", (dir / "cfg.json").string()}).code ==
          cli::kError);
    CHECK(invoke({"fit"}).code == cli::kUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kUsage);
}

TEST_CASE("suggest: unknown criterion") {
    const auto dir = scratch("sug_bad");
    write_text_file((dir / "d.csv").string(), "x1,y\n0.2,1\n0.4,2\n");
    const auto r = invoke({"suggest", "--data", (dir / "d.csv").string(), "--criterion", "tgp"});
    CHECK(r.code == cli::kError);
    CHECK(r.err.find("unknown criterion") != std::string::npos);
}

TEST_CASE("suggest matches sequential step and replays a two-stage run") {
    const auto dir = scratch("sug_replay");
    const DesignMatrix init(maximin_lhd(8, 2, 31).points(), unit_domain(2));
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) y(i) = branin_unit(init.row(i));
    const Oracle oracle = [](const Eigen::VectorXd& u) { return branin_unit(u); };

    for (const char* crit : {"sc-var", "mc", "eigf"}) {
        AcquisitionSpec spec;
        spec.kind = parse_criterion(crit);
        const auto state = run(init, y, oracle, spec, 10, {}, 123);

        Eigen::MatrixXd X = init.points();
        Eigen::VectorXd yy = y;
        for (int stage = 0; stage < 2; ++stage) {
            const auto path = (dir / "data.csv").string();
            write_text_file(path, data_csv(X, yy));
            const auto r = invoke({"suggest", "--data", path, "--criterion", crit, "--seed", "123", "--n0", "8"});
            REQUIRE(r.code == 0);
            const auto j = nlohmann::json::parse(r.out);
            Eigen::VectorXd x(2);
            x << j["x"][0].get<double>(), j["x"][1].get<double>();
            const auto& h = state.history[static_cast<std::size_t>(stage)];
            CHECK(x == h.x_chosen);
            CHECK(j["criterion_value"].get<double>() == h.criterion_value);
            CHECK(j["candidate_seed"].get<std::uint64_t>() == h.candidate_seed);
            X.conservativeResize(X.rows() + 1, Eigen::NoChange);
            X.row(X.rows() - 1) = x.transpose();
            yy.conservativeResize(yy.size() + 1);
            yy(yy.size() - 1) = oracle(x);
        }
    }
}

TEST_CASE("suggest: contour EI at 300 on the Example 2 design") {
    const auto dir = scratch("sug_ei");
    const auto& f = get_test_function("two_dim");
    const auto X = maximin_lhd(10, 2, 5).points();
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) y(i) = f.eval(X.row(i).transpose());
    const auto path = (dir / "ex2.csv").string();
    write_text_file(path, data_csv(X, y));
    const auto r = invoke({"suggest", "--data", path, "--criterion", "ei-contour", "--levels", "300", "--seed", "1"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["criterion_value"].get<double>() > 0.0);
    CHECK(j["levels"] == std::vector<double>{300.0});

    FitConfig cfg;
    cfg.seed = stage_seeds(1, 0).fit_seed;
    const auto gp = GpSurrogate::fit(X, y, cfg);
    Eigen::VectorXd x(2);
    x << j["x_unit"][0].get<double>(), j["x_unit"][1].get<double>();
    const auto p = gp.predict(x);
    CHECK(std::abs(p.mean - 300.0) <= 2.0 * p.sd());

    CHECK(invoke({"suggest", "--data", path, "--criterion", "ei-contour"}).code == cli::kError);
}

TEST_CASE("suggest: smed reports the positivity shift") {
    const auto dir = scratch("sug_smed");
    const auto path = (dir / "neg.csv").string();
    write_text_file(path, "x1,x2,y\n-4,1,-30\n0,12,5\n7,3,-2\n9,14,12\n2,6,-11\n");
    const auto r = invoke({"suggest", "--data", path, "--criterion", "smed", "--bounds", "-5:10,0:15"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["smed_shift"].get<double>() > 0.0);
    CHECK(j["smed_p"].get<double>() == 4.0);
    CHECK(j["x"][0].get<double>() >= -5.0);
    CHECK(j["x"][1].get<double>() <= 15.0);
}

TEST_CASE("suggest from a saved model agrees with refitting") {
    const auto dir = scratch("sug_model");
    const auto path = (dir / "d.csv").string();
    write_text_file(path, "x1,y\n0,1\n0.3,0.2\n0.55,-0.4\n0.9,0.8\n");
    const auto seed = std::to_string(stage_seeds(9, 0).fit_seed);
    REQUIRE(invoke({"fit", "--data", path, "--seed", seed, "--out", (dir / "m.json").string()}).code == 0);
    const auto a = invoke({"suggest", "--model", (dir / "m.json").string(), "--criterion", "max-var", "--seed", "9"});
    const auto b = invoke({"suggest", "--data", path, "--criterion", "max-var", "--seed", "9"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(nlohmann::json::parse(a.out)["x"] == nlohmann::json::parse(b.out)["x"]);
    CHECK(invoke({"suggest", "--model", "m.json", "--data", path}).code == cli::kUsage);
}

TEST_CASE("bench and report commands") {
    const auto dir = scratch("bench");
    const auto a = invoke({"bench", "ex1", "--methods", "mc,sc-var,maximin-lhd-oneshot", "--reps", "1", "--seed", "5",
                           "--out", (dir / "a").string()});
    REQUIRE(a.code == 0);
    const auto summary = read_text_file((dir / "a" / "ex1" / "summary.csv").string());
    CHECK(MetricsSummary::from_csv(summary).methods.size() == 3);

    ::setenv("SEQDEX_RESULTS_DIR", (dir / "b").string().c_str(), 1);
    const auto b = invoke({"bench", "ex1", "--methods", "mc,sc-var,maximin-lhd-oneshot", "--reps", "1", "--seed", "5"});
    ::unsetenv("SEQDEX_RESULTS_DIR");
    REQUIRE(b.code == 0);
    CHECK(read_text_file((dir / "b" / "ex1" / "summary.csv").string()) == summary);

    const auto r = invoke({"report", (dir / "a" / "ex1").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("| mc |") != std::string::npos);
    CHECK(fs::exists(dir / "a" / "ex1" / "summary.md"));
    CHECK(fs::exists(dir / "a" / "ex1" / "summary.dat"));

    CHECK(invoke({"bench", "ex1", "--methods", "nope", "--reps", "1", "--out", (dir / "c").string()}).code ==
          cli::kError);
}

TEST_CASE("design command") {
    const auto dir = scratch("design");
    const auto prefix = (dir / "lhd").string();
    REQUIRE(invoke({"design", "--n", "7", "--d", "3", "--seed", "2", "--bounds", "0:1,0:2,0:3", "--out", prefix}).code ==
            0);
    const auto D = design_from_csv(read_text_file(prefix + ".csv"), read_text_file(prefix + ".json"));
    CHECK(D.n() == 7);
    CHECK(is_latin_hypercube(D.points()));
    CHECK(D.domain()[2] == Bounds{0.0, 3.0});
}
