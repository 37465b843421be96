#include "mixtree/commands.hpp"
#include "mixtree/error.hpp"
#include "mixtree/rng.hpp"
#include "mixtree/simulation.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mixtree;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

// Small analyzable CSV from the 2D generator.
fs::path write_data_csv(const fs::path& dir, int n, std::uint64_t seed) {
    const Dgp2d dgp(seed, 2000, 1000);
    const Dataset d = dgp.generate(n, seed + 1);
    std::ostringstream ss;
    ss << "y,A1,A2,age,bmi,sex\n";
    for (int i = 0; i < d.n(); ++i) {
        ss << d.y[i] << ',' << d.a(i, 0) << ',' << d.a(i, 1) << ',' << d.w(i, 0) << ',' << d.w(i, 1)
           << ',' << d.w(i, 2) << '\n';
    }
    const fs::path path = dir / "data.csv";
    write_text(path, ss.str());
    return path;
}

AnalysisConfig lean_analysis(const fs::path& csv, const fs::path& out) {
    AnalysisConfig cfg;
    cfg.input_csv = csv.string();
    cfg.output_dir = out.string();
    cfg.roles.outcome = "y";
    cfg.roles.exposures = {"A1", "A2"};
    cfg.roles.covariates = {"age", "bmi", "sex"};
    cfg.cross.k = 3;
    cfg.cross.seed = 11;
    cfg.cross.threads = 2;
    cfg.q_learners = "glm,tree3";
    cfg.g_learners = "glm,tree3";
    cfg.h_learners = "glm,tree3";
    cfg.cross.backfit.rules.n_trees = 20;
    cfg.cross.backfit.inner_folds = 3;
    return cfg;
}

}  // namespace

TEST_CASE("parse_config_file: flat key-value document") {
    const fs::path dir = fs::temp_directory_path() / "mixtree_cfg_test";
    fs::create_directories(dir);
    write_text(dir / "cfg.txt",
               "# comment line\n"
               "input = data.csv\n"
               "k = 7\n"
               "direction = min  # trailing comment\n"
               "exposures = A1, A2\n");
    const auto kv = parse_config_file((dir / "cfg.txt").string());
    CHECK(kv.at("input") == "data.csv");
    CHECK(kv.at("k") == "7");
    CHECK(kv.at("direction") == "min");

    AnalysisConfig cfg;
    cfg.apply(kv);
    CHECK(cfg.cross.k == 7);
    CHECK(cfg.cross.direction == Direction::Min);
    CHECK(cfg.roles.exposures == std::vector<std::string>{"A1", "A2"});

    write_text(dir / "bad.txt", "not_a_known_key = 3\n");
    AnalysisConfig cfg2;
    CHECK_THROWS_AS(cfg2.apply(parse_config_file((dir / "bad.txt").string())), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("parse_learners: tokens and errors") {
    const auto lib = parse_learners("glm, tree4, forest25, lasso", Family::Identity);
    REQUIRE(lib.size() == 4);
    CHECK(lib[0].kind == LearnerKind::Glm);
    CHECK(lib[1].max_depth == 4);
    CHECK(lib[2].n_trees == 25);
    CHECK(lib[3].kind == LearnerKind::PenalizedGlm);
    CHECK_THROWS_AS(parse_learners("svm", Family::Identity), ConfigError);
    CHECK_THROWS_AS(parse_learners("", Family::Identity), ConfigError);
}

TEST_CASE("cmd_analyze: artifacts, layout, and byte determinism under threads") {
    const fs::path dir = fs::temp_directory_path() / "mixtree_analyze_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path csv = write_data_csv(dir, 240, 5);

    AnalysisConfig cfg = lean_analysis(csv, dir / "out1");
    REQUIRE(cmd_analyze(cfg) == 0);
    for (const char* name : {"report.json", "pooled.csv", "kfold.csv", "manifest.json"}) {
        CHECK(fs::exists(dir / "out1" / name));
    }
    const std::string pooled = slurp(dir / "out1" / "pooled.csv");
    CHECK(pooled.rfind("estimator,varset,are,se,ci_lower,ci_upper,p_value,p_value_adj,union_rule,"
                       "stability,folds_found,folds_estimated",
                       0) == 0);

    const auto report = nlohmann::json::parse(slurp(dir / "out1" / "report.json"));
    CHECK(report.at("schema") == "mixtree-report-v1");
    CHECK(report.at("k") == 3);
    CHECK(report.at("config").at("version").is_string());

    // identical config and seed give identical bytes on a rerun, in parallel mode
    const std::string report_bytes = slurp(dir / "out1" / "report.json");
    const std::string pooled_bytes = pooled;
    REQUIRE(cmd_analyze(cfg) == 0);
    CHECK(slurp(dir / "out1" / "report.json") == report_bytes);
    CHECK(slurp(dir / "out1" / "pooled.csv") == pooled_bytes);
    fs::remove_all(dir);
}

TEST_CASE("cmd_analyze: schema errors exit with code 2") {
    const fs::path dir = fs::temp_directory_path() / "mixtree_analyze_err";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path csv = write_data_csv(dir, 60, 8);

    AnalysisConfig missing = lean_analysis(csv, dir / "out");
    missing.roles.outcome = "not_there";
    CHECK(cmd_analyze(missing) == 2);

    write_text(dir / "bad.csv", "y,A1,A2,age,bmi,sex\n1,2,oops,4,5,6\n");
    AnalysisConfig bad = lean_analysis(dir / "bad.csv", dir / "out");
    CHECK(cmd_analyze(bad) == 2);
    fs::remove_all(dir);
}

TEST_CASE("cmd_simulate: metrics shape, determinism, and checkpoint resume") {
    const fs::path dir = fs::temp_directory_path() / "mixtree_sim_test";
    fs::remove_all(dir);

    SimulateSpec spec;
    spec.dgp = "2d";
    spec.sample_sizes = {120};
    spec.iterations = 2;
    spec.k = 3;
    spec.seed = 21;
    spec.threads = 2;
    spec.output_dir = (dir / "sim").string();
    REQUIRE(cmd_simulate(spec) == 0);

    const std::string metrics = slurp(dir / "sim" / "metrics.csv");
    CHECK(metrics.rfind("n,iteration,estimator,target,metric,value", 0) == 0);
    // both iterations and all six estimator x target groups are present
    for (const char* tag : {"pooled_tmle,oracle", "pooled_tmle,data_adaptive", "mean_kfold,oracle",
                            "mean_kfold,data_adaptive", "ivm,oracle", "ivm,data_adaptive"}) {
        CHECK(metrics.find(tag) != std::string::npos);
    }
    CHECK(metrics.find("120,0,") != std::string::npos);
    CHECK(metrics.find("120,1,") != std::string::npos);

    const auto summary = nlohmann::json::parse(slurp(dir / "sim" / "summary.json"));
    CHECK(summary.at("schema") == "mixtree-sim-summary-v1");
    CHECK(summary.at("rows").size() == 6);  // one n, six estimator/target rows
    for (const auto& row : summary.at("rows")) {
        if (row.contains("abs_bias")) {
            CHECK(row.at("abs_bias").get<double>() >= 0.0);
        }
    }

    // resume path: wipe the derived tables but keep checkpoints
    fs::remove(dir / "sim" / "metrics.csv");
    fs::remove(dir / "sim" / "summary.json");
    REQUIRE(cmd_simulate(spec) == 0);
    CHECK(slurp(dir / "sim" / "metrics.csv") == metrics);

    // full recompute from scratch matches too (seeded determinism)
    SimulateSpec fresh = spec;
    fresh.output_dir = (dir / "sim2").string();
    REQUIRE(cmd_simulate(fresh) == 0);
    CHECK(slurp(dir / "sim2" / "metrics.csv") == metrics);
    fs::remove_all(dir);
}

TEST_CASE("cmd_simulate: invalid spec exits with code 2") {
    SimulateSpec spec;
    spec.dgp = "4d";
    CHECK(cmd_simulate(spec) == 2);
}

TEST_CASE("output dir environment override") {
    const fs::path dir = fs::temp_directory_path() / "mixtree_env_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path csv = write_data_csv(dir, 60, 3);
    AnalysisConfig cfg = lean_analysis(csv, dir / "ignored");
    cfg.cross.k = 2;
    setenv("MIXTREE_OUTPUT_DIR", (dir / "env_out").string().c_str(), 1);
    const int rc = cmd_analyze(cfg);
    unsetenv("MIXTREE_OUTPUT_DIR");
    REQUIRE(rc == 0);
    CHECK(fs::exists(dir / "env_out" / "report.json"));
    CHECK_FALSE(fs::exists(dir / "ignored"));
    fs::remove_all(dir);
}
