#include "mixtree/commands.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"
#include "mixtree/report.hpp"
#include "mixtree/simulation.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace mixtree {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericError("cannot write " + path.string());
    out << content;
}

// Atomic write: temp file then rename.
void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    write_file(tmp, content);
    fs::rename(tmp, path);
}

std::string output_dir_override(const std::string& configured) {
    const char* env = std::getenv("MIXTREE_OUTPUT_DIR");
    return (env != nullptr && *env != '\0') ? env : configured;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected boolean, got '" + v + "'");
}

nlohmann::json analysis_echo(const AnalysisConfig& c) {
    nlohmann::json j;
    j["input"] = c.input_csv;
    j["output_dir"] = c.output_dir;
    j["outcome"] = c.roles.outcome;
    j["exposures"] = c.roles.exposures;
    j["covariates"] = c.roles.covariates;
    j["k"] = c.cross.k;
    j["direction"] = direction_name(c.cross.direction);
    j["seed"] = c.cross.seed;
    j["delta"] = c.cross.delta;
    j["max_iter"] = c.cross.max_iter;
    j["g_min"] = c.cross.g_min;
    j["joint"] = c.cross.run_joint;
    j["marginal"] = c.cross.run_marginal;
    j["stability_threshold"] = c.cross.stability_threshold;
    j["threads"] = c.cross.threads;
    j["q_learners"] = c.q_learners;
    j["g_learners"] = c.g_learners;
    j["h_learners"] = c.h_learners;
    j["rule_trees"] = c.cross.backfit.rules.n_trees;
    j["rule_depth"] = c.cross.backfit.rules.max_depth;
    j["rule_alpha"] = c.cross.backfit.rules.alpha;
    j["sl_inner_folds"] = c.cross.backfit.inner_folds;
    j["version"] = kVersion;
    return j;
}

nlohmann::json record_json(const EvalRecord& r, int iteration) {
    nlohmann::json j;
    j["n"] = r.n;
    j["iteration"] = iteration;
    j["estimator"] = estimator_name(r.estimator);
    j["target"] = truth_name(r.target);
    j["no_discovery"] = r.no_discovery;
    j["estimate"] = r.estimate;
    j["truth"] = r.truth;
    j["bias"] = r.bias;
    j["sqrt_n_bias"] = r.sqrt_n_bias;
    j["variance"] = r.variance;
    j["n_mse"] = r.n_mse;
    j["covered"] = r.covered;
    j["tp"] = r.tp;
    j["tn"] = r.tn;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
    EvalRecord r;
    r.n = j.at("n").get<int>();
    const std::string est = j.at("estimator").get<std::string>();
    r.estimator = est == "pooled_tmle" ? EstimatorKind::PooledTmle
                  : est == "mean_kfold" ? EstimatorKind::MeanKfold
                                        : EstimatorKind::Ivm;
    r.target = j.at("target").get<std::string>() == "oracle" ? TruthKind::Oracle
                                                             : TruthKind::DataAdaptive;
    r.no_discovery = j.at("no_discovery").get<bool>();
    r.estimate = j.at("estimate").get<double>();
    r.truth = j.at("truth").get<double>();
    r.bias = j.at("bias").get<double>();
    r.sqrt_n_bias = j.at("sqrt_n_bias").get<double>();
    r.variance = j.at("variance").get<double>();
    r.n_mse = j.at("n_mse").get<double>();
    r.covered = j.at("covered").get<bool>();
    r.tp = j.at("tp").get<long>();
    r.tn = j.at("tn").get<long>();
    r.fp = j.at("fp").get<long>();
    r.fn = j.at("fn").get<long>();
    return r;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + " is not 'key = value'");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::vector<LearnerSpec> parse_learners(const std::string& tokens, Family family) {
    std::vector<LearnerSpec> lib;
    for (const std::string& tok : split_list(tokens)) {
        if (tok == "glm") {
            lib.push_back(glm_spec(family));
        } else if (tok == "lasso") {
            lib.push_back(lasso_spec(family));
        } else if (tok.rfind("tree", 0) == 0) {
            const int depth = std::stoi(tok.substr(4));
            lib.push_back(tree_spec(depth, 1.0, 10));
        } else if (tok.rfind("forest", 0) == 0) {
            const int trees = std::stoi(tok.substr(6));
            lib.push_back(forest_spec(trees, 6, 5));
        } else {
            throw ConfigError("unknown learner token: '" + tok + "'");
        }
    }
    if (lib.empty()) throw ConfigError("empty learner library");
    return lib;
}

void AnalysisConfig::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "input") {
            input_csv = value;
        } else if (key == "output_dir") {
            output_dir = value;
        } else if (key == "outcome") {
            roles.outcome = value;
        } else if (key == "exposures") {
            roles.exposures = split_list(value);
        } else if (key == "covariates") {
            roles.covariates = split_list(value);
        } else if (key == "k") {
            cross.k = std::stoi(value);
        } else if (key == "direction") {
            cross.direction = direction_from_name(value);
        } else if (key == "seed") {
            cross.seed = std::stoull(value);
        } else if (key == "delta") {
            cross.delta = std::stod(value);
        } else if (key == "max_iter") {
            cross.max_iter = std::stoi(value);
        } else if (key == "g_min") {
            cross.g_min = std::stod(value);
        } else if (key == "joint") {
            cross.run_joint = parse_bool(value);
        } else if (key == "marginal") {
            cross.run_marginal = parse_bool(value);
        } else if (key == "stability_threshold") {
            cross.stability_threshold = std::stod(value);
        } else if (key == "threads") {
            cross.threads = std::stoi(value);
        } else if (key == "q_learners") {
            q_learners = value;
        } else if (key == "g_learners") {
            g_learners = value;
        } else if (key == "h_learners") {
            h_learners = value;
        } else if (key == "rule_trees") {
            cross.backfit.rules.n_trees = std::stoi(value);
        } else if (key == "rule_depth") {
            cross.backfit.rules.max_depth = std::stoi(value);
        } else if (key == "rule_alpha") {
            cross.backfit.rules.alpha = std::stod(value);
        } else if (key == "sl_inner_folds") {
            cross.backfit.inner_folds = std::stoi(value);
        } else {
            throw ConfigError("unknown config key: '" + key + "'");
        }
    }
}

int cmd_analyze(const AnalysisConfig& config_in) {
    AnalysisConfig config = config_in;
    config.output_dir = output_dir_override(config.output_dir);
    Dataset data;
    try {
        data = read_csv_dataset(config.input_csv, config.roles);
    } catch (const std::exception& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    }

    try {
        config.cross.nuisance.q_library = parse_learners(config.q_learners, Family::Identity);
        config.cross.nuisance.g_library = parse_learners(config.g_learners, Family::Logistic);
        config.cross.backfit.h_library = parse_learners(config.h_learners, Family::Identity);
        config.cross.nuisance.inner_folds = config.cross.backfit.inner_folds;

        const CvReport report = run_analysis(data, config.cross);

        const fs::path dir(config.output_dir);
        fs::create_directories(dir);
        const nlohmann::json echo = analysis_echo(config);
        write_file_atomic(dir / "report.json", report_json(report, echo).dump(2) + "\n");
        write_file_atomic(dir / "pooled.csv", pooled_csv(report));
        write_file_atomic(dir / "kfold.csv", kfold_csv(report));
        nlohmann::json manifest;
        manifest["schema"] = "mixtree-manifest-v1";
        manifest["command"] = "analyze";
        manifest["config"] = echo;
        manifest["seed"] = config.cross.seed;
        manifest["version"] = kVersion;
        write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "analysis failed: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

int cmd_simulate(const SimulateSpec& spec) {
    try {
        if (spec.iterations < 1) throw ConfigError("iterations must be >= 1");
        if (spec.dgp != "2d" && spec.dgp != "3d") throw ConfigError("dgp must be '2d' or '3d'");
        const std::string outdir = output_dir_override(spec.output_dir);
        const fs::path dir(outdir);
        const fs::path ckpt_dir = dir / "checkpoints";
        fs::create_directories(ckpt_dir);

        std::unique_ptr<DgpOracle> dgp;
        if (spec.dgp == "2d") {
            dgp = std::make_unique<Dgp2d>(spec.seed);
        } else {
            dgp = std::make_unique<Dgp3d>(spec.seed);
        }

        struct Job {
            int n, iteration;
        };
        std::vector<Job> jobs;
        for (int n : spec.sample_sizes) {
            for (int it = 0; it < spec.iterations; ++it) jobs.push_back({n, it});
        }
        std::vector<std::vector<EvalRecord>> results(jobs.size());

        auto job_path = [&](const Job& j) {
            return ckpt_dir / ("n" + std::to_string(j.n) + "_i" + std::to_string(j.iteration) + ".json");
        };

        auto run_job = [&](std::size_t idx) {
            const Job& job = jobs[idx];
            const fs::path path = job_path(job);
            if (spec.resume && fs::exists(path)) {
                std::ifstream in(path);
                nlohmann::json j;
                in >> j;
                for (const auto& jr : j.at("records")) results[idx].push_back(record_from_json(jr));
                return;
            }
            const std::uint64_t run_seed = derive_seed(spec.seed, job.n, job.iteration);
            const Dataset data = dgp->generate(job.n, derive_seed(run_seed, 1));
            CrossEstConfig cfg;
            cfg.k = spec.k;
            cfg.seed = run_seed;
            cfg.direction = Direction::Max;
            cfg.threads = 1;  // parallelism lives at the iteration level
            const CvReport report = run_analysis(data, cfg);
            results[idx] = evaluate_run(report, *dgp, job.n);
            nlohmann::json j;
            j["schema"] = "mixtree-checkpoint-v1";
            j["n"] = job.n;
            j["iteration"] = job.iteration;
            nlohmann::json recs = nlohmann::json::array();
            for (const EvalRecord& r : results[idx]) recs.push_back(record_json(r, job.iteration));
            j["records"] = recs;
            write_file_atomic(path, j.dump() + "\n");
        };

        const int threads = std::max(1, spec.threads);
        if (threads == 1) {
            for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t) {
                pool.emplace_back([&]() {
                    for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
                        run_job(i);
                    }
                });
            }
            for (auto& th : pool) th.join();
        }

        // Long-format metrics.
        std::ostringstream metrics;
        metrics << "n,iteration,estimator,target,metric,value\n";
        auto emit = [&](const Job& job, const EvalRecord& r, const std::string& metric, double value) {
            metrics << job.n << ',' << job.iteration << ',' << estimator_name(r.estimator) << ','
                    << truth_name(r.target) << ',' << metric << ',';
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.10g", value);
            metrics << buf << '\n';
        };
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            for (const EvalRecord& r : results[i]) {
                emit(jobs[i], r, "estimate", r.estimate);
                emit(jobs[i], r, "truth", r.truth);
                emit(jobs[i], r, "bias", r.bias);
                emit(jobs[i], r, "sqrt_n_bias", r.sqrt_n_bias);
                emit(jobs[i], r, "variance", r.variance);
                emit(jobs[i], r, "n_mse", r.n_mse);
                emit(jobs[i], r, "covered", r.covered ? 1.0 : 0.0);
                emit(jobs[i], r, "no_discovery", r.no_discovery ? 1.0 : 0.0);
                emit(jobs[i], r, "tp", static_cast<double>(r.tp));
                emit(jobs[i], r, "tn", static_cast<double>(r.tn));
                emit(jobs[i], r, "fp", static_cast<double>(r.fp));
                emit(jobs[i], r, "fn", static_cast<double>(r.fn));
            }
        }
        write_file_atomic(dir / "metrics.csv", metrics.str());

        // Per-n, per-estimator, per-target aggregates.
        nlohmann::json summary;
        summary["schema"] = "mixtree-sim-summary-v1";
        summary["dgp"] = spec.dgp;
        summary["seed"] = spec.seed;
        summary["k"] = spec.k;
        summary["iterations"] = spec.iterations;
        summary["psi_true"] = dgp->psi_true();
        summary["true_region"] = dgp->true_region().to_json();
        nlohmann::json rows = nlohmann::json::array();
        for (int n : spec.sample_sizes) {
            for (EstimatorKind e :
                 {EstimatorKind::PooledTmle, EstimatorKind::MeanKfold, EstimatorKind::Ivm}) {
                for (TruthKind t : {TruthKind::Oracle, TruthKind::DataAdaptive}) {
                    std::vector<double> snb, cov, tpr, tnr;
                    int found = 0, missing = 0;
                    for (std::size_t i = 0; i < jobs.size(); ++i) {
                        if (jobs[i].n != n) continue;
                        for (const EvalRecord& r : results[i]) {
                            if (r.estimator != e || r.target != t) continue;
                            if (r.no_discovery) {
                                missing++;
                                continue;
                            }
                            found++;
                            snb.push_back(r.sqrt_n_bias);
                            cov.push_back(r.covered ? 1.0 : 0.0);
                            if (r.tp + r.fn > 0) tpr.push_back(double(r.tp) / double(r.tp + r.fn));
                            if (r.tn + r.fp > 0) tnr.push_back(double(r.tn) / double(r.tn + r.fp));
                        }
                    }
                    nlohmann::json row;
                    row["n"] = n;
                    row["estimator"] = estimator_name(e);
                    row["target"] = truth_name(t);
                    row["iterations_used"] = found;
                    row["no_discovery"] = missing;
                    if (found > 0) {
                        Eigen::Map<Eigen::ArrayXd> a(snb.data(), snb.size());
                        const double mean_b = a.mean();
                        const double sd_b = snb.size() > 1 ? sd(a) : 0.0;
                        row["abs_bias"] = std::abs(mean_b);
                        row["sd"] = sd_b;
                        row["mse"] = mean_b * mean_b + sd_b * sd_b;
                        double c = 0.0;
                        for (double v : cov) c += v;
                        row["coverage"] = c / cov.size();
                        if (!tpr.empty()) {
                            double s = 0.0;
                            for (double v : tpr) s += v;
                            row["tpr"] = s / tpr.size();
                        }
                        if (!tnr.empty()) {
                            double s = 0.0;
                            for (double v : tnr) s += v;
                            row["tnr"] = s / tnr.size();
                        }
                    }
                    rows.push_back(std::move(row));
                }
            }
        }
        summary["rows"] = rows;
        write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");

        nlohmann::json manifest;
        manifest["schema"] = "mixtree-manifest-v1";
        manifest["command"] = "simulate";
        manifest["dgp"] = spec.dgp;
        manifest["sample_sizes"] = spec.sample_sizes;
        manifest["iterations"] = spec.iterations;
        manifest["k"] = spec.k;
        manifest["seed"] = spec.seed;
        manifest["threads"] = spec.threads;
        manifest["version"] = kVersion;
        write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "simulation failed: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace mixtree
