#include "mixtree/commands.hpp"
#include "mixtree/error.hpp"
#include "mixtree/report.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

std::vector<std::string> split_csv_arg(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exposure-region discovery with cross-estimated targeted effect estimates"};
    app.require_subcommand(1);

    // ---- analyze ----
    auto* analyze = app.add_subcommand("analyze", "Run the full pipeline on a CSV file");
    std::string config_path, input, output_dir, outcome, exposures, covariates, direction;
    std::string q_learners, g_learners, h_learners;
    int k = -1, max_iter = -1, threads = -1;
    double delta = -1, g_min = -1, stability = -1;
    long long seed = -1;
    bool no_joint = false, no_marginal = false;
    analyze->add_option("--config", config_path, "Flat key = value config file");
    analyze->add_option("--input", input, "Input CSV path");
    analyze->add_option("--output-dir", output_dir, "Output directory");
    analyze->add_option("--outcome", outcome, "Outcome column");
    analyze->add_option("--exposures", exposures, "Comma-separated exposure columns");
    analyze->add_option("--covariates", covariates, "Comma-separated covariate columns");
    analyze->add_option("--k", k, "Number of folds");
    analyze->add_option("--direction", direction, "max or min");
    analyze->add_option("--seed", seed, "Random seed");
    analyze->add_option("--delta", delta, "Backfit convergence tolerance");
    analyze->add_option("--max-iter", max_iter, "Backfit iteration cap");
    analyze->add_option("--g-min", g_min, "Propensity truncation bound");
    analyze->add_option("--stability-threshold", stability, "Highlight filter for the report");
    analyze->add_option("--threads", threads, "Fold workers");
    analyze->add_option("--q-learners", q_learners, "Outcome learner library");
    analyze->add_option("--g-learners", g_learners, "Propensity learner library");
    analyze->add_option("--h-learners", h_learners, "Covariate-side learner library");
    analyze->add_flag("--no-joint", no_joint, "Skip the joint (interaction) analysis");
    analyze->add_flag("--no-marginal", no_marginal, "Skip the marginal analysis");

    // ---- simulate ----
    auto* simulate = app.add_subcommand("simulate", "Run the benchmark harness");
    mixtree::SimulateSpec sim;
    std::string sizes = "200";
    simulate->add_option("--dgp", sim.dgp, "2d or 3d");
    simulate->add_option("--n", sizes, "Comma-separated sample sizes");
    simulate->add_option("--iterations", sim.iterations, "Iterations per sample size");
    simulate->add_option("--k", sim.k, "Folds per analysis");
    simulate->add_option("--seed", sim.seed, "Study seed");
    simulate->add_option("--output-dir", sim.output_dir, "Output directory");
    simulate->add_option("--threads", sim.threads, "Iteration workers");
    bool no_resume = false;
    simulate->add_flag("--no-resume", no_resume, "Ignore existing checkpoints");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) {
            mixtree::AnalysisConfig config;
            if (!config_path.empty()) config.apply(mixtree::parse_config_file(config_path));
            if (!input.empty()) config.input_csv = input;
            if (!output_dir.empty()) config.output_dir = output_dir;
            if (!outcome.empty()) config.roles.outcome = outcome;
            if (!exposures.empty()) config.roles.exposures = split_csv_arg(exposures);
            if (!covariates.empty()) config.roles.covariates = split_csv_arg(covariates);
            if (k > 0) config.cross.k = k;
            if (!direction.empty()) config.cross.direction = mixtree::direction_from_name(direction);
            if (seed >= 0) config.cross.seed = static_cast<std::uint64_t>(seed);
            if (delta >= 0) config.cross.delta = delta;
            if (max_iter > 0) config.cross.max_iter = max_iter;
            if (g_min >= 0) config.cross.g_min = g_min;
            if (stability >= 0) config.cross.stability_threshold = stability;
            if (threads > 0) config.cross.threads = threads;
            if (!q_learners.empty()) config.q_learners = q_learners;
            if (!g_learners.empty()) config.g_learners = g_learners;
            if (!h_learners.empty()) config.h_learners = h_learners;
            if (no_joint) config.cross.run_joint = false;
            if (no_marginal) config.cross.run_marginal = false;
            return mixtree::cmd_analyze(config);
        }
        sim.resume = !no_resume;
        sim.sample_sizes.clear();
        for (const std::string& tok : split_csv_arg(sizes)) sim.sample_sizes.push_back(std::stoi(tok));
        return mixtree::cmd_simulate(sim);
    } catch (const mixtree::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mixtree::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
