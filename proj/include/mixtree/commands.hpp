#pragma once

#include "mixtree/cross_estimation.hpp"
#include "mixtree/dataset.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mixtree {

// Flat key = value configuration document ('#' comments allowed).
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Learner library from a comma-separated token list: glm, treeD (depth D),
// forestN (N trees), lasso.
std::vector<LearnerSpec> parse_learners(const std::string& tokens, Family family);

struct AnalysisConfig {
    std::string input_csv;
    std::string output_dir = "mixtree_out";
    ColumnRoles roles;
    CrossEstConfig cross;
    std::string q_learners = "glm,tree3,forest50,lasso";
    std::string g_learners = "glm,tree3,forest50,lasso";
    std::string h_learners = "glm,tree3,forest50,lasso";

    // Populate from a parsed config file; unknown keys are rejected.
    void apply(const std::map<std::string, std::string>& kv);
};

struct SimulateSpec {
    std::string dgp = "2d";
    std::vector<int> sample_sizes{200};
    int iterations = 2;
    int k = 5;
    std::uint64_t seed = 1;
    std::string output_dir = "mixtree_sim";
    int threads = 1;
    bool resume = true;
};

// Exit codes: 0 success, 2 schema/config error, 3 analysis failure.
int cmd_analyze(const AnalysisConfig& config);
int cmd_simulate(const SimulateSpec& spec);

}  // namespace mixtree
