#pragma once

#include "mixtree/learner.hpp"
#include "mixtree/region.hpp"
#include "mixtree/rng.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace mixtree {

enum class Direction { Max, Min };

struct RuleEnsembleConfig {
    int n_trees = 50;  // half bagged, half boosted
    int max_depth = 3;
    int min_leaf = 10;
    double alpha = 0.01;  // split gate; keeps noise targets from spawning rules
    bool bonferroni = true;
    double subsample = 0.7;
    double feature_fraction = 0.8;
    double shrinkage = 0.1;  // boosted half
    int max_vars = 3;
    LearnerSpec selector = lasso_spec();
};

// A rule surviving (or entering) lasso selection.
struct RuleCandidate {
    RectRegion region;
    int origin_tree = -1;
    double coefficient = 0.0;
    int covered = 0;  // training rows satisfying the rule
};

// Grow a shallow-tree ensemble on the exposures against the (backfit residual)
// target and emit every node's path conjunction, deduplicated by canonical
// string. An empty result signals no exposure signal.
std::vector<RuleCandidate> generate_candidate_rules(const Eigen::MatrixXd& a,
                                                    const Eigen::VectorXd& target,
                                                    const std::vector<std::string>& names,
                                                    const RuleEnsembleConfig& config, Rng& rng);

// Lasso over the rule indicator matrix; returns the candidates with nonzero
// coefficients (coefficient attached). Intercept-only fits return empty.
std::vector<RuleCandidate> select_rules(const std::vector<RuleCandidate>& candidates,
                                        const Eigen::MatrixXd& a, const Eigen::VectorXd& target,
                                        const std::vector<std::string>& names,
                                        const RuleEnsembleConfig& config, Rng& rng);

// Keep one rule per varset: the largest (direction max) or smallest
// (direction min) coefficient; ties break on covered count, then canonical
// string.
std::map<std::string, RuleCandidate> best_rule_per_varset(const std::vector<RuleCandidate>& selected,
                                                          Direction direction);

}  // namespace mixtree
