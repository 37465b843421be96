#include "mixtree/rule_ensemble.hpp"

#include "mixtree/error.hpp"
#include "mixtree/lasso.hpp"
#include "mixtree/tree.hpp"

#include <set>

namespace mixtree {

namespace {

LearnerSpec ensemble_tree_spec(const RuleEnsembleConfig& config) {
    LearnerSpec spec = tree_spec(config.max_depth, config.alpha, config.min_leaf);
    spec.bonferroni = config.bonferroni;
    spec.feature_fraction = config.feature_fraction;
    return spec;
}

}  // namespace

std::vector<RuleCandidate> generate_candidate_rules(const Eigen::MatrixXd& a,
                                                    const Eigen::VectorXd& target,
                                                    const std::vector<std::string>& names,
                                                    const RuleEnsembleConfig& config, Rng& rng) {
    const int n = static_cast<int>(a.rows());
    const LearnerSpec spec = ensemble_tree_spec(config);
    const int n_bagged = config.n_trees / 2 + config.n_trees % 2;

    std::vector<RuleCandidate> out;
    std::set<std::string> seen;
    auto harvest = [&](const TreeModel& tree, int tree_id) {
        for (RectRegion& region : tree.node_regions(names)) {
            if (static_cast<int>(region.clauses().size()) > config.max_vars) continue;
            std::string key = region.canonical();
            if (!seen.insert(key).second) continue;
            const Eigen::VectorXd ind = evaluate_region(region, a, names);
            const int covered = static_cast<int>(ind.sum());
            if (covered == 0 || covered == n) continue;
            RuleCandidate c;
            c.region = std::move(region);
            c.origin_tree = tree_id;
            c.covered = covered;
            out.push_back(std::move(c));
        }
    };

    for (int t = 0; t < n_bagged; ++t) {
        std::vector<int> rows = rng.subsample(n, config.subsample);
        harvest(fit_regression_tree(a, target, nullptr, nullptr, spec, &rng, &rows), t);
    }

    // Boosted half: shallow trees on shrunken residuals.
    Eigen::VectorXd resid = target.array() - target.mean();
    for (int t = n_bagged; t < config.n_trees; ++t) {
        std::vector<int> rows = rng.subsample(n, config.subsample);
        const TreeModel tree = fit_regression_tree(a, resid, nullptr, nullptr, spec, &rng, &rows);
        harvest(tree, t);
        if (tree.has_split()) resid -= config.shrinkage * tree.predict_link(a);
    }
    return out;
}

std::vector<RuleCandidate> select_rules(const std::vector<RuleCandidate>& candidates,
                                        const Eigen::MatrixXd& a, const Eigen::VectorXd& target,
                                        const std::vector<std::string>& names,
                                        const RuleEnsembleConfig& config, Rng& rng) {
    if (candidates.empty()) throw ConfigError("select_rules: no candidates");
    // Defensive dedup so selection is invariant to duplicated inputs.
    std::vector<const RuleCandidate*> unique;
    std::set<std::string> seen;
    for (const RuleCandidate& c : candidates) {
        if (seen.insert(c.region.canonical()).second) unique.push_back(&c);
    }

    const int n = static_cast<int>(a.rows());
    const int r = static_cast<int>(unique.size());
    Eigen::MatrixXd z(n, r);
    for (int j = 0; j < r; ++j) z.col(j) = evaluate_region(unique[j]->region, a, names);

    const PenalizedGlmModel fit = fit_penalized_glm(z, target, config.selector, nullptr, nullptr, rng);
    std::vector<RuleCandidate> selected;
    for (int j : fit.nonzero()) {
        RuleCandidate c = *unique[j];
        c.coefficient = fit.coefficients()[j];
        selected.push_back(std::move(c));
    }
    return selected;
}

std::map<std::string, RuleCandidate> best_rule_per_varset(const std::vector<RuleCandidate>& selected,
                                                          Direction direction) {
    std::map<std::string, RuleCandidate> best;
    for (const RuleCandidate& c : selected) {
        const std::string key = c.region.varset_key();
        auto it = best.find(key);
        if (it == best.end()) {
            best.emplace(key, c);
            continue;
        }
        const RuleCandidate& cur = it->second;
        const double a = (direction == Direction::Max) ? c.coefficient : -c.coefficient;
        const double b = (direction == Direction::Max) ? cur.coefficient : -cur.coefficient;
        bool take = false;
        if (a != b) {
            take = a > b;
        } else if (c.covered != cur.covered) {
            take = c.covered > cur.covered;
        } else {
            take = c.region.canonical() < cur.region.canonical();
        }
        if (take) it->second = c;
    }
    return best;
}

}  // namespace mixtree
