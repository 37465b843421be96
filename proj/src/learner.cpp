#include "mixtree/learner.hpp"

#include "mixtree/error.hpp"
#include "mixtree/forest.hpp"
#include "mixtree/glm.hpp"
#include "mixtree/lasso.hpp"
#include "mixtree/math.hpp"
#include "mixtree/tree.hpp"

namespace mixtree {

void LearnerSpec::validate() const {
    if (max_depth < 1) throw ConfigError("learner '" + name + "': max_depth must be >= 1");
    if (min_leaf < 2) throw ConfigError("learner '" + name + "': min_leaf must be >= 2");
    if (max_cuts < 1) throw ConfigError("learner '" + name + "': max_cuts must be >= 1");
    if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("learner '" + name + "': alpha must be in (0,1]");
    if (kind == LearnerKind::RandomForest && n_trees < 1) {
        throw ConfigError("learner '" + name + "': n_trees must be >= 1");
    }
    if (kind == LearnerKind::PenalizedGlm) {
        if (penalty_mix < 0.0 || penalty_mix > 1.0) {
            throw ConfigError("learner '" + name + "': penalty_mix must be in [0,1]");
        }
        if (n_lambda < 2 || lambda_min_ratio <= 0.0 || lambda_min_ratio >= 1.0) {
            throw ConfigError("learner '" + name + "': invalid lambda grid");
        }
        if (inner_folds < 2) throw ConfigError("learner '" + name + "': inner_folds must be >= 2");
    }
}

LearnerSpec glm_spec(Family family) {
    LearnerSpec s;
    s.kind = LearnerKind::Glm;
    s.family = family;
    s.name = "glm";
    return s;
}

LearnerSpec tree_spec(int max_depth, double alpha, int min_leaf) {
    LearnerSpec s;
    s.kind = LearnerKind::RegressionTree;
    s.name = "tree" + std::to_string(max_depth);
    s.max_depth = max_depth;
    s.alpha = alpha;
    s.min_leaf = min_leaf;
    return s;
}

LearnerSpec forest_spec(int n_trees, int max_depth, int min_leaf) {
    LearnerSpec s;
    s.kind = LearnerKind::RandomForest;
    s.name = "forest" + std::to_string(n_trees);
    s.n_trees = n_trees;
    s.max_depth = max_depth;
    s.min_leaf = min_leaf;
    s.feature_fraction = 1.0 / 3.0;
    return s;
}

LearnerSpec lasso_spec(Family family) {
    LearnerSpec s;
    s.kind = LearnerKind::PenalizedGlm;
    s.family = family;
    s.name = "lasso";
    return s;
}

std::vector<LearnerSpec> default_library(Family family) {
    std::vector<LearnerSpec> lib;
    lib.push_back(glm_spec(family));
    LearnerSpec tree = tree_spec(3, 1.0, 10);
    lib.push_back(tree);
    lib.push_back(forest_spec(50, 6, 5));
    lib.push_back(lasso_spec(family));
    return lib;
}

Eigen::VectorXd Model::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd link = predict_link(x);
    if (family() == Family::Logistic) return expit(link.array()).matrix();
    return link;
}

Eigen::VectorXd Model::predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& offset) const {
    Eigen::VectorXd link = predict_link(x) + offset;
    if (family() == Family::Logistic) return expit(link.array()).matrix();
    return link;
}

std::unique_ptr<Model> fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd* offset,
                                   const Eigen::VectorXd* weights, Rng& rng) {
    spec.validate();
    switch (spec.kind) {
        case LearnerKind::RegressionTree:
            return std::make_unique<TreeModel>(fit_regression_tree(x, y, offset, weights, spec));
        case LearnerKind::Glm:
            return std::make_unique<GlmModel>(fit_glm(x, y, offset, spec.family, weights));
        case LearnerKind::PenalizedGlm:
            return std::make_unique<PenalizedGlmModel>(fit_penalized_glm(x, y, spec, offset, weights, rng));
        case LearnerKind::RandomForest:
            return std::make_unique<ForestModel>(fit_random_forest(x, y, offset, weights, spec, rng));
    }
    throw ConfigError("fit_learner: unknown learner kind");
}

}  // namespace mixtree
