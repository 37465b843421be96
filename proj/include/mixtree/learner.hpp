#pragma once

#include "mixtree/rng.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace mixtree {

enum class Family { Identity, Logistic };

enum class LearnerKind { RegressionTree, Glm, PenalizedGlm, RandomForest };

// One entry of a learner library. Fields beyond `kind`/`family` are
// hyperparameters; unused ones are ignored by the other kinds.
struct LearnerSpec {
    LearnerKind kind = LearnerKind::Glm;
    Family family = Family::Identity;
    std::string name = "glm";

    // trees / forests
    int max_depth = 3;
    int min_leaf = 10;
    double alpha = 1.0;  // per-split significance gate; 1 disables
    bool bonferroni = false;
    int max_cuts = 255;
    int n_trees = 50;
    double feature_fraction = 1.0;
    double row_fraction = 1.0;
    bool bootstrap = true;

    // penalized glm
    double penalty_mix = 1.0;
    int n_lambda = 100;
    double lambda_min_ratio = 1e-3;
    int inner_folds = 5;

    void validate() const;
};

LearnerSpec glm_spec(Family family = Family::Identity);
LearnerSpec tree_spec(int max_depth, double alpha = 1.0, int min_leaf = 10);
LearnerSpec forest_spec(int n_trees = 50, int max_depth = 6, int min_leaf = 5);
LearnerSpec lasso_spec(Family family = Family::Identity);

// The default nuisance library: GLM, a depth-3 tree, a 50-tree random forest,
// and a lasso.
std::vector<LearnerSpec> default_library(Family family);

// Fitted regression model with a uniform predict contract. Predictions are on
// the response scale; the offset overloads add the offset on the link scale.
class Model {
public:
    virtual ~Model() = default;

    virtual Family family() const = 0;
    virtual Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const = 0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& offset) const;

    const std::vector<std::string>& warnings() const { return warnings_; }

protected:
    std::vector<std::string> warnings_;
};

// Dispatch on spec.kind. `offset` and `weights` may be null.
std::unique_ptr<Model> fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd* offset,
                                   const Eigen::VectorXd* weights, Rng& rng);

}  // namespace mixtree
