#pragma once

#include "mixtree/learner.hpp"
#include "mixtree/region.hpp"
#include "mixtree/rng.hpp"
#include "mixtree/rule_ensemble.hpp"
#include "mixtree/super_learner.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixtree {

struct BackfitConfig {
    double delta = 0.001;  // convergence: mean |combined prediction change|
    int max_iter = 10;
    int inner_folds = 5;
    SlMode sl_mode = SlMode::Discrete;
    std::vector<LearnerSpec> h_library = default_library(Family::Identity);
    RuleEnsembleConfig rules;                  // joint exposure side
    std::vector<LearnerSpec> marginal_trees;   // single-exposure side; default below

    static std::vector<LearnerSpec> default_marginal_trees();
};

struct BackfitDiagnostics {
    int iterations = 0;
    bool converged = false;
    double final_delta = 0.0;
    std::vector<double> deltas;    // combined-prediction change per iteration
    std::vector<double> f_deltas;  // per-side changes, for diagnostics
    std::vector<double> h_deltas;
    std::vector<double> train_mse;  // of f + h per iteration
    std::vector<std::string> warnings;
};

// Additive fit over the joint exposure space: f is a lasso over tree-ensemble
// rules, h a covariate Super Learner; the two sides alternate as offsets. The
// rule basis is generated from the residual after iteration 0 and then frozen;
// later iterations refit coefficients only.
struct JointBackfitResult {
    std::vector<RuleCandidate> selected_rules;  // nonzero rules with final coefficients
    Eigen::VectorXd f_hat;                      // exposure-side predictions on training rows
    Eigen::VectorXd h_hat;                      // covariate-side predictions on training rows
    BackfitDiagnostics diag;
};

JointBackfitResult backfit_joint(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& y, const std::vector<std::string>& a_names,
                                 const BackfitConfig& config, Rng& rng);

// Marginal variant: f is a Super Learner of single-exposure trees. Returns the
// terminal-leaf regions of the selected tree ordered by lower bound; the
// lowest region is the reference. Empty when no threshold was found.
struct MarginalRegion {
    RectRegion region;
    bool reference = false;
};

struct MarginalBackfitResult {
    std::vector<MarginalRegion> regions;
    BackfitDiagnostics diag;
};

MarginalBackfitResult backfit_marginal(const Eigen::VectorXd& a_col, const std::string& a_name,
                                       const Eigen::MatrixXd& w, const Eigen::VectorXd& y,
                                       const BackfitConfig& config, Rng& rng);

}  // namespace mixtree
