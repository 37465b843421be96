#pragma once

#include "mixtree/dataset.hpp"
#include "mixtree/learner.hpp"
#include "mixtree/rng.hpp"
#include "mixtree/scaling.hpp"
#include "mixtree/super_learner.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mixtree {

struct NuisanceConfig {
    std::vector<LearnerSpec> q_library = default_library(Family::Identity);
    std::vector<LearnerSpec> g_library = default_library(Family::Logistic);
    int inner_folds = 5;
    SlMode mode = SlMode::Discrete;
    double g_min = 0.025;  // propensity truncation bound
};

// Outcome regression Q (on the scaled outcome) and propensity g for a fixed
// region indicator, trained on a parameter-generating sample.
struct NuisanceFits {
    std::shared_ptr<Model> q_model;  // features [indicator, W] -> scaled outcome
    std::shared_ptr<Model> g_model;  // features W -> P(indicator = 1 | W)
    double g_min = 0.025;
    std::vector<std::string> warnings;
};

NuisanceFits fit_nuisance(const Dataset& train, const Eigen::VectorXd& indicator,
                          const NuisanceConfig& config, const OutcomeScale& scale, Rng& rng);

// H_i = 1{ind=1}/g1_i - 1{ind=0}/(1 - g1_i).
Eigen::VectorXd clever_covariate(const Eigen::VectorXd& indicator, const Eigen::VectorXd& g1);

// MLE of the single-coefficient, intercept-free logistic fluctuation of the
// scaled outcome on `h` with offset logit(q). Degenerate covariates (or a
// failed solve) yield 0 with a warning.
double fluctuate(const Eigen::VectorXd& q_scaled, const Eigen::VectorXd& h,
                 const Eigen::VectorXd& y_scaled, std::vector<std::string>* warnings = nullptr);

// expit(logit(q) + eps * h)
Eigen::VectorXd fluctuation_update(const Eigen::VectorXd& q_scaled, const Eigen::VectorXd& h,
                                   double epsilon);

// One region's targeted estimate on one estimation sample, plus the
// cross-estimated ingredients needed for pooled updates.
struct TmleResult {
    double psi = 0.0;       // outcome units
    double epsilon = 0.0;
    double se = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};
    double p_value = 1.0;
    Eigen::VectorXd ic;     // influence-curve values, outcome units
    double truncation_fraction = 0.0;
    // scaled per-row quantities on the estimation sample
    Eigen::VectorXd indicator, y_scaled, g1;
    Eigen::VectorXd q_obs, q1, q0;        // initial (pre-fluctuation)
    Eigen::VectorXd qstar1, qstar0;       // targeted counterfactuals
    std::vector<std::string> warnings;
};

TmleResult tmle_estimate(const Dataset& est, const Eigen::VectorXd& indicator,
                         const NuisanceFits& nuisance, const OutcomeScale& scale);

}  // namespace mixtree
