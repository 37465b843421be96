#pragma once

#include "mixtree/learner.hpp"

#include <Eigen/Dense>

#include <vector>

namespace mixtree {

// Internals of the fitted path, kept for diagnostics and the KKT checks.
struct LassoInternals {
    std::vector<int> kept;        // original column indices that were not constant
    Eigen::VectorXd col_means;    // weighted means of kept columns
    Eigen::VectorXd col_sds;      // weighted sds of kept columns
    Eigen::VectorXd beta_std;     // coefficients on the standardized problem
    double lambda = 0.0;
    double penalty_mix = 1.0;
    Eigen::VectorXd lambda_grid;  // positive, descending
    Eigen::VectorXd cv_mean_risk;
    Eigen::VectorXd cv_se_risk;
};

// Elastic-net penalized GLM fit by coordinate descent over a lambda path,
// with inner-CV selection of lambda by the one-standard-error rule.
class PenalizedGlmModel : public Model {
public:
    Family family() const override { return family_; }
    Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const override;

    double intercept() const { return intercept_; }
    // Original-scale coefficients, one per input column.
    const Eigen::VectorXd& coefficients() const { return beta_; }
    std::vector<int> nonzero() const;
    // True when no column earned a nonzero coefficient at the selected lambda.
    bool intercept_only() const { return nonzero().empty(); }

    const LassoInternals& internals() const { return internals_; }

    friend struct LassoAccess;

private:
    Family family_ = Family::Identity;
    double intercept_ = 0.0;
    Eigen::VectorXd beta_;
    LassoInternals internals_;
};

// CV-selected fit (the library-facing entry point).
PenalizedGlmModel fit_penalized_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const LearnerSpec& spec, const Eigen::VectorXd* offset,
                                    const Eigen::VectorXd* weights, Rng& rng);

// Fixed-lambda fit (no CV); used by tests and by coefficient-only refits.
PenalizedGlmModel fit_penalized_glm_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                       const LearnerSpec& spec, double lambda,
                                       const Eigen::VectorXd* offset = nullptr,
                                       const Eigen::VectorXd* weights = nullptr);

// Max violation of the elastic-net stationarity conditions on the
// standardized problem (identity family); ~0 at a solution.
double lasso_kkt_violation(const PenalizedGlmModel& model, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, const Eigen::VectorXd* offset = nullptr,
                           const Eigen::VectorXd* weights = nullptr);

}  // namespace mixtree
