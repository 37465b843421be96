#pragma once

#include "mixtree/learner.hpp"

#include <Eigen/Dense>

namespace mixtree {

struct GlmOptions {
    bool intercept = true;
    int max_iter = 100;
    double tol = 1e-10;
    double ridge = 0.0;  // applied to the normal equations when > 0
};

// Linear / logistic regression. Identity solves weighted least squares;
// logistic runs IRLS with an optional fixed offset. Near-singular designs are
// refit with a small ridge; separation triggers the same stabilization.
class GlmModel : public Model {
public:
    Family family() const override { return family_; }
    Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const override;

    // Intercept first when fitted with one.
    const Eigen::VectorXd& coefficients() const { return beta_; }
    bool has_intercept() const { return intercept_; }

    friend GlmModel fit_glm(const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::VectorXd*,
                            Family, const Eigen::VectorXd*, const GlmOptions&);

private:
    Family family_ = Family::Identity;
    bool intercept_ = true;
    Eigen::VectorXd beta_;
};

GlmModel fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const Eigen::VectorXd* offset, Family family,
                 const Eigen::VectorXd* weights = nullptr, const GlmOptions& options = {});

}  // namespace mixtree
