#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixtree {

// Affine map of the outcome onto [0,1], clamped into the open interval so the
// logistic fluctuation is well defined at the extremes.
class OutcomeScale {
public:
    static constexpr double kClampTol = 1e-4;

    OutcomeScale() = default;
    OutcomeScale(double y_min, double y_max);

    static OutcomeScale fit(const Eigen::VectorXd& y);

    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }
    double range() const { return y_max_ - y_min_; }

    // (y - y_min)/(y_max - y_min), clamped to [tol, 1-tol]. Values outside the
    // fitted range are clamped; a warning is recorded per call when that happens.
    Eigen::VectorXd scale(const Eigen::VectorXd& y, std::vector<std::string>* warnings = nullptr) const;
    Eigen::VectorXd unscale(const Eigen::VectorXd& s) const;
    double unscale_difference(double scaled_diff) const { return scaled_diff * range(); }

private:
    double y_min_ = 0.0;
    double y_max_ = 1.0;
};

}  // namespace mixtree
