#include "mixtree/scaling.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"

namespace mixtree {

OutcomeScale::OutcomeScale(double y_min, double y_max) : y_min_(y_min), y_max_(y_max) {
    if (!(y_max > y_min)) throw NumericError("degenerate outcome: y_max must exceed y_min");
}

OutcomeScale OutcomeScale::fit(const Eigen::VectorXd& y) {
    if (y.size() == 0) throw NumericError("OutcomeScale::fit on empty outcome");
    return OutcomeScale(y.minCoeff(), y.maxCoeff());
}

Eigen::VectorXd OutcomeScale::scale(const Eigen::VectorXd& y, std::vector<std::string>* warnings) const {
    Eigen::ArrayXd s = (y.array() - y_min_) / range();
    if (warnings != nullptr && ((s < 0.0).any() || (s > 1.0).any())) {
        warnings->push_back("outcome values outside the fitted range were clamped");
    }
    return clamp01(s, kClampTol).matrix();
}

Eigen::VectorXd OutcomeScale::unscale(const Eigen::VectorXd& s) const {
    return (s.array() * range() + y_min_).matrix();
}

}  // namespace mixtree
