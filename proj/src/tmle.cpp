#include "mixtree/tmle.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"

#include <cmath>

namespace mixtree {

namespace {

constexpr double kQClamp = 1e-4;

Eigen::MatrixXd q_design(const Eigen::VectorXd& indicator, const Eigen::MatrixXd& w) {
    Eigen::MatrixXd x(w.rows(), w.cols() + 1);
    x.col(0) = indicator;
    if (w.cols() > 0) x.rightCols(w.cols()) = w;
    return x;
}

}  // namespace

NuisanceFits fit_nuisance(const Dataset& train, const Eigen::VectorXd& indicator,
                          const NuisanceConfig& config, const OutcomeScale& scale, Rng& rng) {
    const int n = train.n();
    if (indicator.size() != n) throw ConfigError("fit_nuisance: indicator length mismatch");
    const double ones = indicator.sum();
    if (ones <= 0.0 || ones >= n) {
        throw PositivityError("region indicator has a single class on the training sample");
    }

    NuisanceFits fits;
    fits.g_min = config.g_min;
    const Eigen::VectorXd y_scaled = scale.scale(train.y, &fits.warnings);

    SuperLearnerModel q = super_learn(config.q_library, q_design(indicator, train.w), y_scaled,
                                      nullptr, &train.weights, config.inner_folds, config.mode, rng);
    for (const auto& msg : q.warnings()) fits.warnings.push_back("Q: " + msg);
    fits.q_model = std::make_shared<SuperLearnerModel>(std::move(q));

    SuperLearnerModel g = super_learn(config.g_library, train.w, indicator, nullptr, &train.weights,
                                      config.inner_folds, config.mode, rng);
    for (const auto& msg : g.warnings()) fits.warnings.push_back("g: " + msg);
    fits.g_model = std::make_shared<SuperLearnerModel>(std::move(g));
    return fits;
}

Eigen::VectorXd clever_covariate(const Eigen::VectorXd& indicator, const Eigen::VectorXd& g1) {
    return (indicator.array() / g1.array() - (1.0 - indicator.array()) / (1.0 - g1.array())).matrix();
}

double fluctuate(const Eigen::VectorXd& q_scaled, const Eigen::VectorXd& h,
                 const Eigen::VectorXd& y_scaled, std::vector<std::string>* warnings) {
    if (h.cwiseAbs().maxCoeff() < 1e-12) return 0.0;  // degenerate covariate: no update
    const Eigen::ArrayXd offset = logit(clamp01(q_scaled.array(), kQClamp));
    double eps = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::ArrayXd mu = expit(offset + eps * h.array());
        const double score = (h.array() * (y_scaled.array() - mu)).sum();
        const double info = (h.array().square() * mu * (1.0 - mu)).sum();
        if (!(info > 1e-12)) break;
        const double step = score / info;
        eps += step;
        if (!std::isfinite(eps)) {
            if (warnings != nullptr) warnings->push_back("fluctuation diverged; epsilon set to 0");
            return 0.0;
        }
        if (std::abs(step) < 1e-12) return eps;
    }
    if (warnings != nullptr) warnings->push_back("fluctuation did not converge; epsilon set to 0");
    return 0.0;
}

Eigen::VectorXd fluctuation_update(const Eigen::VectorXd& q_scaled, const Eigen::VectorXd& h,
                                   double epsilon) {
    return expit(logit(clamp01(q_scaled.array(), kQClamp)) + epsilon * h.array()).matrix();
}

TmleResult tmle_estimate(const Dataset& est, const Eigen::VectorXd& indicator,
                         const NuisanceFits& nuisance, const OutcomeScale& scale) {
    const int n = est.n();
    if (indicator.size() != n) throw ConfigError("tmle_estimate: indicator length mismatch");

    TmleResult res;
    res.indicator = indicator;
    res.y_scaled = scale.scale(est.y, &res.warnings);

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(n);
    res.q_obs = clamp01(nuisance.q_model->predict(q_design(indicator, est.w)).array(), kQClamp);
    res.q1 = clamp01(nuisance.q_model->predict(q_design(ones, est.w)).array(), kQClamp);
    res.q0 = clamp01(nuisance.q_model->predict(q_design(zeros, est.w)).array(), kQClamp);

    const Eigen::ArrayXd g_raw = nuisance.g_model->predict(est.w).array();
    res.g1 = clamp01(g_raw, nuisance.g_min);
    res.truncation_fraction =
        static_cast<double>((g_raw < nuisance.g_min).count() + (g_raw > 1.0 - nuisance.g_min).count()) / n;

    const Eigen::VectorXd h = clever_covariate(indicator, res.g1);
    res.epsilon = fluctuate(res.q_obs, h, res.y_scaled, &res.warnings);

    const Eigen::VectorXd qstar_obs = fluctuation_update(res.q_obs, h, res.epsilon);
    res.qstar1 = fluctuation_update(res.q1, (1.0 / res.g1.array()).matrix(), res.epsilon);
    res.qstar0 = fluctuation_update(res.q0, (-1.0 / (1.0 - res.g1.array())).matrix(), res.epsilon);

    const double psi_scaled = (res.qstar1 - res.qstar0).mean();
    res.psi = scale.unscale_difference(psi_scaled);
    res.ic = scale.range() *
             (h.array() * (res.y_scaled.array() - qstar_obs.array()) +
              (res.qstar1.array() - res.qstar0.array()) - psi_scaled);
    res.se = std::sqrt(res.ic.squaredNorm()) / n;
    res.ci95 = {res.psi - 1.96 * res.se, res.psi + 1.96 * res.se};
    res.p_value = res.se > 0.0 ? normal_p_value(res.psi / res.se) : (res.psi == 0.0 ? 1.0 : 0.0);
    return res;
}

}  // namespace mixtree
