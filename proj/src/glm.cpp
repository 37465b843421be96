#include "mixtree/glm.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"

#include <cmath>

namespace mixtree {

namespace {

constexpr double kRidge = 1e-6;
constexpr double kSeparationBound = 30.0;  // |logit| beyond this is numerically 0/1
constexpr double kMuFloor = 1e-10;

Eigen::MatrixXd build_design(const Eigen::MatrixXd& x, bool intercept) {
    if (!intercept) return x;
    Eigen::MatrixXd d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    if (x.cols() > 0) d.rightCols(x.cols()) = x;
    return d;
}

Eigen::VectorXd solve_normal(const Eigen::MatrixXd& xtwx, const Eigen::VectorXd& xtwy, double ridge) {
    Eigen::MatrixXd m = xtwx;
    if (ridge > 0.0) m.diagonal().array() += ridge;
    return m.ldlt().solve(xtwy);
}

}  // namespace

Eigen::VectorXd GlmModel::predict_link(const Eigen::MatrixXd& x) const {
    return build_design(x, intercept_) * beta_;
}

GlmModel fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd* offset,
                 Family family, const Eigen::VectorXd* weights, const GlmOptions& options) {
    const int n = static_cast<int>(y.size());
    if (x.rows() != n) throw ConfigError("fit_glm: design row count mismatch");
    if (offset != nullptr && offset->size() != n) throw ConfigError("fit_glm: offset length mismatch");

    const Eigen::MatrixXd design = build_design(x, options.intercept);
    const int p = static_cast<int>(design.cols());
    if (p == 0) throw ConfigError("fit_glm: empty design with no intercept");
    const Eigen::VectorXd w = (weights != nullptr) ? *weights : Eigen::VectorXd::Ones(n);

    GlmModel model;
    model.family_ = family;
    model.intercept_ = options.intercept;

    if (family == Family::Identity) {
        Eigen::VectorXd target = (offset != nullptr) ? (y - *offset).eval() : y;
        const Eigen::MatrixXd xtwx = design.transpose() * w.asDiagonal() * design;
        const Eigen::VectorXd xtwy = design.transpose() * (w.array() * target.array()).matrix();
        Eigen::VectorXd beta = solve_normal(xtwx, xtwy, options.ridge);
        // Singular designs produce garbage from LDLT; verify the score and
        // fall back to a ridge solve.
        const double score = (xtwy - xtwx * beta).cwiseAbs().maxCoeff();
        const double scale = std::max(1.0, xtwy.cwiseAbs().maxCoeff());
        if (!beta.allFinite() || score > 1e-6 * scale) {
            beta = solve_normal(xtwx, xtwy, std::max(options.ridge, kRidge));
            model.warnings_.push_back("near-singular design; ridge-stabilized least squares");
        }
        model.beta_ = std::move(beta);
        return model;
    }

    // Logistic IRLS with fixed offset.
    double ridge = options.ridge;
    bool stabilized = ridge > 0.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd eta = (offset != nullptr) ? *offset : Eigen::VectorXd::Zero(n);
        bool converged = false;
        bool separated = false;
        for (int iter = 0; iter < options.max_iter; ++iter) {
            Eigen::ArrayXd mu = clamp01(expit(eta.array()), kMuFloor);
            Eigen::ArrayXd wirls = w.array() * mu * (1.0 - mu);
            Eigen::MatrixXd xtwx = design.transpose() * wirls.matrix().asDiagonal() * design;
            Eigen::VectorXd score = design.transpose() * (w.array() * (y.array() - mu)).matrix();
            if (ridge > 0.0) score -= ridge * beta;
            Eigen::VectorXd step = solve_normal(xtwx, score, std::max(ridge, 1e-12));
            if (!step.allFinite()) {
                separated = true;
                break;
            }
            beta += step;
            eta = design * beta;
            if (offset != nullptr) eta += *offset;
            if (beta.cwiseAbs().maxCoeff() > kSeparationBound && ridge <= 0.0) {
                separated = true;
                break;
            }
            if (step.cwiseAbs().maxCoeff() < options.tol) {
                converged = true;
                break;
            }
        }
        if (separated && !stabilized) {
            ridge = kRidge;
            stabilized = true;
            model.warnings_.push_back("separation detected; ridge-stabilized logistic refit");
            continue;
        }
        if (!converged && !stabilized) {
            throw NumericError("IRLS did not converge after " + std::to_string(options.max_iter) +
                               " iterations (last |beta|max = " + std::to_string(beta.cwiseAbs().maxCoeff()) +
                               ")");
        }
        if (!converged) {
            model.warnings_.push_back("ridge-stabilized IRLS stopped at the iteration cap");
        }
        model.beta_ = std::move(beta);
        return model;
    }
    throw NumericError("fit_glm: unreachable");
}

}  // namespace mixtree
