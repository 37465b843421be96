#include "mixtree/lasso.hpp"

#include "mixtree/error.hpp"
#include "mixtree/folds.hpp"
#include "mixtree/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixtree {

namespace {

constexpr double kSdFloor = 1e-12;
constexpr double kIrlsWeightFloor = 1e-5;

struct Standardized {
    Eigen::MatrixXd x;  // kept columns, weighted mean 0 / sd 1
    std::vector<int> kept;
    Eigen::VectorXd means, sds;
};

Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
    const int n = static_cast<int>(x.rows());
    const double wsum = w.sum();
    Standardized s;
    std::vector<double> means, sds;
    for (int j = 0; j < x.cols(); ++j) {
        const double m = (w.array() * x.col(j).array()).sum() / wsum;
        const double v = (w.array() * (x.col(j).array() - m).square()).sum() / wsum;
        const double sd = std::sqrt(v);
        if (sd > kSdFloor) {
            s.kept.push_back(j);
            means.push_back(m);
            sds.push_back(sd);
        }
    }
    const int p = static_cast<int>(s.kept.size());
    s.x.resize(n, p);
    s.means.resize(p);
    s.sds.resize(p);
    for (int k = 0; k < p; ++k) {
        s.means[k] = means[k];
        s.sds[k] = sds[k];
        s.x.col(k) = (x.col(s.kept[k]).array() - means[k]) / sds[k];
    }
    return s;
}

// One elastic-net solve at fixed lambda by cyclic coordinate descent on the
// standardized problem: (1/2n) sum w r^2 + lambda (mix |b|_1 + (1-mix)/2 |b|_2^2).
// `resid` is maintained as y_work - X beta.
void coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, double lambda, double mix,
                        Eigen::VectorXd& beta, Eigen::VectorXd& resid, double tol) {
    const int p = static_cast<int>(x.cols());
    const double n = static_cast<double>(x.rows());
    Eigen::VectorXd col_norm(p);
    for (int j = 0; j < p; ++j) col_norm[j] = (w.array() * x.col(j).array().square()).sum() / n;

    const double l1 = lambda * mix;
    const double l2 = lambda * (1.0 - mix);
    for (int sweep = 0; sweep < 10000; ++sweep) {
        double max_delta = 0.0;
        for (int j = 0; j < p; ++j) {
            const double old = beta[j];
            const double rho = (w.array() * x.col(j).array() * resid.array()).sum() / n + col_norm[j] * old;
            const double next = soft_threshold(rho, l1) / (col_norm[j] + l2);
            if (next != old) {
                resid -= x.col(j) * (next - old);
                beta[j] = next;
                max_delta = std::max(max_delta, std::abs(next - old));
            }
        }
        if (max_delta < tol) break;
    }
}

struct PathFit {
    Standardized std;
    double y_center = 0.0;                 // weighted mean of the working response
    std::vector<Eigen::VectorXd> betas;    // standardized scale, per lambda
    std::vector<double> intercepts_std;    // binomial working intercept per lambda
};

Eigen::VectorXd make_grid(double lambda_max, int n_lambda, double min_ratio) {
    Eigen::VectorXd grid(n_lambda);
    const double lo = std::log(lambda_max * min_ratio);
    const double hi = std::log(lambda_max);
    for (int i = 0; i < n_lambda; ++i) {
        grid[i] = std::exp(hi + (lo - hi) * i / (n_lambda - 1));
    }
    return grid;
}

double gaussian_lambda_max(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y_c,
                           const Eigen::VectorXd& w, double mix) {
    const double n = static_cast<double>(x_std.rows());
    double m = 0.0;
    for (int j = 0; j < x_std.cols(); ++j) {
        m = std::max(m, std::abs((w.array() * x_std.col(j).array() * y_c.array()).sum() / n));
    }
    return m / std::max(mix, 1e-3);
}

// Gaussian path at the given grid with warm starts.
PathFit fit_path_gaussian(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_work,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& grid, double mix) {
    PathFit fit;
    fit.std = standardize(x, w);
    const double wsum = w.sum();
    fit.y_center = (w.array() * y_work.array()).sum() / wsum;
    Eigen::VectorXd y_c = y_work.array() - fit.y_center;
    const double tol = 1e-9 * std::max(1.0, std::sqrt((w.array() * y_c.array().square()).sum() / wsum));

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(fit.std.x.cols());
    Eigen::VectorXd resid = y_c;
    for (int i = 0; i < grid.size(); ++i) {
        coordinate_descent(fit.std.x, w, grid[i], mix, beta, resid, tol);
        fit.betas.push_back(beta);
        fit.intercepts_std.push_back(0.0);
    }
    return fit;
}

// Binomial path: IRLS outer loop around weighted gaussian coordinate descent.
PathFit fit_path_binomial(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd* offset, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& grid, double mix) {
    PathFit fit;
    fit.std = standardize(x, w);
    const Eigen::MatrixXd& xs = fit.std.x;
    const int p = static_cast<int>(xs.cols());

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double a0 = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        for (int outer = 0; outer < 30; ++outer) {
            Eigen::VectorXd eta = xs * beta;
            eta.array() += a0;
            if (offset != nullptr) eta += *offset;
            Eigen::ArrayXd mu = clamp01(expit(eta.array()), 1e-8);
            Eigen::ArrayXd irls_w = (w.array() * mu * (1.0 - mu)).max(kIrlsWeightFloor);
            Eigen::ArrayXd eta_lin = eta.array();
            if (offset != nullptr) eta_lin -= offset->array();
            Eigen::VectorXd z =
                eta_lin + (y.array() - mu) / (mu * (1.0 - mu)).max(kIrlsWeightFloor);
            const Eigen::VectorXd wk = irls_w.matrix();
            const double a0_new = (wk.array() * (z - xs * beta).array()).sum() / wk.sum();
            Eigen::VectorXd z_c = z.array() - a0_new;
            Eigen::VectorXd resid = z_c - xs * beta;
            Eigen::VectorXd beta_prev = beta;
            coordinate_descent(xs, wk, grid[i], mix, beta, resid, 1e-8);
            a0 = a0_new;
            if ((beta - beta_prev).cwiseAbs().maxCoeff() < 1e-8) break;
        }
        fit.betas.push_back(beta);
        fit.intercepts_std.push_back(a0);
    }
    return fit;
}

PathFit fit_path(Family family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const Eigen::VectorXd* offset, const Eigen::VectorXd& w, const Eigen::VectorXd& grid,
                 double mix) {
    if (family == Family::Identity) {
        Eigen::VectorXd y_work = (offset != nullptr) ? (y - *offset).eval() : y;
        return fit_path_gaussian(x, y_work, w, grid, mix);
    }
    return fit_path_binomial(x, y, offset, w, grid, mix);
}

// Response-scale predictions for one path point.
Eigen::VectorXd path_predict(Family family, const PathFit& fit, int point, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd* offset) {
    const int n = static_cast<int>(x.rows());
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, fit.intercepts_std[point] + fit.y_center);
    const auto& beta = fit.betas[point];
    for (int k = 0; k < static_cast<int>(fit.std.kept.size()); ++k) {
        if (beta[k] != 0.0) {
            eta += (x.col(fit.std.kept[k]).array() - fit.std.means[k]).matrix() * (beta[k] / fit.std.sds[k]);
        }
    }
    if (offset != nullptr) eta += *offset;
    if (family == Family::Logistic) return expit(eta.array()).matrix();
    return eta;
}

}  // namespace

struct LassoAccess {
    static PenalizedGlmModel finalize(Family family, const LearnerSpec& spec, const PathFit& fit,
                                      int point, int n_cols, const Eigen::VectorXd& grid) {
        PenalizedGlmModel model;
        model.family_ = family;
        model.beta_ = Eigen::VectorXd::Zero(n_cols);
        double intercept = fit.intercepts_std[point] + fit.y_center;
        const auto& beta = fit.betas[point];
        for (int k = 0; k < static_cast<int>(fit.std.kept.size()); ++k) {
            const double b = beta[k] / fit.std.sds[k];
            model.beta_[fit.std.kept[k]] = b;
            intercept -= b * fit.std.means[k];
        }
        model.intercept_ = intercept;
        model.internals_.kept = fit.std.kept;
        model.internals_.col_means = fit.std.means;
        model.internals_.col_sds = fit.std.sds;
        model.internals_.beta_std = beta;
        model.internals_.lambda = grid[point];
        model.internals_.penalty_mix = spec.penalty_mix;
        model.internals_.lambda_grid = grid;
        return model;
    }

    static void set_cv(PenalizedGlmModel& model, Eigen::VectorXd mean_risk, Eigen::VectorXd se_risk) {
        model.internals_.cv_mean_risk = std::move(mean_risk);
        model.internals_.cv_se_risk = std::move(se_risk);
    }
};

Eigen::VectorXd PenalizedGlmModel::predict_link(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd eta = x * beta_;
    eta.array() += intercept_;
    return eta;
}

std::vector<int> PenalizedGlmModel::nonzero() const {
    std::vector<int> nz;
    for (int j = 0; j < beta_.size(); ++j) {
        if (beta_[j] != 0.0) nz.push_back(j);
    }
    return nz;
}

PenalizedGlmModel fit_penalized_glm_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                       const LearnerSpec& spec, double lambda,
                                       const Eigen::VectorXd* offset, const Eigen::VectorXd* weights) {
    const int n = static_cast<int>(y.size());
    Eigen::VectorXd w = (weights != nullptr) ? *weights : Eigen::VectorXd::Ones(n);
    w *= n / w.sum();
    Eigen::VectorXd grid(1);
    grid[0] = lambda;
    PathFit fit = fit_path(spec.family, x, y, offset, w, grid, spec.penalty_mix);
    return LassoAccess::finalize(spec.family, spec, fit, 0, static_cast<int>(x.cols()), grid);
}

PenalizedGlmModel fit_penalized_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const LearnerSpec& spec, const Eigen::VectorXd* offset,
                                    const Eigen::VectorXd* weights, Rng& rng) {
    spec.validate();
    const int n = static_cast<int>(y.size());
    if (x.rows() != n) throw ConfigError("fit_penalized_glm: design row count mismatch");
    if (n < 5) throw ConfigError("fit_penalized_glm: need n >= 5 for inner CV");

    Eigen::VectorXd w = (weights != nullptr) ? *weights : Eigen::VectorXd::Ones(n);
    w *= n / w.sum();

    // Lambda grid from the full data (gaussian scale also anchors the binomial
    // grid via the working response at beta = 0).
    Standardized full_std = standardize(x, w);
    if (full_std.kept.empty()) {
        Eigen::VectorXd grid = make_grid(1.0, spec.n_lambda, spec.lambda_min_ratio);
        PathFit fit = fit_path(spec.family, x, y, offset, w, grid.head(1), spec.penalty_mix);
        return LassoAccess::finalize(spec.family, spec, fit, 0, static_cast<int>(x.cols()), grid.head(1));
    }
    Eigen::VectorXd y_work = (offset != nullptr) ? (y - *offset).eval() : y;
    const double center = (w.array() * y_work.array()).sum() / w.sum();
    const double lambda_max =
        gaussian_lambda_max(full_std.x, (y_work.array() - center).matrix(), w, spec.penalty_mix);
    if (lambda_max <= 0.0) {
        Eigen::VectorXd grid(1);
        grid[0] = 1.0;
        PathFit fit = fit_path(spec.family, x, y, offset, w, grid, spec.penalty_mix);
        return LassoAccess::finalize(spec.family, spec, fit, 0, static_cast<int>(x.cols()), grid);
    }
    const Eigen::VectorXd grid = make_grid(lambda_max * 1.000001, spec.n_lambda, spec.lambda_min_ratio);

    // Inner CV over the shared grid.
    const int v = std::min(spec.inner_folds, n);
    FoldSpec folds = kfold_split(n, v, derive_seed(rng.engine()(), 17));
    Eigen::MatrixXd fold_risk(v, grid.size());
    for (int f = 0; f < v; ++f) {
        const std::vector<int> tr = folds.complement_rows(f);
        const std::vector<int> va = folds.fold_rows(f);
        Eigen::MatrixXd x_tr(tr.size(), x.cols());
        Eigen::VectorXd y_tr(tr.size()), w_tr(tr.size());
        Eigen::VectorXd off_tr;
        if (offset != nullptr) off_tr.resize(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
            x_tr.row(i) = x.row(tr[i]);
            y_tr[i] = y[tr[i]];
            w_tr[i] = w[tr[i]];
            if (offset != nullptr) off_tr[i] = (*offset)[tr[i]];
        }
        Eigen::MatrixXd x_va(va.size(), x.cols());
        Eigen::VectorXd y_va(va.size()), w_va(va.size());
        Eigen::VectorXd off_va;
        if (offset != nullptr) off_va.resize(va.size());
        for (std::size_t i = 0; i < va.size(); ++i) {
            x_va.row(i) = x.row(va[i]);
            y_va[i] = y[va[i]];
            w_va[i] = w[va[i]];
            if (offset != nullptr) off_va[i] = (*offset)[va[i]];
        }
        PathFit fit = fit_path(spec.family, x_tr, y_tr, offset != nullptr ? &off_tr : nullptr, w_tr,
                               grid, spec.penalty_mix);
        for (int i = 0; i < grid.size(); ++i) {
            Eigen::VectorXd pred =
                path_predict(spec.family, fit, i, x_va, offset != nullptr ? &off_va : nullptr);
            fold_risk(f, i) = (w_va.array() * (y_va - pred).array().square()).sum() / w_va.sum();
        }
    }

    Eigen::VectorXd mean_risk = fold_risk.colwise().mean();
    Eigen::VectorXd se_risk(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        se_risk[i] = std::sqrt(variance(fold_risk.col(i).array()) / v);
    }
    int best = 0;
    for (int i = 1; i < grid.size(); ++i) {
        if (mean_risk[i] < mean_risk[best]) best = i;
    }
    // One-standard-error rule: the sparsest model within one SE of the best.
    int chosen = best;
    const double bar = mean_risk[best] + se_risk[best];
    for (int i = 0; i <= best; ++i) {
        if (mean_risk[i] <= bar) {
            chosen = i;
            break;
        }
    }

    PathFit fit = fit_path(spec.family, x, y, offset, w, grid, spec.penalty_mix);
    PenalizedGlmModel model = LassoAccess::finalize(spec.family, spec, fit, chosen, static_cast<int>(x.cols()), grid);
    LassoAccess::set_cv(model, std::move(mean_risk), std::move(se_risk));
    return model;
}

double lasso_kkt_violation(const PenalizedGlmModel& model, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, const Eigen::VectorXd* offset,
                           const Eigen::VectorXd* weights) {
    const int n = static_cast<int>(y.size());
    Eigen::VectorXd w = (weights != nullptr) ? *weights : Eigen::VectorXd::Ones(n);
    w *= n / w.sum();
    const auto& info = model.internals();
    Eigen::VectorXd y_work = (offset != nullptr) ? (y - *offset).eval() : y;
    const double center = (w.array() * y_work.array()).sum() / w.sum();
    Eigen::VectorXd resid = (y_work.array() - center).matrix();
    Eigen::MatrixXd x_std(n, info.kept.size());
    for (int k = 0; k < static_cast<int>(info.kept.size()); ++k) {
        x_std.col(k) = (x.col(info.kept[k]).array() - info.col_means[k]) / info.col_sds[k];
    }
    resid -= x_std * info.beta_std;
    const double l1 = info.lambda * info.penalty_mix;
    const double l2 = info.lambda * (1.0 - info.penalty_mix);
    double worst = 0.0;
    for (int k = 0; k < static_cast<int>(info.kept.size()); ++k) {
        const double g = (w.array() * x_std.col(k).array() * resid.array()).sum() / n;
        const double b = info.beta_std[k];
        if (b == 0.0) {
            worst = std::max(worst, std::abs(g) - l1);
        } else {
            worst = std::max(worst, std::abs(g - (l1 * (b > 0 ? 1.0 : -1.0) + l2 * b)));
        }
    }
    return worst;
}

}  // namespace mixtree
