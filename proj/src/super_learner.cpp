#include "mixtree/super_learner.hpp"

#include "mixtree/error.hpp"
#include "mixtree/folds.hpp"
#include "mixtree/math.hpp"

#include <cmath>
#include <limits>

namespace mixtree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Non-negative least squares by cyclic projected coordinate descent.
Eigen::VectorXd nnls(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const int p = static_cast<int>(z.cols());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd resid = y;
    Eigen::VectorXd norms(p);
    for (int j = 0; j < p; ++j) norms[j] = (w.array() * z.col(j).array().square()).sum();
    for (int sweep = 0; sweep < 1000; ++sweep) {
        double max_delta = 0.0;
        for (int j = 0; j < p; ++j) {
            if (norms[j] <= 0.0) continue;
            const double grad = (w.array() * z.col(j).array() * resid.array()).sum();
            const double next = std::max(0.0, beta[j] + grad / norms[j]);
            if (next != beta[j]) {
                resid -= z.col(j) * (next - beta[j]);
                max_delta = std::max(max_delta, std::abs(next - beta[j]));
                beta[j] = next;
            }
        }
        if (max_delta < 1e-10) break;
    }
    return beta;
}

}  // namespace

Eigen::VectorXd SuperLearnerModel::predict_link(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd resp;
    if (mode_ == SlMode::Discrete) {
        resp = members_.front()->predict(x);
    } else {
        resp = Eigen::VectorXd::Zero(x.rows());
        for (std::size_t m = 0; m < members_.size(); ++m) {
            resp += weights_[member_index_[m]] * members_[m]->predict(x);
        }
    }
    if (family_ == Family::Logistic) {
        return logit(clamp01(resp.array(), 1e-6)).matrix();
    }
    return resp;
}

SuperLearnerModel super_learn(const std::vector<LearnerSpec>& library, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, const Eigen::VectorXd* offset,
                              const Eigen::VectorXd* weights, int v, SlMode mode, Rng& rng) {
    if (library.empty()) throw ConfigError("super_learn: empty library");
    if (v < 2) throw ConfigError("super_learn: need at least 2 inner folds");
    const int n = static_cast<int>(y.size());
    const int n_learners = static_cast<int>(library.size());
    const std::uint64_t base_seed = rng.engine()();

    SuperLearnerModel sl;
    sl.family_ = library.front().family;
    sl.mode_ = mode;
    for (const auto& spec : library) sl.names_.push_back(spec.name);

    const FoldSpec folds = kfold_split(n, std::min(v, n), derive_seed(base_seed, 0));
    const Eigen::VectorXd w = (weights != nullptr) ? *weights : Eigen::VectorXd::Ones(n);

    // Cross-validated response-scale predictions per member.
    Eigen::MatrixXd z(n, n_learners);
    std::vector<bool> failed(n_learners, false);
    for (int f = 0; f < folds.k; ++f) {
        const std::vector<int> tr = folds.complement_rows(f);
        const std::vector<int> va = folds.fold_rows(f);
        Eigen::MatrixXd x_tr(tr.size(), x.cols()), x_va(va.size(), x.cols());
        Eigen::VectorXd y_tr(tr.size()), w_tr(tr.size());
        Eigen::VectorXd off_tr, off_va;
        if (offset != nullptr) {
            off_tr.resize(tr.size());
            off_va.resize(va.size());
        }
        for (std::size_t i = 0; i < tr.size(); ++i) {
            x_tr.row(i) = x.row(tr[i]);
            y_tr[i] = y[tr[i]];
            w_tr[i] = w[tr[i]];
            if (offset != nullptr) off_tr[i] = (*offset)[tr[i]];
        }
        for (std::size_t i = 0; i < va.size(); ++i) {
            x_va.row(i) = x.row(va[i]);
            if (offset != nullptr) off_va[i] = (*offset)[va[i]];
        }
        for (int l = 0; l < n_learners; ++l) {
            if (failed[l]) continue;
            Rng member_rng(derive_seed(base_seed, 1 + l, f));
            try {
                auto fit = fit_learner(library[l], x_tr, y_tr, offset != nullptr ? &off_tr : nullptr,
                                       &w_tr, member_rng);
                Eigen::VectorXd pred = (offset != nullptr) ? fit->predict(x_va, off_va) : fit->predict(x_va);
                for (std::size_t i = 0; i < va.size(); ++i) z(va[i], l) = pred[i];
            } catch (const std::exception& e) {
                failed[l] = true;
                sl.warnings_.push_back("learner '" + library[l].name + "' dropped: " + e.what());
            }
        }
    }

    sl.cv_risks_.assign(n_learners, kInf);
    int best = -1;
    for (int l = 0; l < n_learners; ++l) {
        if (failed[l]) continue;
        sl.cv_risks_[l] = (w.array() * (y - z.col(l)).array().square()).sum() / w.sum();
        if (best < 0 || sl.cv_risks_[l] < sl.cv_risks_[best]) best = l;
    }
    if (best < 0) throw NumericError("super_learn: every library member failed");

    sl.weights_ = Eigen::VectorXd::Zero(n_learners);
    if (mode == SlMode::Discrete) {
        sl.selected_ = best;
        sl.weights_[best] = 1.0;
        Rng member_rng(derive_seed(base_seed, 1 + best, folds.k));
        sl.members_.push_back(fit_learner(library[best], x, y, offset, &w, member_rng));
        sl.member_index_.push_back(best);
        return sl;
    }

    // Convex mode: NNLS on the cross-validated predictions, normalized to a
    // convex combination.
    std::vector<int> active;
    for (int l = 0; l < n_learners; ++l) {
        if (!failed[l]) active.push_back(l);
    }
    Eigen::MatrixXd z_act(n, active.size());
    for (std::size_t k = 0; k < active.size(); ++k) z_act.col(k) = z.col(active[k]);
    Eigen::VectorXd coef = nnls(z_act, y, w);
    if (coef.sum() <= 0.0) {
        coef.setZero();
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (active[k] == best) coef[k] = 1.0;
        }
    }
    coef /= coef.sum();
    sl.selected_ = best;
    for (std::size_t k = 0; k < active.size(); ++k) {
        if (coef[k] <= 1e-8) continue;
        sl.weights_[active[k]] = coef[k];
        Rng member_rng(derive_seed(base_seed, 1 + active[k], folds.k));
        sl.members_.push_back(fit_learner(library[active[k]], x, y, offset, &w, member_rng));
        sl.member_index_.push_back(active[k]);
    }
    sl.weights_ /= sl.weights_.sum();
    return sl;
}

}  // namespace mixtree
