#include "mixtree/backfit.hpp"

#include "mixtree/error.hpp"
#include "mixtree/lasso.hpp"
#include "mixtree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixtree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tracks the alternating updates shared by the joint and marginal variants.
struct Alternator {
    double mu = 0.0;  // global intercept; f and h are kept mean-centered
    Eigen::VectorXd f_hat, h_hat;
    BackfitDiagnostics diag;
    double best_delta = kInf;
    Eigen::VectorXd best_f, best_h;
    int grow_streak = 0;
    bool last_improved = false;  // last step achieved the smallest delta so far

    Eigen::VectorXd offset_for_f() const { return (h_hat.array() + mu).matrix(); }
    Eigen::VectorXd offset_for_h() const { return (f_hat.array() + mu).matrix(); }

    // Returns true when the loop should stop.
    bool step(const Eigen::VectorXd& f_next, const Eigen::VectorXd& h_next, const Eigen::VectorXd& y,
              double delta_tol) {
        const Eigen::VectorXd combined_prev = (f_hat + h_hat).array() + mu;
        const Eigen::VectorXd combined = (f_next + h_next).array() + mu;
        const double delta = (combined - combined_prev).cwiseAbs().mean();
        diag.deltas.push_back(delta);
        diag.f_deltas.push_back((f_next - f_hat).cwiseAbs().mean());
        diag.h_deltas.push_back((h_next - h_hat).cwiseAbs().mean());
        diag.train_mse.push_back((y - combined).squaredNorm() / y.size());
        const bool grew = !diag.deltas.empty() && diag.deltas.size() > 1 &&
                          delta > diag.deltas[diag.deltas.size() - 2];
        grow_streak = grew ? grow_streak + 1 : 0;
        f_hat = f_next;
        h_hat = h_next;
        diag.iterations = static_cast<int>(diag.deltas.size());
        last_improved = delta < best_delta;
        if (last_improved) {
            best_delta = delta;
            best_f = f_hat;
            best_h = h_hat;
        }
        diag.final_delta = delta;
        if (delta < delta_tol) {
            diag.converged = true;
            return true;
        }
        if (grow_streak >= 3) {
            diag.warnings.push_back("backfit diverging; keeping the best iterate");
            f_hat = best_f;
            h_hat = best_h;
            diag.final_delta = best_delta;
            return true;
        }
        return false;
    }
};

// f-side state for the joint variant: a frozen rule basis with lasso
// coefficients.
struct RuleFit {
    std::vector<RuleCandidate> candidates;
    Eigen::MatrixXd z;  // indicator design on training rows
    double lambda = 0.0;
    Eigen::VectorXd beta;
    double intercept = 0.0;
    bool frozen = false;

    Eigen::VectorXd predict() const {
        if (candidates.empty()) return Eigen::VectorXd::Constant(z.rows() == 0 ? 0 : z.rows(), intercept);
        Eigen::VectorXd out = z * beta;
        out.array() += intercept;
        return out;
    }
};

}  // namespace

std::vector<LearnerSpec> BackfitConfig::default_marginal_trees() {
    std::vector<LearnerSpec> lib;
    for (int depth : {1, 2, 3}) {
        for (double alpha : {0.05, 0.1}) {
            LearnerSpec spec = tree_spec(depth, alpha, 10);
            spec.bonferroni = true;
            spec.name = "tree_d" + std::to_string(depth) + "_a" + std::to_string(alpha).substr(0, 4);
            lib.push_back(spec);
        }
    }
    LearnerSpec wide = tree_spec(2, 0.1, 20);
    wide.bonferroni = true;
    wide.name = "tree_d2_minleaf20";
    lib.push_back(wide);
    return lib;
}

JointBackfitResult backfit_joint(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& y, const std::vector<std::string>& a_names,
                                 const BackfitConfig& config, Rng& rng) {
    const int n = static_cast<int>(y.size());
    if (a.rows() != n || w.rows() != n) throw ConfigError("backfit_joint: row count mismatch");
    if (config.max_iter < 1) throw ConfigError("backfit_joint: max_iter must be >= 1");

    JointBackfitResult result;
    Alternator alt;

    // Lasso over an ensemble rule basis, regenerated only while not frozen.
    RuleFit f_fit;
    f_fit.z.resize(n, 0);
    auto fit_f = [&](const Eigen::VectorXd& resid) {
        if (!f_fit.frozen) {
            f_fit.candidates = generate_candidate_rules(a, resid, a_names, config.rules, rng);
            if (!f_fit.candidates.empty()) {
                f_fit.candidates = select_rules(f_fit.candidates, a, resid, a_names, config.rules, rng);
            }
            const int r = static_cast<int>(f_fit.candidates.size());
            f_fit.z.resize(n, r);
            for (int j = 0; j < r; ++j) {
                f_fit.z.col(j) = evaluate_region(f_fit.candidates[j].region, a, a_names);
            }
        }
        if (f_fit.candidates.empty()) {
            f_fit.intercept = resid.mean();
            f_fit.beta.resize(0);
            return;
        }
        if (!f_fit.frozen) {
            // First selection: CV picks lambda; afterwards only the
            // coefficients are refit at that lambda.
            PenalizedGlmModel sel =
                fit_penalized_glm(f_fit.z, resid, config.rules.selector, nullptr, nullptr, rng);
            f_fit.lambda = sel.internals().lambda;
            f_fit.beta = sel.coefficients();
            f_fit.intercept = sel.intercept();
        } else {
            PenalizedGlmModel refit =
                fit_penalized_glm_at(f_fit.z, resid, config.rules.selector, f_fit.lambda);
            f_fit.beta = refit.coefficients();
            f_fit.intercept = refit.intercept();
        }
    };

    auto centered = [](Eigen::VectorXd v) {
        v.array() -= v.mean();
        return v;
    };

    // Iteration 0: both sides fit without offsets. Components are kept
    // mean-centered with the overall level in alt.mu, which pins down the
    // additive decomposition.
    alt.mu = y.mean();
    fit_f(y);
    alt.f_hat = centered(f_fit.predict());
    SuperLearnerModel h_model =
        super_learn(config.h_library, w, y, nullptr, nullptr, config.inner_folds, config.sl_mode, rng);
    alt.h_hat = centered(h_model.predict(w));
    alt.best_f = alt.f_hat;
    alt.best_h = alt.h_hat;
    RuleFit best_fit = f_fit;

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        // Parallel update: both sides are offset by the previous iterate.
        const Eigen::VectorXd f_resid = y - alt.offset_for_f();
        if (iter == 1) {
            // The final basis comes from the residual after the covariate fit.
            f_fit.frozen = false;
            fit_f(f_resid);
            f_fit.frozen = true;
        } else {
            fit_f(f_resid);
        }
        const Eigen::VectorXd f_next = centered(f_fit.predict());

        const Eigen::VectorXd h_offset = alt.offset_for_h();
        SuperLearnerModel h_next_model = super_learn(config.h_library, w, y, &h_offset, nullptr,
                                                     config.inner_folds, config.sl_mode, rng);
        const Eigen::VectorXd h_next = centered(h_next_model.predict(w));

        const bool stop = alt.step(f_next, h_next, y, config.delta);
        if (alt.last_improved) best_fit = f_fit;
        if (stop) break;
    }
    if (!alt.diag.converged && alt.grow_streak >= 3) f_fit = best_fit;  // reverted iterate

    // Final coefficients on the frozen basis.
    result.selected_rules.clear();
    for (int j = 0; j < static_cast<int>(f_fit.candidates.size()); ++j) {
        if (f_fit.beta.size() > j && f_fit.beta[j] != 0.0) {
            RuleCandidate c = f_fit.candidates[j];
            c.coefficient = f_fit.beta[j];
            result.selected_rules.push_back(std::move(c));
        }
    }
    result.f_hat = alt.f_hat;
    result.h_hat = alt.h_hat;
    result.diag = alt.diag;
    return result;
}

MarginalBackfitResult backfit_marginal(const Eigen::VectorXd& a_col, const std::string& a_name,
                                       const Eigen::MatrixXd& w, const Eigen::VectorXd& y,
                                       const BackfitConfig& config, Rng& rng) {
    const int n = static_cast<int>(y.size());
    if (a_col.size() != n || w.rows() != n) throw ConfigError("backfit_marginal: row count mismatch");
    const std::vector<LearnerSpec> trees =
        config.marginal_trees.empty() ? BackfitConfig::default_marginal_trees() : config.marginal_trees;

    const Eigen::MatrixXd x = a_col;
    MarginalBackfitResult result;
    Alternator alt;

    auto fit_f = [&](const Eigen::VectorXd* offset) {
        return super_learn(trees, x, y, offset, nullptr, config.inner_folds, SlMode::Discrete, rng);
    };

    auto centered = [](Eigen::VectorXd v) {
        v.array() -= v.mean();
        return v;
    };

    alt.mu = y.mean();
    auto f_model = std::make_shared<SuperLearnerModel>(fit_f(nullptr));
    alt.f_hat = centered(f_model->predict(x));
    SuperLearnerModel h_model =
        super_learn(config.h_library, w, y, nullptr, nullptr, config.inner_folds, config.sl_mode, rng);
    alt.h_hat = centered(h_model.predict(w));
    alt.best_f = alt.f_hat;
    alt.best_h = alt.h_hat;
    auto best_model = f_model;

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        const Eigen::VectorXd f_offset = alt.offset_for_f();
        auto f_next_model = std::make_shared<SuperLearnerModel>(fit_f(&f_offset));
        const Eigen::VectorXd f_next = centered(f_next_model->predict(x));
        const Eigen::VectorXd h_offset = alt.offset_for_h();
        SuperLearnerModel h_next_model = super_learn(config.h_library, w, y, &h_offset, nullptr,
                                                     config.inner_folds, config.sl_mode, rng);
        const Eigen::VectorXd h_next = centered(h_next_model.predict(w));
        f_model = std::move(f_next_model);
        const bool stop = alt.step(f_next, h_next, y, config.delta);
        if (alt.last_improved) best_model = f_model;
        if (stop) break;
    }
    result.diag = alt.diag;
    if (!alt.diag.converged && alt.grow_streak >= 3) f_model = best_model;

    const auto* tree = dynamic_cast<const TreeModel*>(&f_model->winner());
    if (tree == nullptr || !tree->has_split()) return result;  // no thresholds found
    std::vector<RectRegion> leaves = tree->leaf_regions({a_name});
    std::sort(leaves.begin(), leaves.end(), [](const RectRegion& a, const RectRegion& b) {
        return a.clauses().front().lower < b.clauses().front().lower;
    });
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        result.regions.push_back({std::move(leaves[i]), i == 0});
    }
    return result;
}

}  // namespace mixtree
