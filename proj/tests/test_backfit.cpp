#include "mixtree/backfit.hpp"
#include "mixtree/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace mixtree;

namespace {

const std::vector<std::string> kNames = {"A1", "A2"};

struct AdditiveData {
    Eigen::MatrixXd a, w;
    Eigen::VectorXd y;
};

// h-side truth linear in W, f-side truth a single corner rule.
AdditiveData make_additive(int n, Rng& rng, double rule_effect = 3.0) {
    AdditiveData d;
    d.a.resize(n, 2);
    d.w.resize(n, 2);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        d.a(i, 0) = 1 + rng.below(5);
        d.a(i, 1) = 1 + rng.below(5);
        d.w(i, 0) = rng.normal();
        d.w(i, 1) = rng.normal();
        const double f = (d.a(i, 0) >= 4 && d.a(i, 1) >= 4) ? rule_effect : 0.0;
        const double h = 1.5 * d.w(i, 0) - 0.8 * d.w(i, 1);
        d.y[i] = f + h + 0.3 * rng.normal();
    }
    return d;
}

// Fast config for tests: smaller ensembles, light h library.
BackfitConfig test_config() {
    BackfitConfig cfg;
    cfg.rules.n_trees = 30;
    cfg.h_library = {glm_spec(), tree_spec(3, 1.0, 10)};
    cfg.inner_folds = 3;
    return cfg;
}

double jaccard(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double inter = 0.0, uni = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        const bool ia = a[i] != 0.0, ib = b[i] != 0.0;
        inter += (ia && ib) ? 1.0 : 0.0;
        uni += (ia || ib) ? 1.0 : 0.0;
    }
    return uni > 0.0 ? inter / uni : 1.0;
}

}  // namespace

TEST_CASE("backfit_joint: recovers an additive rule truth with high overlap") {
    Rng rng(101);
    AdditiveData d = make_additive(2000, rng);
    BackfitConfig cfg = test_config();
    Rng fit_rng(7);
    const JointBackfitResult res = backfit_joint(d.a, d.w, d.y, kNames, cfg, fit_rng);
    REQUIRE_FALSE(res.selected_rules.empty());
    const auto best = best_rule_per_varset(res.selected_rules, Direction::Max);
    REQUIRE(best.count("A1,A2") == 1);
    Eigen::VectorXd truth(d.a.rows());
    for (int i = 0; i < d.a.rows(); ++i) {
        truth[i] = (d.a(i, 0) >= 4 && d.a(i, 1) >= 4) ? 1.0 : 0.0;
    }
    const Eigen::VectorXd found = evaluate_region(best.at("A1,A2").region, d.a, kNames);
    CHECK(jaccard(truth, found) >= 0.9);
}

TEST_CASE("backfit_joint: outcome independent of W leaves f close to the no-backfit fit") {
    Rng data_rng(202);
    const int n = 1500;
    AdditiveData d;
    d.a.resize(n, 2);
    d.w.resize(n, 2);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        d.a(i, 0) = 1 + data_rng.below(5);
        d.a(i, 1) = 1 + data_rng.below(5);
        d.w(i, 0) = data_rng.normal();
        d.w(i, 1) = data_rng.normal();
        d.y[i] = ((d.a(i, 0) >= 4 && d.a(i, 1) >= 4) ? 3.0 : 0.0) + 0.2 * data_rng.normal();
    }
    BackfitConfig cfg = test_config();

    Rng rng_a(31);
    const JointBackfitResult with_backfit = backfit_joint(d.a, d.w, d.y, kNames, cfg, rng_a);

    // no-backfit reference: a single exposure-side fit against y
    Rng rng_b(31);
    const auto candidates = generate_candidate_rules(d.a, d.y, kNames, cfg.rules, rng_b);
    REQUIRE_FALSE(candidates.empty());
    const auto selected = select_rules(candidates, d.a, d.y, kNames, cfg.rules, rng_b);
    Eigen::VectorXd f_direct = Eigen::VectorXd::Constant(n, d.y.mean());
    if (!selected.empty()) {
        // rebuild the direct prediction from the selected rules
        Eigen::MatrixXd z(n, selected.size());
        for (std::size_t j = 0; j < selected.size(); ++j) {
            z.col(j) = evaluate_region(selected[j].region, d.a, kNames);
        }
        Eigen::VectorXd coef(selected.size());
        for (std::size_t j = 0; j < selected.size(); ++j) coef[j] = selected[j].coefficient;
        const double intercept = (d.y - z * coef).mean();
        f_direct = z * coef;
        f_direct.array() += intercept;
    }

    // h should be nearly constant; compare centered f predictions
    const Eigen::VectorXd f_bf = with_backfit.f_hat.array() - with_backfit.f_hat.mean();
    const Eigen::VectorXd f_dir = f_direct.array() - f_direct.mean();
    CHECK((f_bf - f_dir).cwiseAbs().mean() < 1e-2 * (d.y.maxCoeff() - d.y.minCoeff()));
    const double h_spread = with_backfit.h_hat.maxCoeff() - with_backfit.h_hat.minCoeff();
    CHECK(h_spread < 0.35);
}

TEST_CASE("backfit_joint: infinite delta stops after one iteration") {
    Rng rng(303);
    AdditiveData d = make_additive(300, rng);
    BackfitConfig cfg = test_config();
    cfg.delta = std::numeric_limits<double>::infinity();
    Rng fit_rng(1);
    const JointBackfitResult res = backfit_joint(d.a, d.w, d.y, kNames, cfg, fit_rng);
    CHECK(res.diag.iterations == 1);
    CHECK(res.diag.converged);
}

TEST_CASE("backfit_joint: diagnostics are internally consistent") {
    Rng rng(404);
    AdditiveData d = make_additive(800, rng);
    BackfitConfig cfg = test_config();
    Rng fit_rng(2);
    const JointBackfitResult res = backfit_joint(d.a, d.w, d.y, kNames, cfg, fit_rng);
    CHECK(res.diag.iterations <= cfg.max_iter);
    REQUIRE_FALSE(res.diag.deltas.empty());
    // final_delta belongs to the returned iterate: the last step normally, the
    // best one if the loop reverted after diverging
    const bool matches_some =
        std::find(res.diag.deltas.begin(), res.diag.deltas.end(), res.diag.final_delta) !=
        res.diag.deltas.end();
    CHECK(matches_some);
    if (res.diag.converged) CHECK(res.diag.final_delta < cfg.delta);
    // with the basis frozen after iteration 1, training MSE must not increase
    for (std::size_t t = 2; t < res.diag.train_mse.size(); ++t) {
        CHECK(res.diag.train_mse[t] <= res.diag.train_mse[t - 1] + 1e-6);
    }
}

TEST_CASE("backfit_marginal: three-leaf dose response with the lowest as reference") {
    Rng rng(505);
    const int n = 1500;
    Eigen::VectorXd a(n);
    Eigen::MatrixXd w(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        a[i] = rng.uniform();
        w(i, 0) = rng.normal();
        double level = 0.0;
        if (a[i] >= 0.9) {
            level = 4.0;
        } else if (a[i] >= 0.6) {
            level = 2.0;
        }
        y[i] = level + 0.5 * w(i, 0) + 0.1 * rng.normal();
    }
    BackfitConfig cfg = test_config();
    Rng fit_rng(3);
    const MarginalBackfitResult res = backfit_marginal(a, "A1", w, y, cfg, fit_rng);
    REQUIRE(res.regions.size() == 3);
    CHECK(res.regions[0].reference);
    CHECK_FALSE(res.regions[1].reference);
    // regions ordered and disjoint, boundaries near 0.6 and 0.9
    const auto& r0 = res.regions[0].region.clauses()[0];
    const auto& r1 = res.regions[1].region.clauses()[0];
    const auto& r2 = res.regions[2].region.clauses()[0];
    CHECK(r0.upper == doctest::Approx(r1.lower));
    CHECK(r1.upper == doctest::Approx(r2.lower));
    CHECK(std::abs(r1.lower - 0.6) < 0.05);
    CHECK(std::abs(r2.lower - 0.9) < 0.05);
}

TEST_CASE("backfit_marginal: single jump gives exactly two leaves at the step") {
    Rng rng(606);
    const int n = 1000;
    Eigen::VectorXd a(n);
    Eigen::MatrixXd w(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        a[i] = rng.uniform();
        w(i, 0) = rng.normal();
        y[i] = (a[i] >= 0.5 ? 2.0 : 0.0) + 0.3 * w(i, 0) + 0.1 * rng.normal();
    }
    BackfitConfig cfg = test_config();
    cfg.marginal_trees = {tree_spec(1, 0.05, 10), tree_spec(2, 0.05, 10)};
    for (auto& t : cfg.marginal_trees) t.bonferroni = true;
    Rng fit_rng(4);
    const MarginalBackfitResult res = backfit_marginal(a, "A1", w, y, cfg, fit_rng);
    REQUIRE(res.regions.size() == 2);
    CHECK(std::abs(res.regions[1].region.clauses()[0].lower - 0.5) < 0.03);
}

TEST_CASE("backfit_marginal: noise exposure returns no regions in >= 90% of replicates") {
    int empty = 0;
    const int reps = 30;
    for (int rep = 0; rep < reps; ++rep) {
        Rng rng(700 + rep);
        const int n = 400;
        Eigen::VectorXd a(n);
        Eigen::MatrixXd w(n, 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            a[i] = rng.normal();
            w(i, 0) = rng.normal();
            y[i] = 0.5 * w(i, 0) + rng.normal();
        }
        BackfitConfig cfg = test_config();
        Rng fit_rng(800 + rep);
        const MarginalBackfitResult res = backfit_marginal(a, "A1", w, y, cfg, fit_rng);
        if (res.regions.empty()) empty++;
    }
    CHECK(empty >= (reps * 9) / 10);
}
