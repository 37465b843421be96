#include "mixtree/error.hpp"
#include "mixtree/math.hpp"
#include "mixtree/rng.hpp"
#include "mixtree/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace mixtree;

TEST_CASE("dgp2d: outcome formula at the top cell") {
    CHECK(Dgp2d::cell_outcome(5, 5) == doctest::Approx(30.0));
    CHECK(Dgp2d::cell_outcome(1, 1) == doctest::Approx(1.2));
}

TEST_CASE("dgp2d: different study seeds draw different cell coefficient matrices") {
    const Dgp2d a(1, 2000, 1000);
    const Dgp2d b(2, 2000, 1000);
    CHECK((a.config().beta - b.config().beta).cwiseAbs().maxCoeff() > 0.1);
    // and consequently different marginal cell densities
    CHECK((a.marginal_cell_probabilities() - b.marginal_cell_probabilities()).cwiseAbs().maxCoeff() >
          1e-3);
}

TEST_CASE("dgp2d: generated cell frequencies match the analytic probabilities") {
    const Dgp2d dgp(11, 100000, 1000);
    const int n = 100000;
    const Dataset d = dgp.generate(n, 99);
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(25);
    for (int i = 0; i < n; ++i) {
        const int cell = (static_cast<int>(d.a(i, 0)) - 1) * 5 + (static_cast<int>(d.a(i, 1)) - 1);
        freq[cell] += 1.0;
    }
    freq /= n;
    const Eigen::VectorXd p = dgp.marginal_cell_probabilities();
    for (int c = 0; c < 25; ++c) {
        const double se = std::sqrt(std::max(p[c] * (1.0 - p[c]), 1e-12)) * (1.0 / std::sqrt(n) + 1.0 / std::sqrt(100000.0));
        CHECK(std::abs(freq[c] - p[c]) <= 3.0 * se + 2e-4);
    }
}

TEST_CASE("dgp2d: the true region is populated in every draw") {
    const Dgp2d dgp(3, 5000, 1000);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const Dataset d = dgp.generate(60, seed);
        const Eigen::VectorXd ind = evaluate_region(dgp.true_region(), d.a, dgp.exposure_names());
        CHECK(ind.sum() >= 1.0);
    }
}

TEST_CASE("dgp2d: oracle is stable in the number of draws") {
    Dgp2dConfig config = Dgp2d(21, 2000, 1000).config();
    double se_small = 0.0, se_big = 0.0;
    const Dgp2d small(config, 100000, 1000);
    const Dgp2d big(config, 400000, 1000);
    const double psi_small = small.region_are(small.true_region(), &se_small);
    const double psi_big = big.region_are(big.true_region(), &se_big);
    CHECK(std::abs(psi_small - psi_big) <= 3.0 * std::sqrt(se_small * se_small + se_big * se_big));
    // and the two oracles agree on where the maximum is
    CHECK(small.true_region().canonical() == big.true_region().canonical());
}

TEST_CASE("dgp2d: degenerate regions are rejected by the oracle") {
    const Dgp2d dgp(4, 2000, 1000);
    Clause out;
    out.var = "A1";
    out.lower = 50.0;
    CHECK_THROWS_AS(dgp.region_are(RectRegion({out})), NumericError);
    Clause all;
    all.var = "A1";
    CHECK_THROWS_AS(dgp.region_are(RectRegion({all})), NumericError);
}

TEST_CASE("dgp2d: true region is a corner under the monotone outcome") {
    const Dgp2d dgp(7, 20000, 1000);
    // the quadratic with positive interaction is maximized at high levels, so
    // the maximal-contrast rectangle must include the (5,5) cell
    const double values[2] = {5.0, 5.0};
    const std::vector<std::string>& names = dgp.exposure_names();
    CHECK(dgp.true_region().contains(std::span<const double>(values, 2),
                                     std::span<const std::string>(names.data(), 2)));
    CHECK(dgp.psi_true() > 0.0);
}

TEST_CASE("truth_3d: coefficient arithmetic") {
    Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(8);
    one_hot[1] = 2.0;
    CHECK(truth_3d(one_hot) == doctest::Approx(2.0));

    Eigen::VectorXd ramp(8);
    for (int i = 0; i < 8; ++i) ramp[i] = i + 1.0;
    CHECK(truth_3d(ramp) == doctest::Approx(4.0));  // 8 - mean(1..7)

    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(8, 1.5);
    CHECK_THROWS_AS(truth_3d(flat), ConfigError);
}

TEST_CASE("dgp3d: exposures respect their cell boxes and correlations") {
    const Dgp3d dgp(5, 2000);
    std::vector<int> cells;
    const Dataset d = dgp.generate_with_cells(20000, 17, &cells);
    const auto& cuts = dgp.config().cuts;
    for (int i = 0; i < d.n(); ++i) {
        for (int j = 0; j < 3; ++j) {
            const bool high = (cells[i] >> j) & 1;
            if (high) {
                CHECK(d.a(i, j) >= cuts[j]);
            } else {
                CHECK(d.a(i, j) < cuts[j]);
            }
        }
    }
    // positive dependence survives within the all-high cell (diagnostic)
    std::vector<double> x1, x2;
    for (int i = 0; i < d.n(); ++i) {
        if (cells[i] == 7) {
            x1.push_back(d.a(i, 0));
            x2.push_back(d.a(i, 1));
        }
    }
    REQUIRE(x1.size() > 100);
    Eigen::Map<Eigen::ArrayXd> ax1(x1.data(), x1.size()), ax2(x2.data(), x2.size());
    const double corr = ((ax1 - ax1.mean()) * (ax2 - ax2.mean())).mean() / (sd(ax1) * sd(ax2));
    CHECK(corr > 0.05);
}

TEST_CASE("dgp3d: defaults give a one-hot effect of three") {
    const Dgp3d dgp(6, 50000);
    CHECK(dgp.psi_true() == doctest::Approx(3.0));
    CHECK(dgp.true_region().varset().size() == 3);
    // the large-sample ARE of the true region reproduces the coefficient
    // arithmetic exactly for a one-hot effect
    CHECK(dgp.region_are(dgp.true_region()) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("gen_3d: explicit betas flow through, degenerate rejected") {
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(8);
    betas[1] = 2.0;
    const Gen3dResult r = gen_3d(500, 12, betas);
    CHECK(r.data.n() == 500);
    CHECK(truth_3d(r.config.cell_beta) == doctest::Approx(2.0));
    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(8, 0.5);
    CHECK_THROWS_AS(gen_3d(100, 12, flat), ConfigError);
}

TEST_CASE("confusion_counts: exact recovery has no false calls") {
    const Dgp2d dgp(8, 2000, 20000);
    long tp = 0, tn = 0, fp = 0, fn = 0;
    confusion_counts(dgp.true_region(), dgp, &tp, &tn, &fp, &fn);
    CHECK(fp == 0);
    CHECK(fn == 0);
    CHECK(tp > 0);
    CHECK(tp + tn == 20000);
}

TEST_CASE("evaluate_run: record shape and MSE identity on a real run") {
    const Dgp2d dgp(9, 20000, 20000);
    const Dataset data = dgp.generate(400, 5);
    CrossEstConfig cfg;
    cfg.k = 3;
    cfg.seed = 77;
    cfg.run_marginal = false;
    cfg.backfit.h_library = {glm_spec(), tree_spec(3, 1.0, 10)};
    cfg.backfit.rules.n_trees = 20;
    cfg.backfit.inner_folds = 3;
    cfg.nuisance.q_library = {glm_spec(Family::Identity), tree_spec(3, 1.0, 10)};
    cfg.nuisance.g_library = {glm_spec(Family::Logistic), tree_spec(3, 1.0, 10)};
    cfg.nuisance.inner_folds = 3;
    const CvReport report = run_analysis(data, cfg);
    const auto records = evaluate_run(report, dgp, 400);
    REQUIRE(records.size() == 6);
    std::set<std::string> seen;
    for (const auto& r : records) {
        seen.insert(estimator_name(r.estimator) + "/" + truth_name(r.target));
        if (r.no_discovery) continue;
        CHECK(r.n == 400);
        CHECK(r.n_mse == doctest::Approx(400.0 * (r.bias * r.bias + r.variance)));
        CHECK(r.sqrt_n_bias == doctest::Approx(std::sqrt(400.0) * r.bias));
        CHECK(r.tp + r.tn + r.fp + r.fn == 20000);
    }
    CHECK(seen.size() == 6);
}
