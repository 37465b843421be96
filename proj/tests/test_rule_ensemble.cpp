#include "mixtree/error.hpp"
#include "mixtree/rng.hpp"
#include "mixtree/rule_ensemble.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mixtree;

namespace {

const std::vector<std::string> kNames = {"A1", "A2"};

Eigen::MatrixXd grid_exposures(int n, Rng& rng) {
    Eigen::MatrixXd a(n, 2);
    for (int i = 0; i < n; ++i) {
        a(i, 0) = 1 + rng.below(5);
        a(i, 1) = 1 + rng.below(5);
    }
    return a;
}

RuleCandidate make_candidate(const RectRegion& region, double coef, int covered) {
    RuleCandidate c;
    c.region = region;
    c.coefficient = coef;
    c.covered = covered;
    return c;
}

Clause ge(const std::string& var, double lo) {
    Clause c;
    c.var = var;
    c.lower = lo;
    return c;
}

}  // namespace

TEST_CASE("generate: pure noise yields a median of zero candidates") {
    std::vector<int> counts;
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(5000 + rep);
        const int n = 200;
        Eigen::MatrixXd a(n, 2);
        Eigen::VectorXd target(n);
        for (int i = 0; i < n; ++i) {
            a(i, 0) = rng.normal();
            a(i, 1) = rng.normal();
            target[i] = rng.normal();
        }
        RuleEnsembleConfig config;
        Rng gen_rng(6000 + rep);
        counts.push_back(static_cast<int>(generate_candidate_rules(a, target, kNames, config, gen_rng).size()));
    }
    std::sort(counts.begin(), counts.end());
    const int median = counts[50];
    CHECK(median == 0);
}

TEST_CASE("generate: strong corner signal produces a nearby candidate") {
    Rng rng(2024);
    const int n = 1000;
    Eigen::MatrixXd a = grid_exposures(n, rng);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) {
        target[i] = ((a(i, 0) >= 5 && a(i, 1) >= 5) ? 4.0 : 0.0) + 0.3 * rng.normal();
    }
    RuleEnsembleConfig config;
    const auto candidates = generate_candidate_rules(a, target, kNames, config, rng);
    REQUIRE_FALSE(candidates.empty());
    bool found = false;
    for (const auto& c : candidates) {
        if (c.region.varset_key() != "A1,A2") continue;
        bool a1_ok = false, a2_ok = false;
        for (const Clause& cl : c.region.clauses()) {
            if (cl.var == "A1" && cl.lower > 4.0 && cl.lower <= 5.0 && !std::isfinite(cl.upper)) a1_ok = true;
            if (cl.var == "A2" && cl.lower > 4.0 && cl.lower <= 5.0 && !std::isfinite(cl.upper)) a2_ok = true;
        }
        if (a1_ok && a2_ok) found = true;
    }
    CHECK(found);
}

TEST_CASE("generate: one depth-1 tree emits at most two candidates") {
    Rng rng(3);
    const int n = 300;
    Eigen::MatrixXd a = grid_exposures(n, rng);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) target[i] = (a(i, 0) >= 3 ? 1.0 : 0.0) + 0.1 * rng.normal();
    RuleEnsembleConfig config;
    config.n_trees = 1;
    config.max_depth = 1;
    const auto candidates = generate_candidate_rules(a, target, kNames, config, rng);
    CHECK(candidates.size() <= 2);
}

TEST_CASE("generate: rules never use more variables than the depth cap") {
    Rng rng(17);
    const int n = 600;
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) a(i, j) = rng.normal();
        target[i] = a(i, 0) * a(i, 1) + a(i, 2) + 0.2 * rng.normal();
    }
    RuleEnsembleConfig config;
    const std::vector<std::string> names = {"A1", "A2", "A3", "A4"};
    const auto candidates = generate_candidate_rules(a, target, names, config, rng);
    for (const auto& c : candidates) {
        CHECK(static_cast<int>(c.region.varset().size()) <= config.max_depth);
    }
}

TEST_CASE("select: a perfectly predictive rule survives, noise mostly does not") {
    Rng rng(11);
    const int n = 500;
    Eigen::MatrixXd a = grid_exposures(n, rng);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) {
        target[i] = (a(i, 0) >= 4 ? 3.0 : 0.0) + 0.1 * rng.normal();
    }
    std::vector<RuleCandidate> candidates;
    candidates.push_back(make_candidate(RectRegion({ge("A1", 3.5)}), 0.0, 0));
    for (int j = 0; j < 6; ++j) {
        candidates.push_back(
            make_candidate(RectRegion({ge("A2", 1.5 + j * 0.5)}), 0.0, 0));
    }
    RuleEnsembleConfig config;
    const auto selected = select_rules(candidates, a, target, kNames, config, rng);
    REQUIRE_FALSE(selected.empty());
    bool true_rule = false;
    for (const auto& s : selected) {
        if (s.region.canonical() == "A1 >= 3.5") {
            true_rule = true;
            CHECK(s.coefficient > 1.0);
        }
    }
    CHECK(true_rule);
}

TEST_CASE("select: invariant to duplicated candidates") {
    Rng rng(13);
    const int n = 400;
    Eigen::MatrixXd a = grid_exposures(n, rng);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) target[i] = (a(i, 1) >= 3 ? 2.0 : 0.0) + 0.2 * rng.normal();
    std::vector<RuleCandidate> candidates = {
        make_candidate(RectRegion({ge("A2", 2.5)}), 0.0, 0),
        make_candidate(RectRegion({ge("A1", 2.5)}), 0.0, 0),
    };
    std::vector<RuleCandidate> doubled = candidates;
    doubled.insert(doubled.end(), candidates.begin(), candidates.end());

    Rng rng_a(99), rng_b(99);
    RuleEnsembleConfig config;
    const auto sel_a = select_rules(candidates, a, target, kNames, config, rng_a);
    const auto sel_b = select_rules(doubled, a, target, kNames, config, rng_b);
    REQUIRE(sel_a.size() == sel_b.size());
    for (std::size_t i = 0; i < sel_a.size(); ++i) {
        CHECK(sel_a[i].region.canonical() == sel_b[i].region.canonical());
        CHECK(sel_a[i].coefficient == doctest::Approx(sel_b[i].coefficient));
    }
}

TEST_CASE("select: noise target selects nothing") {
    Rng rng(19);
    const int n = 300;
    Eigen::MatrixXd a = grid_exposures(n, rng);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) target[i] = rng.normal();
    std::vector<RuleCandidate> candidates;
    for (int j = 0; j < 8; ++j) {
        candidates.push_back(make_candidate(RectRegion({ge("A1", 1.5 + 0.5 * j)}), 0.0, 0));
    }
    RuleEnsembleConfig config;
    const auto selected = select_rules(candidates, a, target, kNames, config, rng);
    CHECK(selected.empty());
}

TEST_CASE("best_rule_per_varset: direction and tie-breaks") {
    const RectRegion r1({ge("X1", 1.0), ge("X2", 2.0)});
    const RectRegion r2({ge("X1", 3.0), ge("X2", 4.0)});
    const RectRegion r3({ge("X3", 1.0)});

    std::vector<RuleCandidate> rules = {make_candidate(r1, 1.2, 50), make_candidate(r2, 0.4, 80),
                                        make_candidate(r3, -2.0, 30)};
    auto best_max = best_rule_per_varset(rules, Direction::Max);
    REQUIRE(best_max.size() == 2);
    CHECK(best_max.at("X1,X2").coefficient == 1.2);
    CHECK(best_max.at("X3").coefficient == -2.0);

    std::vector<RuleCandidate> signed_rules = {make_candidate(r1, -2.0, 10), make_candidate(r2, 3.0, 10)};
    auto best_min = best_rule_per_varset(signed_rules, Direction::Min);
    CHECK(best_min.at("X1,X2").coefficient == -2.0);

    // coefficient tie: larger coverage wins, then canonical string
    std::vector<RuleCandidate> tied = {make_candidate(r1, 1.0, 10), make_candidate(r2, 1.0, 90)};
    CHECK(best_rule_per_varset(tied, Direction::Max).at("X1,X2").covered == 90);
    std::vector<RuleCandidate> tied2 = {make_candidate(r2, 1.0, 10), make_candidate(r1, 1.0, 10)};
    CHECK(best_rule_per_varset(tied2, Direction::Max).at("X1,X2").region.canonical() ==
          r1.canonical());

    // per-varset coefficient is the max over that varset's selected rules
    auto groups = best_rule_per_varset(rules, Direction::Max);
    for (const auto& [key, winner] : groups) {
        for (const auto& r : rules) {
            if (r.region.varset_key() == key) CHECK(winner.coefficient >= r.coefficient);
        }
    }
}
