#include "mixtree/dataset.hpp"
#include "mixtree/error.hpp"
#include "mixtree/folds.hpp"
#include "mixtree/region.hpp"
#include "mixtree/rng.hpp"
#include "mixtree/scaling.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

using namespace mixtree;

namespace {

RectRegion make_region(std::vector<Clause> clauses) { return RectRegion(std::move(clauses)); }

Clause ge(const std::string& var, double lo) {
    Clause c;
    c.var = var;
    c.lower = lo;
    c.lower_closed = true;
    return c;
}

Clause lt(const std::string& var, double hi) {
    Clause c;
    c.var = var;
    c.upper = hi;
    c.upper_closed = false;
    return c;
}

Clause gt(const std::string& var, double lo) {
    Clause c;
    c.var = var;
    c.lower = lo;
    c.lower_closed = false;
    return c;
}

Clause interval(const std::string& var, double lo, double hi) {
    Clause c;
    c.var = var;
    c.lower = lo;
    c.upper = hi;
    c.lower_closed = true;
    c.upper_closed = true;
    return c;
}

}  // namespace

TEST_CASE("evaluate_region: single closed threshold") {
    Eigen::MatrixXd a(3, 1);
    a << 1, 2, 3;
    const auto region = make_region({ge("A1", 2.0)});
    const Eigen::VectorXd ind = evaluate_region(region, a, {"A1"});
    CHECK(ind[0] == 0.0);
    CHECK(ind[1] == 1.0);
    CHECK(ind[2] == 1.0);
}

TEST_CASE("evaluate_region: conjunction over two exposures") {
    Eigen::MatrixXd a(4, 2);
    // columns: X1, X7
    a << 0.4, 0.3,   // in
        0.2, 0.3,    // X1 too low
        0.4, 0.1,    // X7 too low
        0.326, 0.22; // boundary, closed bounds include it
    const auto region = make_region({ge("X1", 0.326), ge("X7", 0.22)});
    const Eigen::VectorXd ind = evaluate_region(region, a, {"X1", "X7"});
    CHECK(ind[0] == 1.0);
    CHECK(ind[1] == 0.0);
    CHECK(ind[2] == 0.0);
    CHECK(ind[3] == 1.0);
    CHECK(region.canonical() == "X1 >= 0.326 & X7 >= 0.22");
}

TEST_CASE("evaluate_region: vacuous clause covers everything") {
    Eigen::MatrixXd a(3, 1);
    a << -100, 0, 100;
    Clause c;
    c.var = "A1";
    const auto region = make_region({c});
    CHECK(evaluate_region(region, a, {"A1"}).sum() == 3.0);
}

TEST_CASE("evaluate_region: unknown variable is a schema error") {
    Eigen::MatrixXd a(2, 1);
    a << 1, 2;
    const auto region = make_region({ge("B9", 0.0)});
    CHECK_THROWS_AS(evaluate_region(region, a, {"A1"}), SchemaError);
}

TEST_CASE("union_region: per-variable hull of fold regions") {
    const std::vector<RectRegion> folds = {
        make_region({lt("X1", 2.0), gt("X2", 5.0)}),
        make_region({lt("X1", 2.3), gt("X2", 5.2)}),
        make_region({lt("X1", 1.9), gt("X2", 5.3)}),
    };
    const RectRegion u = union_region(folds);
    REQUIRE(u.clauses().size() == 2);
    CHECK(u.clauses()[0].var == "X1");
    CHECK(u.clauses()[0].upper == 2.3);
    CHECK(u.clauses()[1].var == "X2");
    CHECK(u.clauses()[1].lower == 5.0);
    CHECK(u.canonical() == "X1 < 2.3 & X2 > 5");
}

TEST_CASE("union_region: single region is unchanged") {
    const auto r = make_region({ge("A1", 1.5), lt("A2", 3.0)});
    const RectRegion u = union_region(std::vector<RectRegion>{r});
    CHECK(u.canonical() == r.canonical());
}

TEST_CASE("union_region: interval hull may cover gaps") {
    const std::vector<RectRegion> rs = {make_region({interval("A1", 1, 2)}),
                                        make_region({interval("A1", 3, 4)})};
    const RectRegion u = union_region(rs);
    CHECK(u.clauses()[0].lower == 1.0);
    CHECK(u.clauses()[0].upper == 4.0);
}

TEST_CASE("union_region: mixed varsets rejected") {
    const std::vector<RectRegion> rs = {make_region({ge("A1", 1)}), make_region({ge("A2", 1)})};
    CHECK_THROWS_AS(union_region(rs), ConfigError);
}

TEST_CASE("union indicator dominates every input, order does not matter") {
    Rng rng(20240518);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<RectRegion> regions;
        const int n_regions = 2 + rng.below(4);
        for (int r = 0; r < n_regions; ++r) {
            const double lo1 = rng.normal(), lo2 = rng.normal();
            regions.push_back(make_region(
                {interval("A1", lo1, lo1 + 0.5 + rng.uniform()), interval("A2", lo2, lo2 + 0.5 + rng.uniform())}));
        }
        Eigen::MatrixXd a(40, 2);
        for (int i = 0; i < a.size(); ++i) a(i) = rng.normal();
        const std::vector<std::string> names = {"A1", "A2"};
        const RectRegion u = union_region(regions);
        const Eigen::VectorXd ind_u = evaluate_region(u, a, names);
        for (const auto& r : regions) {
            const Eigen::VectorXd ind_r = evaluate_region(r, a, names);
            CHECK((ind_u.array() >= ind_r.array()).all());
        }
        // order invariance and associativity against a reversed fold order
        std::vector<RectRegion> rev(regions.rbegin(), regions.rend());
        CHECK(union_region(rev).canonical() == u.canonical());
        if (regions.size() >= 3) {
            std::vector<RectRegion> left2 = {regions[0], regions[1]};
            std::vector<RectRegion> nested = {union_region(left2)};
            nested.insert(nested.end(), regions.begin() + 2, regions.end());
            CHECK(union_region(nested).canonical() == u.canonical());
        }
    }
}

TEST_CASE("region JSON round trip") {
    const auto r = make_region({ge("A1", 0.326), lt("A2", 3.0)});
    const RectRegion back = RectRegion::from_json(r.to_json());
    CHECK(back.canonical() == r.canonical());
}

TEST_CASE("kfold_split: balanced sizes") {
    const FoldSpec even = kfold_split(10, 5, 7);
    std::vector<int> sizes(5, 0);
    for (int f : even.assignment) sizes[f]++;
    for (int s : sizes) CHECK(s == 2);

    const FoldSpec odd = kfold_split(11, 5, 7);
    std::multiset<int> odd_sizes;
    for (int f = 0; f < 5; ++f) odd_sizes.insert(static_cast<int>(odd.fold_rows(f).size()));
    CHECK(odd_sizes == std::multiset<int>({2, 2, 2, 2, 3}));
}

TEST_CASE("kfold_split: deterministic and a partition") {
    const FoldSpec a = kfold_split(101, 7, 42);
    const FoldSpec b = kfold_split(101, 7, 42);
    CHECK(a.assignment == b.assignment);
    std::vector<int> seen(101, 0);
    for (int f = 0; f < 7; ++f) {
        for (int row : a.fold_rows(f)) seen[row]++;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(kfold_split(101, 11, 1).assignment != kfold_split(101, 11, 2).assignment);
}

TEST_CASE("kfold_split: k > n rejected") {
    CHECK_THROWS_AS(kfold_split(3, 5, 1), ConfigError);
    CHECK_THROWS_AS(kfold_split(10, 1, 1), ConfigError);
}

TEST_CASE("scale_outcome: endpoints clamped, midpoint exact") {
    OutcomeScale scale(0.0, 10.0);
    Eigen::VectorXd y(3);
    y << 0, 5, 10;
    const Eigen::VectorXd s = scale.scale(y);
    CHECK(s[0] == doctest::Approx(1e-4));
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(s[2] == doctest::Approx(1.0 - 1e-4));
}

TEST_CASE("scale_outcome: round trip up to clamp") {
    Rng rng(3);
    Eigen::VectorXd y = rng.normal_vector(50, 2.0, 5.0);
    const OutcomeScale scale = OutcomeScale::fit(y);
    const Eigen::VectorXd back = scale.unscale(scale.scale(y));
    for (int i = 0; i < y.size(); ++i) {
        CHECK(std::abs(back[i] - y[i]) <= 1e-4 * scale.range() + 1e-12);
    }
}

TEST_CASE("scale_outcome: out-of-range values clamp with a warning") {
    OutcomeScale scale(0.0, 1.0);
    Eigen::VectorXd y(2);
    y << -0.5, 2.0;
    std::vector<std::string> warnings;
    const Eigen::VectorXd s = scale.scale(y, &warnings);
    CHECK(s[0] == doctest::Approx(1e-4));
    CHECK(s[1] == doctest::Approx(1.0 - 1e-4));
    CHECK(warnings.size() == 1);
}

TEST_CASE("scale_outcome: degenerate outcome rejected") {
    CHECK_THROWS_AS(OutcomeScale(1.0, 1.0), NumericError);
}

TEST_CASE("scale_outcome: strictly monotone inside the range") {
    OutcomeScale scale(0.0, 10.0);
    Eigen::VectorXd y(4);
    y << 1.0, 2.0, 5.0, 9.0;
    const Eigen::VectorXd s = scale.scale(y);
    for (int i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
}

TEST_CASE("Dataset::make validates") {
    Eigen::MatrixXd w(2, 1), a(2, 1);
    w << 1, 2;
    a << 3, 4;
    Eigen::VectorXd y(2);
    y << 5, 6;
    CHECK_NOTHROW(Dataset::make(w, a, y, {"W1"}, {"A1"}));
    CHECK_THROWS_AS(Dataset::make(w, a, y, {"W1"}, {"W1"}), SchemaError);
    Eigen::MatrixXd bad = a;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Dataset::make(w, bad, y, {"W1"}, {"A1"}), SchemaError);
}

TEST_CASE("CSV ingestion errors carry locations") {
    const std::string path = "test_core_tmp.csv";
    {
        std::ofstream out(path);
        out << "y,A1,W1\n1.0,2.0,3.0\n2.0,oops,4.0\n";
    }
    ColumnRoles roles;
    roles.outcome = "y";
    roles.exposures = {"A1"};
    roles.covariates = {"W1"};
    try {
        read_csv_dataset(path, roles);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
        CHECK(msg.find("A1") != std::string::npos);
    }

    ColumnRoles missing = roles;
    missing.outcome = "nope";
    try {
        read_csv_dataset(path, missing);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("nope") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("CSV ingestion happy path") {
    const std::string path = "test_core_ok.csv";
    {
        std::ofstream out(path);
        out << "y,A1,A2,W1\n1.5,2,3,0\n2.5,4,5,1\n";
    }
    ColumnRoles roles;
    roles.outcome = "y";
    roles.exposures = {"A1", "A2"};
    roles.covariates = {"W1"};
    const Dataset d = read_csv_dataset(path, roles);
    CHECK(d.n() == 2);
    CHECK(d.a(1, 0) == 4.0);
    CHECK(d.y[0] == 1.5);
    CHECK(d.weights.sum() == 2.0);
    std::remove(path.c_str());
}
