#pragma once

#include <Eigen/Dense>

#include <nlohmann/json_fwd.hpp>

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mixtree {

// One per-variable interval constraint. Closed flags record whether the bound
// itself belongs to the interval ("x >= lo" vs "x > lo").
struct Clause {
    std::string var;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_closed = true;
    bool upper_closed = false;

    bool contains(double x) const {
        if (lower_closed ? x < lower : x <= lower) return false;
        if (upper_closed ? x > upper : x >= upper) return false;
        return true;
    }
};

// Conjunction of interval constraints over named exposure variables.
// Immutable after construction; at most one clause per variable, clauses kept
// sorted by variable name.
class RectRegion {
public:
    RectRegion() = default;
    explicit RectRegion(std::vector<Clause> clauses);

    const std::vector<Clause>& clauses() const { return clauses_; }
    // Sorted variable names.
    std::vector<std::string> varset() const;
    // Sorted names joined with ",": the grouping key used across folds.
    std::string varset_key() const;
    bool empty() const { return clauses_.empty(); }

    bool contains(std::span<const double> values, std::span<const std::string> names) const;

    // "A1 >= 0.326 & A7 >= 0.22" with 6 significant digits.
    std::string canonical() const;

    nlohmann::json to_json() const;
    static RectRegion from_json(const nlohmann::json& j);

private:
    std::vector<Clause> clauses_;
};

// Indicator of the region on every row of the exposure matrix (1.0 / 0.0).
Eigen::VectorXd evaluate_region(const RectRegion& region, const Eigen::MatrixXd& a,
                                const std::vector<std::string>& names);

// Per-variable interval hull of regions sharing a varset: min of lower bounds,
// max of upper bounds. The hull covers every input region but may also cover
// points no input covered; this is the intended conservative behavior.
RectRegion union_region(std::span<const RectRegion> regions);

}  // namespace mixtree
