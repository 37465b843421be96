#include "mixtree/region.hpp"

#include "mixtree/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mixtree {

namespace {

std::string format_bound(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

int find_column(const std::vector<std::string>& names, const std::string& var) {
    for (int j = 0; j < static_cast<int>(names.size()); ++j) {
        if (names[j] == var) return j;
    }
    return -1;
}

}  // namespace

RectRegion::RectRegion(std::vector<Clause> clauses) : clauses_(std::move(clauses)) {
    if (clauses_.empty()) throw ConfigError("RectRegion: empty clause list");
    std::sort(clauses_.begin(), clauses_.end(),
              [](const Clause& a, const Clause& b) { return a.var < b.var; });
    for (std::size_t i = 0; i < clauses_.size(); ++i) {
        const Clause& c = clauses_[i];
        if (c.var.empty()) throw ConfigError("RectRegion: unnamed clause variable");
        if (!(c.lower < c.upper)) {
            throw ConfigError("RectRegion: clause on " + c.var + " has lower >= upper");
        }
        if (i > 0 && clauses_[i - 1].var == c.var) {
            throw ConfigError("RectRegion: duplicate clause for " + c.var);
        }
    }
}

std::vector<std::string> RectRegion::varset() const {
    std::vector<std::string> vars;
    vars.reserve(clauses_.size());
    for (const Clause& c : clauses_) vars.push_back(c.var);
    return vars;
}

std::string RectRegion::varset_key() const {
    std::string key;
    for (const Clause& c : clauses_) {
        if (!key.empty()) key += ",";
        key += c.var;
    }
    return key;
}

bool RectRegion::contains(std::span<const double> values, std::span<const std::string> names) const {
    for (const Clause& c : clauses_) {
        int j = -1;
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (names[k] == c.var) {
                j = static_cast<int>(k);
                break;
            }
        }
        if (j < 0) throw SchemaError("region variable not found: " + c.var);
        if (!c.contains(values[j])) return false;
    }
    return true;
}

std::string RectRegion::canonical() const {
    std::string out;
    for (const Clause& c : clauses_) {
        const bool has_lower = std::isfinite(c.lower);
        const bool has_upper = std::isfinite(c.upper);
        if (has_lower) {
            if (!out.empty()) out += " & ";
            out += c.var + (c.lower_closed ? " >= " : " > ") + format_bound(c.lower);
        }
        if (has_upper) {
            if (!out.empty()) out += " & ";
            out += c.var + (c.upper_closed ? " <= " : " < ") + format_bound(c.upper);
        }
        if (!has_lower && !has_upper) {
            if (!out.empty()) out += " & ";
            out += c.var + " in (-inf, inf)";
        }
    }
    return out;
}

nlohmann::json RectRegion::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const Clause& c : clauses_) {
        nlohmann::json jc;
        jc["var"] = c.var;
        if (std::isfinite(c.lower)) {
            jc["lower"] = c.lower;
            jc["lower_closed"] = c.lower_closed;
        }
        if (std::isfinite(c.upper)) {
            jc["upper"] = c.upper;
            jc["upper_closed"] = c.upper_closed;
        }
        arr.push_back(jc);
    }
    nlohmann::json j;
    j["clauses"] = arr;
    j["rule"] = canonical();
    return j;
}

RectRegion RectRegion::from_json(const nlohmann::json& j) {
    std::vector<Clause> clauses;
    for (const auto& jc : j.at("clauses")) {
        Clause c;
        c.var = jc.at("var").get<std::string>();
        if (jc.contains("lower")) {
            c.lower = jc.at("lower").get<double>();
            c.lower_closed = jc.value("lower_closed", true);
        }
        if (jc.contains("upper")) {
            c.upper = jc.at("upper").get<double>();
            c.upper_closed = jc.value("upper_closed", false);
        }
        clauses.push_back(std::move(c));
    }
    return RectRegion(std::move(clauses));
}

Eigen::VectorXd evaluate_region(const RectRegion& region, const Eigen::MatrixXd& a,
                                const std::vector<std::string>& names) {
    const int n = static_cast<int>(a.rows());
    Eigen::VectorXd ind = Eigen::VectorXd::Ones(n);
    for (const Clause& c : region.clauses()) {
        const int j = find_column(names, c.var);
        if (j < 0) throw SchemaError("region variable not found among exposures: " + c.var);
        for (int i = 0; i < n; ++i) {
            if (ind[i] != 0.0 && !c.contains(a(i, j))) ind[i] = 0.0;
        }
    }
    return ind;
}

RectRegion union_region(std::span<const RectRegion> regions) {
    if (regions.empty()) throw ConfigError("union_region: no regions");
    const std::string key = regions.front().varset_key();
    for (const RectRegion& r : regions) {
        if (r.varset_key() != key) {
            throw ConfigError("union_region: mixed varsets (" + key + " vs " + r.varset_key() + ")");
        }
    }
    std::vector<Clause> merged = regions.front().clauses();
    for (std::size_t r = 1; r < regions.size(); ++r) {
        const auto& clauses = regions[r].clauses();
        for (std::size_t j = 0; j < merged.size(); ++j) {
            const Clause& c = clauses[j];
            Clause& m = merged[j];
            if (c.lower < m.lower) {
                m.lower = c.lower;
                m.lower_closed = c.lower_closed;
            } else if (c.lower == m.lower) {
                m.lower_closed = m.lower_closed || c.lower_closed;
            }
            if (c.upper > m.upper) {
                m.upper = c.upper;
                m.upper_closed = c.upper_closed;
            } else if (c.upper == m.upper) {
                m.upper_closed = m.upper_closed || c.upper_closed;
            }
        }
    }
    return RectRegion(std::move(merged));
}

}  // namespace mixtree
