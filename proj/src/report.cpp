#include "mixtree/report.hpp"

#include "mixtree/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>

namespace mixtree {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

nlohmann::json tmle_json(const TmleResult& t) {
    nlohmann::json j;
    j["are"] = t.psi;
    j["epsilon"] = t.epsilon;
    j["se"] = t.se;
    j["ci_lower"] = t.ci95.first;
    j["ci_upper"] = t.ci95.second;
    j["p_value"] = t.p_value;
    j["n"] = static_cast<int>(t.ic.size());
    j["ic_mean"] = t.ic.size() > 0 ? t.ic.mean() : 0.0;
    j["truncation_fraction"] = t.truncation_fraction;
    if (!t.warnings.empty()) j["warnings"] = t.warnings;
    return j;
}

}  // namespace

std::string direction_name(Direction d) { return d == Direction::Max ? "max" : "min"; }

Direction direction_from_name(const std::string& name) {
    if (name == "max") return Direction::Max;
    if (name == "min") return Direction::Min;
    throw ConfigError("direction must be 'max' or 'min', got '" + name + "'");
}

nlohmann::json report_json(const CvReport& report, const nlohmann::json& config_echo) {
    nlohmann::json j;
    j["schema"] = "mixtree-report-v1";
    j["seed"] = report.seed;
    j["k"] = report.k;
    j["direction"] = direction_name(report.direction);
    j["outcome_scale"] = {{"y_min", report.y_min}, {"y_max", report.y_max}};
    j["config"] = config_echo;

    nlohmann::json groups = nlohmann::json::array();
    for (const GroupReport& g : report.groups) {
        nlohmann::json jg;
        jg["key"] = g.key;
        jg["marginal"] = g.marginal;
        if (g.marginal) {
            jg["exposure"] = g.exposure;
            jg["ordinal"] = g.ordinal;
            jg["union_reference"] = g.union_reference.to_json();
        }
        jg["union_region"] = g.union_region.to_json();
        jg["stability"] = g.stability;
        jg["folds_found"] = g.folds_found;
        jg["folds_estimated"] = g.folds_estimated;
        jg["contributing_folds"] = g.contributing_folds;
        jg["highlighted"] = g.highlighted;
        if (g.folds_estimated > 0) {
            jg["pooled"] = tmle_json(g.pooled);
            jg["pooled"]["p_value_adj"] = g.pooled_p_adj;
            jg["ivm"] = {{"are", g.ivm.theta},      {"se", g.ivm.se},
                         {"ci_lower", g.ivm.ci95.first}, {"ci_upper", g.ivm.ci95.second},
                         {"p_value", g.ivm.p_value},     {"p_value_adj", g.ivm_p_adj}};
        }
        groups.push_back(std::move(jg));
    }
    j["groups"] = groups;

    nlohmann::json folds = nlohmann::json::array();
    for (const FoldResult& f : report.folds) {
        nlohmann::json jf;
        jf["fold"] = f.fold;
        jf["backfit"] = {{"iterations", f.joint_diag.iterations},
                         {"converged", f.joint_diag.converged},
                         {"final_delta", f.joint_diag.final_delta}};
        nlohmann::json regions = nlohmann::json::array();
        for (const FoldRegionResult& r : f.regions) {
            nlohmann::json jr;
            jr["key"] = r.finding.group_key;
            jr["region"] = r.finding.region.to_json();
            jr["marginal"] = r.finding.marginal;
            if (r.finding.marginal) jr["reference"] = r.finding.reference.to_json();
            if (!r.finding.marginal) jr["coefficient"] = r.finding.coefficient;
            if (r.skipped) {
                jr["skipped"] = true;
                jr["skip_reason"] = r.skip_reason;
            } else {
                jr["tmle"] = tmle_json(r.tmle);
                jr["tmle"]["p_value_adj"] = r.p_adj;
            }
            regions.push_back(std::move(jr));
        }
        jf["regions"] = regions;
        if (!f.warnings.empty()) jf["warnings"] = f.warnings;
        folds.push_back(std::move(jf));
    }
    j["folds"] = folds;
    if (!report.warnings.empty()) j["warnings"] = report.warnings;
    return j;
}

std::string pooled_csv(const CvReport& report) {
    std::ostringstream out;
    out << "estimator,varset,are,se,ci_lower,ci_upper,p_value,p_value_adj,union_rule,stability,"
           "folds_found,folds_estimated\n";
    for (const GroupReport& g : report.groups) {
        if (g.folds_estimated == 0) continue;
        const std::string rule = "\"" + g.union_region.canonical() + "\"";
        out << "pooled_tmle," << g.key << ',' << num(g.pooled.psi) << ',' << num(g.pooled.se) << ','
            << num(g.pooled.ci95.first) << ',' << num(g.pooled.ci95.second) << ','
            << num(g.pooled.p_value) << ',' << num(g.pooled_p_adj) << ',' << rule << ','
            << num(g.stability) << ',' << g.folds_found << ',' << g.folds_estimated << '\n';
        out << "ivm," << g.key << ',' << num(g.ivm.theta) << ',' << num(g.ivm.se) << ','
            << num(g.ivm.ci95.first) << ',' << num(g.ivm.ci95.second) << ',' << num(g.ivm.p_value)
            << ',' << num(g.ivm_p_adj) << ',' << rule << ',' << num(g.stability) << ','
            << g.folds_found << ',' << g.folds_estimated << '\n';
    }
    return out.str();
}

std::string kfold_csv(const CvReport& report) {
    std::ostringstream out;
    out << "fold,varset,are,se,ci_lower,ci_upper,p_value,p_value_adj,rule,skipped,skip_reason\n";
    for (const FoldResult& f : report.folds) {
        for (const FoldRegionResult& r : f.regions) {
            out << f.fold << ',' << r.finding.group_key << ',';
            if (r.skipped) {
                out << ",,,,,,\"" << r.finding.region.canonical() << "\",1,\"" << r.skip_reason << "\"\n";
            } else {
                out << num(r.tmle.psi) << ',' << num(r.tmle.se) << ',' << num(r.tmle.ci95.first) << ','
                    << num(r.tmle.ci95.second) << ',' << num(r.tmle.p_value) << ',' << num(r.p_adj)
                    << ",\"" << r.finding.region.canonical() << "\",0,\n";
            }
        }
    }
    return out.str();
}

}  // namespace mixtree
