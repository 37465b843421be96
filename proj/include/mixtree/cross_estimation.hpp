#pragma once

#include "mixtree/backfit.hpp"
#include "mixtree/dataset.hpp"
#include "mixtree/folds.hpp"
#include "mixtree/region.hpp"
#include "mixtree/rule_ensemble.hpp"
#include "mixtree/tmle.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mixtree {

struct CrossEstConfig {
    int k = 10;
    Direction direction = Direction::Max;
    std::uint64_t seed = 1;
    double delta = 0.001;
    int max_iter = 10;
    double g_min = 0.025;
    bool run_joint = true;
    bool run_marginal = true;
    double stability_threshold = 0.75;  // report highlight filter
    int threads = 1;
    BackfitConfig backfit;
    NuisanceConfig nuisance;
};

// One region discovered on a fold's parameter-generating sample. Joint rules
// group across folds by exact varset; marginal contrasts by exposure and
// contrast ordinal (1 = first region above the reference).
struct RegionFinding {
    RectRegion region;
    std::string group_key;
    bool marginal = false;
    int ordinal = 0;
    double coefficient = 0.0;
    RectRegion reference;  // marginal only
};

struct FoldRegionResult {
    RegionFinding finding;
    bool skipped = false;
    std::string skip_reason;
    TmleResult tmle;  // meaningful when !skipped
    double p_adj = 1.0;
};

struct FoldResult {
    int fold = 0;
    std::vector<FoldRegionResult> regions;
    BackfitDiagnostics joint_diag;
    std::vector<std::string> warnings;
};

struct IvmResult {
    double theta = 0.0;
    double se = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};
    double p_value = 1.0;
};

struct GroupReport {
    std::string key;
    bool marginal = false;
    std::string exposure;  // marginal groups
    int ordinal = 0;
    RectRegion union_region;
    RectRegion union_reference;  // marginal groups
    double stability = 0.0;
    int folds_found = 0;
    int folds_estimated = 0;
    std::vector<int> contributing_folds;
    TmleResult pooled;     // single fluctuation over the stacked folds
    IvmResult ivm;
    double pooled_p_adj = 1.0;
    double ivm_p_adj = 1.0;
    bool highlighted = false;  // stability >= threshold
};

struct CvReport {
    std::uint64_t seed = 0;
    int k = 0;
    Direction direction = Direction::Max;
    double y_min = 0.0, y_max = 0.0;  // global outcome scale
    std::vector<FoldResult> folds;
    std::vector<GroupReport> groups;  // joint first, each block sorted by key
    std::vector<std::string> warnings;
};

// Cross-estimated K-fold analysis: per fold, discovery and nuisance training
// on the complement, TMLE on the fold; then union regions, stability, pooled
// TMLE and IVM pooling per group.
CvReport run_analysis(const Dataset& data, const CrossEstConfig& config);

// Single logistic fluctuation over the stacked cross-estimated quantities of
// all contributing folds; the influence curve is scaled by the stacked n.
TmleResult pool_tmle(const std::vector<const TmleResult*>& parts, const OutcomeScale& scale);

// Inverse-variance (harmonic) pooling of per-fold estimates (psi, se).
IvmResult pool_ivm(const std::vector<std::pair<double, double>>& estimates);

// Fraction of folds in which a rule with the given group key was found.
double stability_metric(int folds_found, int k);

}  // namespace mixtree
