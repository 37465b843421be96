#include "mixtree/cross_estimation.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace mixtree {

namespace {

// Rows covered by region or reference, in original order.
std::vector<int> contrast_rows(const Eigen::VectorXd& region_ind, const Eigen::VectorXd& ref_ind) {
    std::vector<int> rows;
    for (int i = 0; i < region_ind.size(); ++i) {
        if (region_ind[i] != 0.0 || ref_ind[i] != 0.0) rows.push_back(i);
    }
    return rows;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& rows) {
    Eigen::VectorXd out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
    return out;
}

void run_fold(const Dataset& data, const CrossEstConfig& config, const FoldSpec& folds,
              const OutcomeScale& scale, int fold, FoldResult& out) {
    Rng rng(derive_seed(config.seed, 1000 + fold));
    out.fold = fold;

    const Dataset train = data.subset(folds.complement_rows(fold));
    const Dataset est = data.subset(folds.fold_rows(fold));

    std::vector<RegionFinding> findings;
    if (config.run_joint) {
        JointBackfitResult jb =
            backfit_joint(train.a, train.w, train.y, train.a_names, config.backfit, rng);
        out.joint_diag = jb.diag;
        for (const auto& msg : jb.diag.warnings) out.warnings.push_back(msg);
        for (const auto& [key, cand] : best_rule_per_varset(jb.selected_rules, config.direction)) {
            RegionFinding f;
            f.region = cand.region;
            f.group_key = key;
            f.coefficient = cand.coefficient;
            findings.push_back(std::move(f));
        }
    }
    if (config.run_marginal) {
        for (int j = 0; j < train.n_exposures(); ++j) {
            MarginalBackfitResult mb = backfit_marginal(train.a.col(j), train.a_names[j], train.w,
                                                        train.y, config.backfit, rng);
            if (mb.regions.size() < 2) continue;
            const RectRegion& reference = mb.regions.front().region;
            for (std::size_t r = 1; r < mb.regions.size(); ++r) {
                RegionFinding f;
                f.region = mb.regions[r].region;
                f.marginal = true;
                f.ordinal = static_cast<int>(r);
                f.group_key = train.a_names[j] + "#" + std::to_string(r);
                f.reference = reference;
                findings.push_back(std::move(f));
            }
        }
    }

    for (RegionFinding& finding : findings) {
        FoldRegionResult rr;
        rr.finding = finding;
        try {
            NuisanceConfig ncfg = config.nuisance;
            ncfg.g_min = config.g_min;
            if (finding.marginal) {
                // Contrast each upper region against the reference: keep only
                // rows in one of the two regions, indicator marks the upper.
                const Eigen::VectorXd reg_tr = evaluate_region(finding.region, train.a, train.a_names);
                const Eigen::VectorXd ref_tr = evaluate_region(finding.reference, train.a, train.a_names);
                const std::vector<int> tr_rows = contrast_rows(reg_tr, ref_tr);
                if (tr_rows.size() < 4) throw PositivityError("too few contrast rows in training");
                const Dataset sub_train = train.subset(tr_rows);
                const Eigen::VectorXd ind_train = gather(reg_tr, tr_rows);

                const Eigen::VectorXd reg_es = evaluate_region(finding.region, est.a, est.a_names);
                const Eigen::VectorXd ref_es = evaluate_region(finding.reference, est.a, est.a_names);
                const std::vector<int> es_rows = contrast_rows(reg_es, ref_es);
                if (es_rows.empty()) throw PositivityError("no contrast rows in estimation sample");
                const Dataset sub_est = est.subset(es_rows);
                const Eigen::VectorXd ind_est = gather(reg_es, es_rows);

                const NuisanceFits nuis = fit_nuisance(sub_train, ind_train, ncfg, scale, rng);
                rr.tmle = tmle_estimate(sub_est, ind_est, nuis, scale);
            } else {
                const Eigen::VectorXd ind_train = evaluate_region(finding.region, train.a, train.a_names);
                const Eigen::VectorXd ind_est = evaluate_region(finding.region, est.a, est.a_names);
                const NuisanceFits nuis = fit_nuisance(train, ind_train, ncfg, scale, rng);
                rr.tmle = tmle_estimate(est, ind_est, nuis, scale);
            }
        } catch (const PositivityError& e) {
            rr.skipped = true;
            rr.skip_reason = e.what();
        } catch (const std::exception& e) {
            rr.skipped = true;
            rr.skip_reason = std::string("estimation failed: ") + e.what();
        }
        out.regions.push_back(std::move(rr));
    }

    int estimated = 0;
    for (const auto& rr : out.regions) {
        if (!rr.skipped) estimated++;
    }
    for (auto& rr : out.regions) {
        if (!rr.skipped) rr.p_adj = std::min(1.0, rr.tmle.p_value * estimated);
    }
}

}  // namespace

double stability_metric(int folds_found, int k) {
    return static_cast<double>(folds_found) / static_cast<double>(k);
}

IvmResult pool_ivm(const std::vector<std::pair<double, double>>& estimates) {
    if (estimates.empty()) throw ConfigError("pool_ivm: no estimates");
    double wsum = 0.0, wpsi = 0.0;
    for (const auto& [psi, se] : estimates) {
        if (!(se > 0.0)) throw NumericError("pool_ivm: nonpositive standard error");
        const double w = 1.0 / (se * se);
        wsum += w;
        wpsi += w * psi;
    }
    IvmResult res;
    res.theta = wpsi / wsum;
    res.se = 1.0 / std::sqrt(wsum);
    res.ci95 = {res.theta - 1.96 * res.se, res.theta + 1.96 * res.se};
    res.p_value = normal_p_value(res.theta / res.se);
    return res;
}

TmleResult pool_tmle(const std::vector<const TmleResult*>& parts, const OutcomeScale& scale) {
    if (parts.empty()) throw ConfigError("pool_tmle: no fold results");
    int n = 0;
    for (const TmleResult* p : parts) n += static_cast<int>(p->y_scaled.size());

    TmleResult res;
    res.indicator.resize(n);
    res.y_scaled.resize(n);
    res.g1.resize(n);
    res.q_obs.resize(n);
    res.q1.resize(n);
    res.q0.resize(n);
    int at = 0;
    double trunc = 0.0;
    for (const TmleResult* p : parts) {
        const int m = static_cast<int>(p->y_scaled.size());
        res.indicator.segment(at, m) = p->indicator;
        res.y_scaled.segment(at, m) = p->y_scaled;
        res.g1.segment(at, m) = p->g1;
        res.q_obs.segment(at, m) = p->q_obs;
        res.q1.segment(at, m) = p->q1;
        res.q0.segment(at, m) = p->q0;
        trunc += p->truncation_fraction * m;
        at += m;
    }
    res.truncation_fraction = trunc / n;

    const Eigen::VectorXd h = clever_covariate(res.indicator, res.g1);
    res.epsilon = fluctuate(res.q_obs, h, res.y_scaled, &res.warnings);
    const Eigen::VectorXd qstar_obs = fluctuation_update(res.q_obs, h, res.epsilon);
    res.qstar1 = fluctuation_update(res.q1, (1.0 / res.g1.array()).matrix(), res.epsilon);
    res.qstar0 = fluctuation_update(res.q0, (-1.0 / (1.0 - res.g1.array())).matrix(), res.epsilon);

    const double psi_scaled = (res.qstar1 - res.qstar0).mean();
    res.psi = scale.unscale_difference(psi_scaled);
    res.ic = scale.range() *
             (h.array() * (res.y_scaled.array() - qstar_obs.array()) +
              (res.qstar1.array() - res.qstar0.array()) - psi_scaled);
    res.se = std::sqrt(res.ic.squaredNorm()) / n;
    res.ci95 = {res.psi - 1.96 * res.se, res.psi + 1.96 * res.se};
    res.p_value = res.se > 0.0 ? normal_p_value(res.psi / res.se) : (res.psi == 0.0 ? 1.0 : 0.0);
    return res;
}

CvReport run_analysis(const Dataset& data, const CrossEstConfig& config) {
    if (config.k < 2) throw ConfigError("run_analysis: K must be >= 2");
    if (data.n() < 2 * config.k) throw ConfigError("run_analysis: need n >= 2K");
    if (!config.run_joint && !config.run_marginal) {
        throw ConfigError("run_analysis: both joint and marginal analyses disabled");
    }

    CvReport report;
    report.seed = config.seed;
    report.k = config.k;
    report.direction = config.direction;

    const OutcomeScale scale = OutcomeScale::fit(data.y);
    report.y_min = scale.y_min();
    report.y_max = scale.y_max();

    CrossEstConfig cfg = config;
    cfg.backfit.delta = config.delta;
    cfg.backfit.max_iter = config.max_iter;
    cfg.nuisance.g_min = config.g_min;

    const FoldSpec folds = kfold_split(data.n(), config.k, derive_seed(config.seed, 1));
    report.folds.resize(config.k);

    const int threads = std::max(1, std::min(config.threads, config.k));
    if (threads == 1) {
        for (int f = 0; f < config.k; ++f) run_fold(data, cfg, folds, scale, f, report.folds[f]);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (int f = next.fetch_add(1); f < config.k; f = next.fetch_add(1)) {
                    run_fold(data, cfg, folds, scale, f, report.folds[f]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    // Group findings across folds by key.
    struct GroupAccum {
        std::vector<const FoldRegionResult*> found;
        std::vector<int> fold_ids;
    };
    std::map<std::string, GroupAccum> accum;
    for (const FoldResult& fr : report.folds) {
        for (const FoldRegionResult& rr : fr.regions) {
            GroupAccum& g = accum[rr.finding.group_key];
            g.found.push_back(&rr);
            g.fold_ids.push_back(fr.fold);
        }
    }

    for (const auto& [key, g] : accum) {
        GroupReport group;
        group.key = key;
        group.marginal = g.found.front()->finding.marginal;
        group.ordinal = g.found.front()->finding.ordinal;
        if (group.marginal) {
            const auto pos = key.find('#');
            group.exposure = key.substr(0, pos);
        }
        group.folds_found = static_cast<int>(g.found.size());
        group.stability = stability_metric(group.folds_found, config.k);
        group.highlighted = group.stability >= config.stability_threshold;
        group.contributing_folds = g.fold_ids;

        std::vector<RectRegion> regions;
        std::vector<RectRegion> references;
        std::vector<const TmleResult*> parts;
        std::vector<std::pair<double, double>> fold_estimates;
        for (const FoldRegionResult* rr : g.found) {
            regions.push_back(rr->finding.region);
            if (group.marginal) references.push_back(rr->finding.reference);
            if (!rr->skipped) {
                parts.push_back(&rr->tmle);
                fold_estimates.emplace_back(rr->tmle.psi, rr->tmle.se);
            }
        }
        group.union_region = union_region(regions);
        if (group.marginal) group.union_reference = union_region(references);
        group.folds_estimated = static_cast<int>(parts.size());
        if (!parts.empty()) {
            group.pooled = pool_tmle(parts, scale);
            group.ivm = pool_ivm(fold_estimates);
        }
        report.groups.push_back(std::move(group));
    }

    // Joint groups first, then marginal; each block ordered by key.
    std::stable_sort(report.groups.begin(), report.groups.end(),
                     [](const GroupReport& a, const GroupReport& b) {
                         if (a.marginal != b.marginal) return !a.marginal;
                         return a.key < b.key;
                     });

    // Bonferroni across the reported groups with estimates.
    int m = 0;
    for (const auto& gr : report.groups) {
        if (gr.folds_estimated > 0) m++;
    }
    for (auto& gr : report.groups) {
        if (gr.folds_estimated > 0) {
            gr.pooled_p_adj = std::min(1.0, gr.pooled.p_value * m);
            gr.ivm_p_adj = std::min(1.0, gr.ivm.p_value * m);
        }
    }

    for (const FoldResult& fr : report.folds) {
        for (const auto& msg : fr.warnings) {
            report.warnings.push_back("fold " + std::to_string(fr.fold) + ": " + msg);
        }
    }
    return report;
}

}  // namespace mixtree
