#include "mixtree/simulation.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"
#include "mixtree/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixtree {

namespace {

constexpr double kAgeMean = 37.0, kAgeSd = 3.0;
constexpr double kBmiMean = 20.0, kBmiSd = 1.0;

struct Covariates {
    double age, bmi, sex;
    double z_age() const { return (age - kAgeMean) / kAgeSd; }
    double z_bmi() const { return (bmi - kBmiMean) / kBmiSd; }
};

Covariates draw_covariates(Rng& rng) {
    return {rng.normal(kAgeMean, kAgeSd), rng.normal(kBmiMean, kBmiSd),
            static_cast<double>(rng.bernoulli(0.5))};
}

Clause band(const std::string& var, double lo, double hi) {
    Clause c;
    c.var = var;
    c.lower = lo;
    c.upper = hi;
    c.lower_closed = true;
    c.upper_closed = false;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// 2D DGP
// ---------------------------------------------------------------------------

Dgp2d::Dgp2d(std::uint64_t study_seed, int oracle_draws, int large_n) {
    config_.seed = study_seed;
    config_.grid = 5;
    config_.noise_sd = 0.1;
    // Per-cell multinomial coefficients on (1, z_age, z_bmi, sex).
    Rng rng(derive_seed(study_seed, 11));
    config_.beta.resize(25, 4);
    const double means[4] = {0.3, 0.4, 0.5, 0.5};
    for (int c = 0; c < 25; ++c) {
        for (int j = 0; j < 4; ++j) config_.beta(c, j) = rng.normal(means[j], 2.0);
    }
    build(oracle_draws, large_n);
}

Dgp2d::Dgp2d(Dgp2dConfig config, int oracle_draws, int large_n) : config_(std::move(config)) {
    if (config_.beta.rows() != 25 || config_.beta.cols() != 4) {
        throw ConfigError("Dgp2d: beta must be 25 x 4");
    }
    build(oracle_draws, large_n);
}

Eigen::VectorXd Dgp2d::cell_probabilities(double z_age, double z_bmi, double sex) const {
    Eigen::Vector4d v(1.0, z_age, z_bmi, sex);
    Eigen::VectorXd logits = config_.beta * v;
    const double top = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - top).exp();
    return p / p.sum();
}

void Dgp2d::build(int oracle_draws, int large_n) {
    cell_mu_.resize(25);
    for (int k = 1; k <= 5; ++k) {
        for (int l = 1; l <= 5; ++l) cell_mu_[(k - 1) * 5 + (l - 1)] = cell_outcome(k, l);
    }

    // Conditional cell probabilities over a large covariate sample.
    Rng rng(derive_seed(config_.seed, 12));
    oracle_p_.resize(oracle_draws, 25);
    for (int i = 0; i < oracle_draws; ++i) {
        const Covariates w = draw_covariates(rng);
        oracle_p_.row(i) = cell_probabilities(w.z_age(), w.z_bmi(), w.sex).transpose();
    }

    // True region: the rectangle on the grid with the maximum ARE.
    double best = -std::numeric_limits<double>::infinity();
    for (int k1 = 1; k1 <= 5; ++k1) {
        for (int k2 = k1; k2 <= 5; ++k2) {
            for (int l1 = 1; l1 <= 5; ++l1) {
                for (int l2 = l1; l2 <= 5; ++l2) {
                    if (k1 == 1 && k2 == 5 && l1 == 1 && l2 == 5) continue;  // full grid
                    const RectRegion cand(
                        {band("A1", k1, k2 + 0.5), band("A2", l1, l2 + 0.5)});
                    const double psi = region_are(cand);
                    if (psi > best) {
                        best = psi;
                        true_region_ = cand;
                    }
                }
            }
        }
    }
    psi_true_ = best;

    // Large exposure sample for confusion metrics.
    Rng lrng(derive_seed(config_.seed, 13));
    large_a_.resize(large_n, 2);
    for (int i = 0; i < large_n; ++i) {
        const Covariates w = draw_covariates(lrng);
        const int cell = lrng.categorical(cell_probabilities(w.z_age(), w.z_bmi(), w.sex).array());
        large_a_(i, 0) = cell / 5 + 1;
        large_a_(i, 1) = cell % 5 + 1;
    }
}

double Dgp2d::region_are(const RectRegion& region, double* mc_se) const {
    // Cell membership of the 1-based grid values.
    Eigen::Array<bool, Eigen::Dynamic, 1> in_region(25);
    int covered = 0;
    for (int c = 0; c < 25; ++c) {
        const double values[2] = {static_cast<double>(c / 5 + 1), static_cast<double>(c % 5 + 1)};
        in_region[c] = region.contains(std::span<const double>(values, 2),
                                       std::span<const std::string>(a_names_.data(), 2));
        if (in_region[c]) covered++;
    }
    if (covered == 0 || covered == 25) {
        throw NumericError("region covers no proper subset of the exposure grid");
    }

    const int b = static_cast<int>(oracle_p_.rows());
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < b; ++i) {
        double p1 = 0.0, p0 = 0.0, m1 = 0.0, m0 = 0.0;
        for (int c = 0; c < 25; ++c) {
            const double p = oracle_p_(i, c);
            if (in_region[c]) {
                p1 += p;
                m1 += p * cell_mu_[c];
            } else {
                p0 += p;
                m0 += p * cell_mu_[c];
            }
        }
        const double d = m1 / p1 - m0 / p0;
        sum += d;
        sumsq += d * d;
    }
    const double mean = sum / b;
    if (mc_se != nullptr) {
        const double var = std::max(0.0, sumsq / b - mean * mean);
        *mc_se = std::sqrt(var / b);
    }
    return mean;
}

Eigen::VectorXd Dgp2d::marginal_cell_probabilities() const { return oracle_p_.colwise().mean(); }

Dataset Dgp2d::generate(int n, std::uint64_t seed) const {
    if (n < 25) throw ConfigError("gen_2d: need n >= 25");
    Rng rng(seed);
    Eigen::MatrixXd w(n, 3), a(n, 2);
    Eigen::VectorXd y(n);
    auto draw_all = [&]() {
        int in_region = 0;
        for (int i = 0; i < n; ++i) {
            const Covariates cov = draw_covariates(rng);
            const int cell = rng.categorical(cell_probabilities(cov.z_age(), cov.z_bmi(), cov.sex).array());
            const int k = cell / 5 + 1, l = cell % 5 + 1;
            w(i, 0) = cov.age;
            w(i, 1) = cov.bmi;
            w(i, 2) = cov.sex;
            a(i, 0) = k;
            a(i, 1) = l;
            y[i] = cell_outcome(k, l) + 0.2 * cov.age + 0.4 * cov.sex + rng.normal(0.0, config_.noise_sd);
            const double values[2] = {a(i, 0), a(i, 1)};
            if (true_region_.contains(std::span<const double>(values, 2),
                                      std::span<const std::string>(a_names_.data(), 2))) {
                in_region++;
            }
        }
        return in_region;
    };
    // Resample until the true maximal region is populated.
    int tries = 0;
    while (draw_all() == 0) {
        if (++tries >= 50) {
            // Force one row into the region rather than loop forever.
            const Covariates cov = draw_covariates(rng);
            int k = 0, l = 0;
            for (int c = 0; c < 25; ++c) {
                const double values[2] = {static_cast<double>(c / 5 + 1),
                                          static_cast<double>(c % 5 + 1)};
                if (true_region_.contains(std::span<const double>(values, 2),
                                          std::span<const std::string>(a_names_.data(), 2))) {
                    k = c / 5 + 1;
                    l = c % 5 + 1;
                    break;
                }
            }
            w(n - 1, 0) = cov.age;
            w(n - 1, 1) = cov.bmi;
            w(n - 1, 2) = cov.sex;
            a(n - 1, 0) = k;
            a(n - 1, 1) = l;
            y[n - 1] =
                cell_outcome(k, l) + 0.2 * cov.age + 0.4 * cov.sex + rng.normal(0.0, config_.noise_sd);
            break;
        }
    }
    return Dataset::make(std::move(w), std::move(a), std::move(y), {"age", "bmi", "sex"}, a_names_);
}

Gen2dResult gen_2d(int n, std::uint64_t seed) {
    Dgp2d dgp(seed, 20000, 1000);  // light oracle: enough to locate the true region
    return {dgp.generate(n, derive_seed(seed, 2)), dgp.true_region(), dgp.config()};
}

double truth_2d(const RectRegion& region, const Dgp2dConfig& config, int b, double* mc_se) {
    const Dgp2d dgp(config, b, 1000);
    return dgp.region_are(region, mc_se);
}

// ---------------------------------------------------------------------------
// 3D DGP
// ---------------------------------------------------------------------------

Dgp3d::Dgp3d(std::uint64_t study_seed, int large_n) {
    config_.seed = study_seed;
    config_.corr << 1.0, 0.5, 0.8, 0.5, 1.0, 0.7, 0.8, 0.7, 1.0;
    config_.cuts.setZero();
    config_.cell_beta = Eigen::VectorXd::Zero(8);
    config_.cell_beta[7] = 3.0;  // the all-high octant carries the effect
    Rng rng(derive_seed(study_seed, 21));
    config_.assign_beta.resize(8, 4);
    for (int c = 0; c < 8; ++c) {
        for (int j = 0; j < 4; ++j) config_.assign_beta(c, j) = rng.normal(0.0, 0.5);
    }
    build(large_n);
}

Dgp3d::Dgp3d(Dgp3dConfig config, int large_n) : config_(std::move(config)) { build(large_n); }

void Dgp3d::build(int large_n) {
    if (config_.cell_beta.size() != 8) throw ConfigError("Dgp3d: need 8 cell betas");
    psi_true_ = truth_3d(config_.cell_beta);
    int max_cell = 0;
    config_.cell_beta.maxCoeff(&max_cell);

    // The maximal cell's box: per exposure, below or above its cut.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<Clause> clauses;
    for (int j = 0; j < 3; ++j) {
        const bool high = (max_cell >> j) & 1;
        Clause c;
        c.var = a_names_[j];
        if (high) {
            c.lower = config_.cuts[j];
            c.lower_closed = true;
        } else {
            c.upper = config_.cuts[j];
            c.upper_closed = false;
        }
        c.lower = high ? config_.cuts[j] : -inf;
        c.upper = high ? inf : config_.cuts[j];
        clauses.push_back(c);
    }
    true_region_ = RectRegion(clauses);

    chol_ = Eigen::LLT<Eigen::Matrix3d>(config_.corr).matrixL();

    std::vector<int> cells;
    Dataset large = generate_with_cells(large_n, derive_seed(config_.seed, 22), &cells);
    large_a_ = large.a;
    large_cell_beta_.resize(large_n);
    for (int i = 0; i < large_n; ++i) large_cell_beta_[i] = config_.cell_beta[cells[i]];
}

Dataset Dgp3d::generate(int n, std::uint64_t seed) const {
    return generate_with_cells(n, seed, nullptr);
}

Dataset Dgp3d::generate_with_cells(int n, std::uint64_t seed, std::vector<int>* cells) const {
    Rng rng(seed);
    Eigen::MatrixXd w(n, 3), a(n, 3);
    Eigen::VectorXd y(n);
    if (cells != nullptr) cells->resize(n);
    for (int i = 0; i < n; ++i) {
        const Covariates cov = draw_covariates(rng);
        Eigen::Vector4d v(1.0, cov.z_age(), cov.z_bmi(), cov.sex);
        Eigen::VectorXd logits = config_.assign_beta * v;
        Eigen::ArrayXd p = (logits.array() - logits.maxCoeff()).exp();
        const int cell = rng.categorical(p);
        if (cells != nullptr) (*cells)[i] = cell;

        // Correlated latent normals -> uniforms -> truncated back-transform
        // into the cell's box, preserving local dependence.
        Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        Eigen::Vector3d latent = chol_ * z;
        for (int j = 0; j < 3; ++j) {
            const bool high = (cell >> j) & 1;
            const double u = norm_cdf(latent[j]);
            const double cut_u = norm_cdf(config_.cuts[j]);
            const double lo = high ? cut_u : 0.0;
            const double hi = high ? 1.0 : cut_u;
            const double mapped = std::min(1.0 - 1e-12, std::max(1e-12, lo + u * (hi - lo)));
            a(i, j) = norm_quantile(mapped);
        }

        w(i, 0) = cov.age;
        w(i, 1) = cov.bmi;
        w(i, 2) = cov.sex;
        y[i] = config_.beta0 + config_.cell_beta[cell] + config_.beta_w1 * cov.z_age() +
               config_.beta_w2 * cov.z_bmi() + rng.normal(0.0, config_.sigma);
    }
    return Dataset::make(std::move(w), std::move(a), std::move(y), {"age", "bmi", "sex"}, a_names_);
}

double Dgp3d::region_are(const RectRegion& region, double* mc_se) const {
    const Eigen::VectorXd ind = evaluate_region(region, large_a_, a_names_);
    const double n1 = ind.sum();
    const double n0 = ind.size() - n1;
    if (n1 == 0.0 || n0 == 0.0) {
        throw NumericError("region covers none or all of the large sample");
    }
    const double m1 = (ind.array() * large_cell_beta_.array()).sum() / n1;
    const double m0 = ((1.0 - ind.array()) * large_cell_beta_.array()).sum() / n0;
    if (mc_se != nullptr) {
        // Binomial-style error of the two conditional means.
        const Eigen::ArrayXd r1 = (large_cell_beta_.array() - m1) * ind.array();
        const Eigen::ArrayXd r0 = (large_cell_beta_.array() - m0) * (1.0 - ind.array());
        *mc_se = std::sqrt(r1.square().sum() / (n1 * n1) + r0.square().sum() / (n0 * n0));
    }
    return m1 - m0;
}

Gen3dResult gen_3d(int n, std::uint64_t seed, const Eigen::VectorXd& betas) {
    Dgp3dConfig config;
    config.seed = seed;
    config.corr << 1.0, 0.5, 0.8, 0.5, 1.0, 0.7, 0.8, 0.7, 1.0;
    config.cell_beta = betas;
    Rng rng(derive_seed(seed, 21));
    config.assign_beta.resize(8, 4);
    for (int c = 0; c < 8; ++c) {
        for (int j = 0; j < 4; ++j) config.assign_beta(c, j) = rng.normal(0.0, 0.5);
    }
    Dgp3d dgp(config, 1000);
    return {dgp.generate(n, derive_seed(seed, 2)), dgp.true_region(), dgp.config()};
}

double truth_3d(const Eigen::VectorXd& betas) {
    if (betas.size() < 2) throw ConfigError("truth_3d: need at least two cells");
    int max_cell = 0;
    const double top = betas.maxCoeff(&max_cell);
    int ties = 0;
    for (int c = 0; c < betas.size(); ++c) {
        if (betas[c] == top) ties++;
    }
    if (ties > 1) throw ConfigError("degenerate betas: no unique maximal cell");
    const double rest = (betas.sum() - top) / (betas.size() - 1);
    return top - rest;
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

std::string estimator_name(EstimatorKind e) {
    switch (e) {
        case EstimatorKind::PooledTmle: return "pooled_tmle";
        case EstimatorKind::MeanKfold: return "mean_kfold";
        case EstimatorKind::Ivm: return "ivm";
    }
    return "?";
}

std::string truth_name(TruthKind t) {
    return t == TruthKind::Oracle ? "oracle" : "data_adaptive";
}

void confusion_counts(const RectRegion& estimated, const DgpOracle& dgp, long* tp, long* tn,
                      long* fp, long* fn) {
    const Eigen::VectorXd est = evaluate_region(estimated, dgp.large_exposures(), dgp.exposure_names());
    const Eigen::VectorXd truth =
        evaluate_region(dgp.true_region(), dgp.large_exposures(), dgp.exposure_names());
    long a = 0, b = 0, c = 0, d = 0;
    for (int i = 0; i < est.size(); ++i) {
        if (truth[i] != 0.0) {
            (est[i] != 0.0 ? a : d)++;
        } else {
            (est[i] != 0.0 ? c : b)++;
        }
    }
    *tp = a;
    *tn = b;
    *fp = c;
    *fn = d;
}

std::vector<EvalRecord> evaluate_run(const CvReport& report, const DgpOracle& dgp, int n) {
    // Pick the joint group to evaluate: exact varset match with the true
    // region when present, otherwise the strongest joint discovery.
    const GroupReport* group = nullptr;
    const std::string want = dgp.true_region().varset_key();
    for (const GroupReport& g : report.groups) {
        if (!g.marginal && g.folds_estimated > 0 && g.key == want) group = &g;
    }
    if (group == nullptr) {
        for (const GroupReport& g : report.groups) {
            if (g.marginal || g.folds_estimated == 0) continue;
            if (group == nullptr ||
                (report.direction == Direction::Max ? g.pooled.psi > group->pooled.psi
                                                    : g.pooled.psi < group->pooled.psi)) {
                group = &g;
            }
        }
    }

    std::vector<EvalRecord> records;
    const auto estimators = {EstimatorKind::PooledTmle, EstimatorKind::MeanKfold, EstimatorKind::Ivm};
    const auto targets = {TruthKind::Oracle, TruthKind::DataAdaptive};
    if (group == nullptr) {
        for (EstimatorKind e : estimators) {
            for (TruthKind t : targets) {
                EvalRecord rec;
                rec.estimator = e;
                rec.target = t;
                rec.n = n;
                rec.no_discovery = true;
                rec.truth = t == TruthKind::Oracle ? dgp.psi_true() : 0.0;
                records.push_back(rec);
            }
        }
        return records;
    }

    long tp = 0, tn = 0, fp = 0, fn = 0;
    confusion_counts(group->union_region, dgp, &tp, &tn, &fp, &fn);

    // Per-fold estimates and their regions applied to the population.
    std::vector<double> fold_psi, fold_lo, fold_hi, fold_se, fold_da;
    for (const FoldResult& fr : report.folds) {
        for (const FoldRegionResult& rr : fr.regions) {
            if (rr.finding.group_key != group->key || rr.skipped) continue;
            fold_psi.push_back(rr.tmle.psi);
            fold_lo.push_back(rr.tmle.ci95.first);
            fold_hi.push_back(rr.tmle.ci95.second);
            fold_se.push_back(rr.tmle.se);
            fold_da.push_back(dgp.region_are(rr.finding.region));
        }
    }
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / v.size();
    };

    const double union_da = dgp.region_are(group->union_region);
    for (EstimatorKind e : estimators) {
        double est = 0.0, se = 0.0, lo = 0.0, hi = 0.0, da = union_da;
        switch (e) {
            case EstimatorKind::PooledTmle:
                est = group->pooled.psi;
                se = group->pooled.se;
                lo = group->pooled.ci95.first;
                hi = group->pooled.ci95.second;
                break;
            case EstimatorKind::MeanKfold:
                est = mean_of(fold_psi);
                se = mean_of(fold_se);
                lo = mean_of(fold_lo);
                hi = mean_of(fold_hi);
                da = mean_of(fold_da);  // mean of fold rules applied to P0
                break;
            case EstimatorKind::Ivm:
                est = group->ivm.theta;
                se = group->ivm.se;
                lo = group->ivm.ci95.first;
                hi = group->ivm.ci95.second;
                break;
        }
        for (TruthKind t : targets) {
            EvalRecord rec;
            rec.estimator = e;
            rec.target = t;
            rec.n = n;
            rec.estimate = est;
            rec.truth = t == TruthKind::Oracle ? dgp.psi_true() : da;
            rec.bias = est - rec.truth;
            rec.sqrt_n_bias = std::sqrt(static_cast<double>(n)) * rec.bias;
            rec.variance = se * se;
            rec.n_mse = n * (rec.bias * rec.bias + rec.variance);
            rec.covered = (rec.truth >= lo && rec.truth <= hi);
            rec.tp = tp;
            rec.tn = tn;
            rec.fp = fp;
            rec.fn = fn;
            records.push_back(rec);
        }
    }
    return records;
}

}  // namespace mixtree
