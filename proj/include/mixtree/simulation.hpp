#pragma once

#include "mixtree/cross_estimation.hpp"
#include "mixtree/dataset.hpp"
#include "mixtree/region.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mixtree {

// ---------------------------------------------------------------------------
// Two discrete exposures on a 5x5 grid; cell densities driven by covariates
// through a per-cell multinomial, outcome quadratic in the exposures with an
// interaction.
// ---------------------------------------------------------------------------
struct Dgp2dConfig {
    int grid = 5;
    Eigen::MatrixXd beta;  // 25 x 4 cell coefficients on (1, z_age, z_bmi, sex)
    double noise_sd = 0.1;
    std::uint64_t seed = 0;
};

// Common oracle surface for the evaluation harness.
class DgpOracle {
public:
    virtual ~DgpOracle() = default;
    virtual const RectRegion& true_region() const = 0;
    virtual double psi_true() const = 0;
    // ARE of an arbitrary region applied to the (approximated) population.
    virtual double region_are(const RectRegion& region, double* mc_se = nullptr) const = 0;
    virtual const Eigen::MatrixXd& large_exposures() const = 0;
    virtual const std::vector<std::string>& exposure_names() const = 0;
    virtual Dataset generate(int n, std::uint64_t seed) const = 0;
};

class Dgp2d : public DgpOracle {
public:
    explicit Dgp2d(std::uint64_t study_seed, int oracle_draws = 100000, int large_n = 500000);
    Dgp2d(Dgp2dConfig config, int oracle_draws = 100000, int large_n = 500000);

    const Dgp2dConfig& config() const { return config_; }
    const RectRegion& true_region() const override { return true_region_; }
    double psi_true() const override { return psi_true_; }
    double region_are(const RectRegion& region, double* mc_se = nullptr) const override;
    const Eigen::MatrixXd& large_exposures() const override { return large_a_; }
    const std::vector<std::string>& exposure_names() const override { return a_names_; }
    Dataset generate(int n, std::uint64_t seed) const override;

    // Exposure part of the outcome mean for cell (k, l), 1-based levels.
    static double cell_outcome(int k, int l) { return 0.2 * k * k + 0.5 * k * l + 0.5 * l * l; }
    // Mean conditional cell probabilities over the oracle covariate draws.
    Eigen::VectorXd marginal_cell_probabilities() const;

private:
    void build(int oracle_draws, int large_n);
    Eigen::VectorXd cell_probabilities(double z_age, double z_bmi, double sex) const;

    Dgp2dConfig config_;
    std::vector<std::string> a_names_{"A1", "A2"};
    Eigen::MatrixXd oracle_p_;   // oracle_draws x 25 conditional cell probabilities
    Eigen::VectorXd cell_mu_;    // 25 exposure-part outcome means
    Eigen::MatrixXd large_a_;    // large exposure sample for confusion metrics
    RectRegion true_region_;
    double psi_true_ = 0.0;
};

// Spec-style free functions.
struct Gen2dResult {
    Dataset data;
    RectRegion true_region;
    Dgp2dConfig config;
};
Gen2dResult gen_2d(int n, std::uint64_t seed);
double truth_2d(const RectRegion& region, const Dgp2dConfig& config, int b = 100000,
                double* mc_se = nullptr);

// ---------------------------------------------------------------------------
// Three correlated continuous exposures; one cut per exposure makes 8 cells,
// each with its own outcome level; one cell carries the maximum.
// ---------------------------------------------------------------------------
struct Dgp3dConfig {
    Eigen::Matrix3d corr;
    Eigen::Vector3d cuts = Eigen::Vector3d::Zero();
    Eigen::VectorXd cell_beta;     // 8 outcome levels, unique max
    double beta0 = 1.0;
    double beta_w1 = 0.3;
    double beta_w2 = 0.2;
    double sigma = 0.5;
    Eigen::MatrixXd assign_beta;   // 8 x 4 multinomial coefficients
    std::uint64_t seed = 0;
};

class Dgp3d : public DgpOracle {
public:
    explicit Dgp3d(std::uint64_t study_seed, int large_n = 500000);
    Dgp3d(Dgp3dConfig config, int large_n = 500000);

    const Dgp3dConfig& config() const { return config_; }
    const RectRegion& true_region() const override { return true_region_; }
    double psi_true() const override { return psi_true_; }
    double region_are(const RectRegion& region, double* mc_se = nullptr) const override;
    const Eigen::MatrixXd& large_exposures() const override { return large_a_; }
    const std::vector<std::string>& exposure_names() const override { return a_names_; }
    Dataset generate(int n, std::uint64_t seed) const override;

    // Exposures plus the chosen cell per row, for bound checks.
    Dataset generate_with_cells(int n, std::uint64_t seed, std::vector<int>* cells) const;

private:
    void build(int large_n);

    Dgp3dConfig config_;
    std::vector<std::string> a_names_{"A1", "A2", "A3"};
    Eigen::Matrix3d chol_;
    Eigen::MatrixXd large_a_;
    Eigen::VectorXd large_cell_beta_;  // outcome level per large-sample row
    RectRegion true_region_;
    double psi_true_ = 0.0;
};

struct Gen3dResult {
    Dataset data;
    RectRegion true_region;
    Dgp3dConfig config;
};
Gen3dResult gen_3d(int n, std::uint64_t seed, const Eigen::VectorXd& betas);
// max coefficient minus the mean of the others; rejects degenerate betas.
double truth_3d(const Eigen::VectorXd& betas);

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------
enum class EstimatorKind { PooledTmle, MeanKfold, Ivm };
enum class TruthKind { Oracle, DataAdaptive };

struct EvalRecord {
    EstimatorKind estimator = EstimatorKind::PooledTmle;
    TruthKind target = TruthKind::Oracle;
    int n = 0;
    bool no_discovery = false;
    double estimate = 0.0;
    double truth = 0.0;
    double bias = 0.0;
    double sqrt_n_bias = 0.0;
    double variance = 0.0;  // squared standard error of the estimator
    double n_mse = 0.0;     // n * (bias^2 + variance)
    bool covered = false;
    long tp = 0, tn = 0, fp = 0, fn = 0;
};

std::string estimator_name(EstimatorKind e);
std::string truth_name(TruthKind t);

// Confusion counts of an estimated region against the true region on the
// oracle's large exposure sample.
void confusion_counts(const RectRegion& estimated, const DgpOracle& dgp, long* tp, long* tn,
                      long* fp, long* fn);

// All estimator x target records for one analysis run. The report's joint
// group matching the true region's varset is evaluated (falling back to the
// strongest joint group); absent any joint group, records carry the
// no-discovery flag.
std::vector<EvalRecord> evaluate_run(const CvReport& report, const DgpOracle& dgp, int n);

}  // namespace mixtree
