#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixtree {

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

template <typename Derived>
auto expit(const Eigen::ArrayBase<Derived>& x) {
    return 1.0 / (1.0 + (-x).exp());
}

template <typename Derived>
auto logit(const Eigen::ArrayBase<Derived>& p) {
    return (p / (1.0 - p)).log();
}

inline double clamp01(double p, double tol) { return std::clamp(p, tol, 1.0 - tol); }

inline Eigen::ArrayXd clamp01(const Eigen::ArrayXd& p, double tol) {
    return p.max(tol).min(1.0 - tol);
}

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2_v<double>); }

// Two-sided normal p-value for a z statistic.
inline double normal_p_value(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2_v<double>); }

// Inverse standard normal CDF (Wichura's AS 241, double precision variant).
double norm_quantile(double p);

inline double mean(const Eigen::ArrayXd& v) { return v.mean(); }

inline double variance(const Eigen::ArrayXd& v) {
    if (v.size() < 2) return 0.0;
    const double m = v.mean();
    return (v - m).square().sum() / static_cast<double>(v.size() - 1);
}

inline double sd(const Eigen::ArrayXd& v) { return std::sqrt(variance(v)); }

inline double weighted_mean(const Eigen::ArrayXd& v, const Eigen::ArrayXd& w) {
    return (v * w).sum() / w.sum();
}

// Sample skewness and excess kurtosis (moment estimators).
double skewness(const Eigen::ArrayXd& v);
double excess_kurtosis(const Eigen::ArrayXd& v);

// Slope of the least-squares line through (x_i, y_i).
double ls_slope(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y);

}  // namespace mixtree
