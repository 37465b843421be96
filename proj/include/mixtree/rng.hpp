#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace mixtree {

// splitmix64 step; used to derive independent sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x51ed2701ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

// All randomness in the library flows through this engine so that a run is a
// pure function of its configured seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::mt19937_64& engine() { return engine_; }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double normal(double mean = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mean, sd)(engine_);
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    // Uniform integer in [0, n).
    int below(int n) { return static_cast<int>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_)); }

    // Index sampled according to (unnormalized, nonnegative) weights; inverse-CDF walk.
    int categorical(const Eigen::ArrayXd& weights) {
        const double total = weights.sum();
        double u = uniform() * total;
        for (int i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u <= 0.0) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

    Eigen::VectorXd normal_vector(int n, double mean = 0.0, double sd = 1.0) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = normal(mean, sd);
        return v;
    }

    std::vector<int> permutation(int n) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[below(i + 1)]);
        return idx;
    }

    // n draws with replacement from [0, n).
    std::vector<int> bootstrap(int n) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = below(n);
        return idx;
    }

    // floor(frac*n) distinct indices from [0, n), in increasing order.
    std::vector<int> subsample(int n, double frac) {
        int k = std::max(1, static_cast<int>(frac * n));
        std::vector<int> perm = permutation(n);
        perm.resize(k);
        std::sort(perm.begin(), perm.end());
        return perm;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mixtree
