#include "mixtree/folds.hpp"

#include "mixtree/error.hpp"
#include "mixtree/rng.hpp"

namespace mixtree {

std::vector<int> FoldSpec::fold_rows(int fold) const {
    std::vector<int> rows;
    for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
        if (assignment[i] == fold) rows.push_back(i);
    }
    return rows;
}

std::vector<int> FoldSpec::complement_rows(int fold) const {
    std::vector<int> rows;
    for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
        if (assignment[i] != fold) rows.push_back(i);
    }
    return rows;
}

FoldSpec kfold_split(int n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold_split: k must be >= 2");
    if (k > n) throw ConfigError("kfold_split: k exceeds sample size");
    Rng rng(seed);
    std::vector<int> perm = rng.permutation(n);
    FoldSpec spec;
    spec.k = k;
    spec.seed = seed;
    spec.assignment.resize(n);
    for (int i = 0; i < n; ++i) spec.assignment[perm[i]] = i % k;
    return spec;
}

}  // namespace mixtree
