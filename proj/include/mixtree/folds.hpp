#pragma once

#include <cstdint>
#include <vector>

namespace mixtree {

// Balanced K-fold assignment, reproducible from its seed. Labels are 0..k-1.
struct FoldSpec {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignment;

    std::vector<int> fold_rows(int fold) const;
    std::vector<int> complement_rows(int fold) const;
};

// Random balanced partition: every fold has floor(n/k) or ceil(n/k) rows.
FoldSpec kfold_split(int n, int k, std::uint64_t seed);

}  // namespace mixtree
