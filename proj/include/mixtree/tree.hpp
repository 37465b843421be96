#pragma once

#include "mixtree/learner.hpp"
#include "mixtree/region.hpp"

#include <Eigen/Dense>

namespace mixtree {

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double cut = 0.0;  // left: x < cut, right: x >= cut
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target in the node
    int count = 0;
};

// CART-style greedy regression tree on the squared-error criterion. A split is
// kept only when the best candidate passes a two-sample t gate at level
// `alpha` (optionally Bonferroni-adjusted over the variables considered).
class TreeModel : public Model {
public:
    Family family() const override { return Family::Identity; }
    Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const override;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    int n_leaves() const;
    bool has_split() const { return nodes_.size() > 1; }

    // Terminal-leaf regions as path conjunctions, one interval per variable.
    // Empty when the tree never split.
    std::vector<RectRegion> leaf_regions(const std::vector<std::string>& names) const;
    // Path conjunctions of every node below the root (internal nodes and
    // leaves); the candidate basis for rule ensembles.
    std::vector<RectRegion> node_regions(const std::vector<std::string>& names) const;

    friend TreeModel fit_regression_tree(const Eigen::MatrixXd&, const Eigen::VectorXd&,
                                         const Eigen::VectorXd*, const Eigen::VectorXd*,
                                         const LearnerSpec&, Rng*, const std::vector<int>*);

private:
    std::vector<TreeNode> nodes_;
    void collect_regions(const std::vector<std::string>& names, bool leaves_only,
                         std::vector<RectRegion>& out) const;
};

// `rng` enables per-split feature subsampling (spec.feature_fraction < 1);
// `rows` restricts fitting to a row subset (for bagging) without copying x.
TreeModel fit_regression_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* offset, const Eigen::VectorXd* weights,
                              const LearnerSpec& spec, Rng* rng = nullptr,
                              const std::vector<int>* rows = nullptr);

}  // namespace mixtree
