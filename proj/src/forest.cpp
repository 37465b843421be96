#include "mixtree/forest.hpp"

#include "mixtree/error.hpp"

namespace mixtree {

ForestModel fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* offset, const Eigen::VectorXd* weights,
                              const LearnerSpec& spec, Rng& rng) {
    spec.validate();
    const int n = static_cast<int>(x.rows());
    ForestModel forest;
    forest.trees_.reserve(spec.n_trees);
    LearnerSpec tree = spec;
    tree.kind = LearnerKind::RegressionTree;
    tree.alpha = 1.0;  // forests rely on averaging, not per-split gates
    for (int t = 0; t < spec.n_trees; ++t) {
        std::vector<int> rows =
            spec.bootstrap ? rng.bootstrap(n) : rng.subsample(n, spec.row_fraction);
        forest.trees_.push_back(fit_regression_tree(x, y, offset, weights, tree, &rng, &rows));
    }
    return forest;
}

Eigen::VectorXd ForestModel::predict_link(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
    for (const TreeModel& t : trees_) sum += t.predict_link(x);
    return sum / static_cast<double>(trees_.size());
}

}  // namespace mixtree
