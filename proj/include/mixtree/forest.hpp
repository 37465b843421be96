#pragma once

#include "mixtree/learner.hpp"
#include "mixtree/tree.hpp"

namespace mixtree {

// Bagged regression trees with per-split feature subsampling.
class ForestModel : public Model {
public:
    Family family() const override { return Family::Identity; }
    Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const override;

    const std::vector<TreeModel>& trees() const { return trees_; }

    friend ForestModel fit_random_forest(const Eigen::MatrixXd&, const Eigen::VectorXd&,
                                         const Eigen::VectorXd*, const Eigen::VectorXd*,
                                         const LearnerSpec&, Rng&);

private:
    std::vector<TreeModel> trees_;
};

ForestModel fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* offset, const Eigen::VectorXd* weights,
                              const LearnerSpec& spec, Rng& rng);

}  // namespace mixtree
