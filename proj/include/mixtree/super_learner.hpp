#pragma once

#include "mixtree/learner.hpp"

#include <memory>

namespace mixtree {

enum class SlMode { Discrete, Convex };

// Cross-validated selection (discrete) or non-negative convex combination of
// the library members, refit on the full data.
class SuperLearnerModel : public Model {
public:
    Family family() const override { return family_; }
    Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const override;

    SlMode mode() const { return mode_; }
    // CV risk per library member; +inf marks a dropped member.
    const std::vector<double>& cv_risks() const { return cv_risks_; }
    int selected() const { return selected_; }
    const Eigen::VectorXd& member_weights() const { return weights_; }
    const std::vector<std::string>& member_names() const { return names_; }
    // Discrete mode: the refit winner.
    const Model& winner() const { return *members_.front(); }

    friend SuperLearnerModel super_learn(const std::vector<LearnerSpec>&, const Eigen::MatrixXd&,
                                         const Eigen::VectorXd&, const Eigen::VectorXd*,
                                         const Eigen::VectorXd*, int, SlMode, Rng&);

private:
    Family family_ = Family::Identity;
    SlMode mode_ = SlMode::Discrete;
    std::vector<std::string> names_;
    std::vector<double> cv_risks_;
    int selected_ = -1;
    Eigen::VectorXd weights_;
    std::vector<std::unique_ptr<Model>> members_;  // discrete: only the winner
    std::vector<int> member_index_;                // library index per fitted member
};

SuperLearnerModel super_learn(const std::vector<LearnerSpec>& library, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, const Eigen::VectorXd* offset,
                              const Eigen::VectorXd* weights, int v, SlMode mode, Rng& rng);

}  // namespace mixtree
