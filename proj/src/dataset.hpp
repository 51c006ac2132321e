#pragma once

#include <Eigen/Dense>
#include <vector>

#include "errors.hpp"

namespace cci {

// Observed data (Y, I, E, X). The covariate matrix carries the intercept in
// column 0; exposure levels are coded 0..K-1 with level 0 the contrast
// baseline.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd income;
    std::vector<int> exposure;
    Eigen::MatrixXd covariates;
    int n_levels = 0;

    Eigen::Index n() const { return y.size(); }

    // The health-outcome sign check is relaxed on the simulation path: the
    // reference data-generating process leaves a small negative tail on Y and
    // the estimators only need mean(Y) > 0.
    void validate(bool require_nonnegative_outcome = true) const;
    Dataset subset(const std::vector<Eigen::Index>& idx) const;
    std::vector<Eigen::Index> arm_indices(int level) const;
    Eigen::Index arm_size(int level) const;
};

// Prepends the intercept column.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& raw);

} // namespace cci
