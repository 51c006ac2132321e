#include "dataset.hpp"

#include <string>

namespace cci {

void Dataset::validate(bool require_nonnegative_outcome) const {
    const Eigen::Index m = y.size();
    require(income.size() == m && static_cast<Eigen::Index>(exposure.size()) == m &&
                covariates.rows() == m,
            ErrorCode::invalid_argument, "dataset: column lengths differ");
    require(m > 0, ErrorCode::invalid_argument, "dataset: empty");
    require(y.allFinite() && income.allFinite() && covariates.allFinite(),
            ErrorCode::invalid_argument, "dataset: non-finite values");
    require(n_levels >= 1, ErrorCode::invalid_argument, "dataset: no exposure levels");
    require(!require_nonnegative_outcome || (y.array() >= 0.0).all(),
            ErrorCode::invalid_argument, "dataset: health outcome must be nonnegative");
    require(y.mean() > 0.0, ErrorCode::degenerate_outcome,
            "dataset: mean outcome must be positive");
    require(covariates.cols() >= 1 && (covariates.col(0).array() == 1.0).all(),
            ErrorCode::invalid_argument, "dataset: covariates must carry an intercept column");
    std::vector<Eigen::Index> count(static_cast<size_t>(n_levels), 0);
    for (int e : exposure) {
        require(e >= 0 && e < n_levels, ErrorCode::invalid_argument,
                "dataset: exposure level out of range");
        ++count[static_cast<size_t>(e)];
    }
    for (int k = 0; k < n_levels; ++k)
        if (count[static_cast<size_t>(k)] == 0)
            fail(ErrorCode::empty_class,
                 "dataset: exposure level " + std::to_string(k) + " is empty");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    out.y.resize(m);
    out.income.resize(m);
    out.exposure.resize(static_cast<size_t>(m));
    out.covariates.resize(m, covariates.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index j = idx[static_cast<size_t>(i)];
        out.y[i] = y[j];
        out.income[i] = income[j];
        out.exposure[static_cast<size_t>(i)] = exposure[static_cast<size_t>(j)];
        out.covariates.row(i) = covariates.row(j);
    }
    out.n_levels = n_levels;
    return out;
}

std::vector<Eigen::Index> Dataset::arm_indices(int level) const {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n(); ++i)
        if (exposure[static_cast<size_t>(i)] == level) idx.push_back(i);
    return idx;
}

Eigen::Index Dataset::arm_size(int level) const {
    return static_cast<Eigen::Index>(arm_indices(level).size());
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd out(raw.rows(), raw.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(raw.cols()) = raw;
    return out;
}

} // namespace cci
