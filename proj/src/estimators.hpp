#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dataset.hpp"
#include "nuisance.hpp"

namespace cci {

// Identification path: a1 factorizes E(Y Xi(I)|X,E=e) into M_e(x) E(Xi(I)|x,E=e),
// a2 uses the product regression directly.
enum class Variant { a1, a2 };

enum class EstimatorKind { naive, plug_in, one_step, est_eq };

struct EifVector {
    int level = 0;
    Variant variant = Variant::a1;
    Eigen::VectorXd values;       // fitted influence function per observation
    Eigen::VectorXd phi_a, phi_b; // centered A- and B-components
    double a = 0.0;               // A_j(P_n)
    double b = 0.0;               // B(P_n)
};

struct IndexEstimate {
    EstimatorKind estimator = EstimatorKind::plug_in;
    int level = 0;
    bool is_contrast = false; // value is theta(level) = G(level) - G(0)
    double value = 0.0;
    bool has_se = false;
    double se = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double conf_level = 0.95;
};

struct LevelEstimates {
    IndexEstimate plug_in;
    IndexEstimate one_step;
    IndexEstimate est_eq;
    EifVector eif;
};

struct NaiveOptions {
    double conf_level = 0.95;
    int bootstrap = 0; // 0: influence-function se; >0: bootstrap replicates
    uint64_t seed = 0;
};

// Naive concentration index 2 cov(Y, F(I)) / mean(Y) with the empirical CDF
// (proportion <=, ties counted).
IndexEstimate naive_index(const Eigen::VectorXd& y, const Eigen::VectorXd& income,
                          const NaiveOptions& opts = {});
IndexEstimate naive_index(const Dataset& data, std::optional<int> level,
                          const NaiveOptions& opts = {});

// Fitted efficient influence function, plug-in, one-step and estimating-
// equation estimators for G(level), all sharing one set of nuisance caches.
// pi is the cached n x K propensity matrix on the same rows as `data`.
EifVector eif(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
              Variant variant);
LevelEstimates estimate_level(const Dataset& data, const Eigen::MatrixXd& pi,
                              const LevelFits& fits, Variant variant, double conf_level);

IndexEstimate plug_in(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
                      Variant variant, double conf_level = 0.95);
IndexEstimate one_step(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
                       Variant variant, double conf_level = 0.95);
IndexEstimate est_eq(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
                     Variant variant, double conf_level = 0.95);

// theta(e) = G(e) - G(0) with the per-observation influence-function
// difference as the joint variance estimate. Both inputs must be computed on
// the same rows.
IndexEstimate contrast(const IndexEstimate& level_est, const EifVector& level_eif,
                       const IndexEstimate& base_est, const EifVector& base_eif);

} // namespace cci
