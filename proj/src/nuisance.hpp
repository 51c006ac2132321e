#pragma once

#include <optional>
#include <vector>

#include "dataset.hpp"
#include "glm.hpp"

namespace cci {

// How the counterfactual income CDF (and the realized-income conditional CDF
// surface feeding the influence function) is fitted:
//  - per_income_grid: one binary fit of 1(I <= q) on X per grid threshold q
//    over the arm subsample, evaluated between thresholds by monotone linear
//    interpolation. This is also what the simulation tables are built on.
//  - pairwise_derived: reuse the pairwise rank model, indexing incomes by the
//    covariates of the observation that carries them. No extra fits, but the
//    surface smooths realized incomes onto covariates, which distorts the
//    rank bracket of the influence function; it is kept as an option for the
//    plug-in path and diagnostics.
enum class CdfStrategy { per_income_grid, pairwise_derived };

struct NuisanceOptions {
    CdfStrategy cdf_strategy = CdfStrategy::per_income_grid;
    int grid_size = 200;
    Link grid_link = Link::logit;
    Link pairwise_link = Link::probit;
    double trim_threshold = 0.01;
    Eigen::Index block_rows = 1024;
    int threads = 1;
    GlmOptions glm;
};

// Per-role design matrices (each with intercept column 0). They default to
// the dataset covariates; simulation scenarios swap in transformed copies for
// individual roles.
struct NuisanceDesigns {
    Eigen::MatrixXd propensity_X;
    Eigen::MatrixXd outcome_X;
    Eigen::MatrixXd rank_X;

    static NuisanceDesigns shared(const Dataset& data) {
        return {data.covariates, data.covariates, data.covariates};
    }
    NuisanceDesigns subset(const std::vector<Eigen::Index>& idx) const;
};

struct PropensityFit {
    GlmFit fit;             // multinomial; unused when K == 1
    Eigen::MatrixXd pi;     // n x K fitted propensities on the fitting rows
    std::vector<Eigen::Index> kept;
    Eigen::Index n_trimmed = 0;
    double threshold = 0.0;
};

// Multinomial propensity fit on the full data plus the overlap-trimming mask:
// rows with min_e pi_e(x) below the threshold are flagged for exclusion.
// One pass; downstream fitting uses the kept rows only.
PropensityFit fit_propensity(const Dataset& data, const Eigen::MatrixXd& propensity_X,
                             double trim_threshold, const GlmOptions& opts = {});

// Fits and per-observation caches for one exposure level.
struct LevelFits {
    int level = 0;
    CdfStrategy strategy = CdfStrategy::per_income_grid;

    GlmFit outcome_fit;
    Eigen::VectorXd m_hat;   // E(Y|X, E=e) predictions for every row

    GlmFit pairwise_fit;     // probit on the arm pair grid
    std::vector<Eigen::Index> rank_cols; // non-constant rank design columns used

    // Per-income CDF machinery (per_income_grid strategy).
    Eigen::VectorXd grid_thresholds;
    std::vector<GlmFit> grid_fits;
    double income_min = 0.0; // population (kept-sample) income minimum

    // Product regression E(Y*Xi(I)|X, E=e) for the Psi_2 path.
    bool has_product = false;
    GlmFit product_fit;
    Eigen::VectorXd w_hat;

    // Per-observation surfaces.
    Eigen::VectorXd xi;      // Xi_e at each row's income, isotone in income
    Eigen::VectorXd cond_xi; // E(Xi_e(I) | X = x_t, E=e)
    Eigen::VectorXd s1;      // mean_t m_t * N_e(i_row, x_t)
    Eigen::VectorXd s2;      // mean_t m_t * P(x_t, x_row)

    // Monotone query curve for the counterfactual CDF.
    std::vector<double> curve_income;
    std::vector<double> curve_xi;
};

GlmFit fit_outcome_mean(const Dataset& data, const Eigen::MatrixXd& outcome_X, int level,
                        const GlmOptions& opts = {});

GlmFit fit_pairwise_rank_model(const Dataset& data, const Eigen::MatrixXd& rank_X, int level,
                               const NuisanceOptions& opts = {});

// Full per-level pipeline: outcome mean, pairwise model, CDF machinery, all
// cached surfaces, optionally the product regression.
LevelFits fit_level(const Dataset& data, const NuisanceDesigns& designs, int level,
                    const NuisanceOptions& opts, bool with_product);

// Counterfactual CDF at arbitrary query incomes; exactly 0 strictly below the
// population income minimum under the per-income strategy, clipped to [0,1],
// nondecreasing.
Eigen::VectorXd counterfactual_cdf(const LevelFits& fits, const Eigen::VectorXd& incomes);

// Conditional CDF estimate N_e(threshold, x) for one row of a rank design
// (used by tests and the influence-function oracle; the estimator pipeline
// consumes the cached aggregates instead).
double conditional_cdf_at(const LevelFits& fits, const Eigen::MatrixXd& rank_X, double income,
                          Eigen::Index row);

// Fitted pairwise surface P(reference income <= target income) evaluated at
// one (target row, reference row) pair of a rank design.
double pairwise_surface_at(const LevelFits& fits, const Eigen::MatrixXd& rank_X,
                           Eigen::Index target_row, Eigen::Index ref_row);

// Non-constant-column mask over the given rows (intercept always kept).
std::vector<Eigen::Index> nonconstant_columns(const Eigen::MatrixXd& X,
                                              const std::vector<Eigen::Index>& rows);

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& cols);

} // namespace cci
