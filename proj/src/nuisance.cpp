#include "nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mathutil.hpp"

namespace cci {

namespace {

double quantile_linear(const std::vector<double>& sorted, double p) {
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, n - 1);
    const double w = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

double pair_inverse_link(double eta, Link link) {
    return link == Link::probit ? norm_cdf(eta) : 1.0 / (1.0 + std::exp(-eta));
}

// Isotonic projection of per-observation values along the income order, with
// equal incomes pooled first so the result is a single-valued function of
// income. Pool-averaging preserves the overall mean.
Eigen::VectorXd isotonize_over_income(const Eigen::VectorXd& values,
                                      const Eigen::VectorXd& income) {
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return income[a] < income[b]; });
    // tie groups
    std::vector<double> group_val;
    std::vector<std::vector<Eigen::Index>> group_rows;
    for (size_t k = 0; k < order.size();) {
        size_t j = k;
        double sum = 0.0;
        std::vector<Eigen::Index> rows;
        while (j < order.size() && income[order[j]] == income[order[k]]) {
            sum += values[order[j]];
            rows.push_back(order[j]);
            ++j;
        }
        group_val.push_back(sum / static_cast<double>(j - k));
        group_rows.push_back(std::move(rows));
        k = j;
    }
    // expand groups with multiplicity so pooling is weighted correctly
    std::vector<double> expanded;
    expanded.reserve(static_cast<size_t>(n));
    for (size_t g = 0; g < group_val.size(); ++g)
        expanded.insert(expanded.end(), group_rows[g].size(), group_val[g]);
    const std::vector<double> iso = isotonic_fit(expanded);
    Eigen::VectorXd out(n);
    size_t pos = 0;
    for (size_t g = 0; g < group_val.size(); ++g) {
        const double v = std::clamp(iso[pos], 0.0, 1.0);
        for (Eigen::Index row : group_rows[g]) out[row] = v;
        pos += group_rows[g].size();
    }
    return out;
}

} // namespace

NuisanceDesigns NuisanceDesigns::subset(const std::vector<Eigen::Index>& idx) const {
    return {gather_rows(propensity_X, idx), gather_rows(outcome_X, idx),
            gather_rows(rank_X, idx)};
}

std::vector<Eigen::Index> nonconstant_columns(const Eigen::MatrixXd& X,
                                              const std::vector<Eigen::Index>& rows) {
    std::vector<Eigen::Index> keep;
    keep.push_back(0); // intercept
    for (Eigen::Index j = 1; j < X.cols(); ++j) {
        double lo = X(rows.front(), j), hi = lo;
        for (Eigen::Index r : rows) {
            lo = std::min(lo, X(r, j));
            hi = std::max(hi, X(r, j));
        }
        if (hi - lo > 1e-12 * (std::fabs(hi) + std::fabs(lo) + 1.0)) keep.push_back(j);
    }
    return keep;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
    return out;
}

PropensityFit fit_propensity(const Dataset& data, const Eigen::MatrixXd& propensity_X,
                             double trim_threshold, const GlmOptions& opts) {
    require(trim_threshold >= 0.0 && trim_threshold < 0.5, ErrorCode::invalid_argument,
            "fit_propensity: threshold must be in [0, 0.5)");
    require(propensity_X.rows() == data.n(), ErrorCode::invalid_argument,
            "fit_propensity: design size mismatch");
    PropensityFit out;
    out.threshold = trim_threshold;
    const Eigen::Index n = data.n();
    if (data.n_levels == 1) {
        out.pi = Eigen::MatrixXd::Ones(n, 1);
        out.kept.resize(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) out.kept[static_cast<size_t>(i)] = i;
        return out;
    }
    std::vector<Eigen::Index> all_rows(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all_rows[static_cast<size_t>(i)] = i;
    const std::vector<Eigen::Index> cols = nonconstant_columns(propensity_X, all_rows);
    const Eigen::MatrixXd X = select_columns(propensity_X, cols);
    out.fit = fit_multinomial(X, data.exposure, data.n_levels, opts);
    out.pi = predict_multinomial(out.fit, X);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (out.pi.row(i).minCoeff() >= trim_threshold)
            out.kept.push_back(i);
        else
            ++out.n_trimmed;
    }
    require(!out.kept.empty(), ErrorCode::degenerate_outcome,
            "fit_propensity: trimming removed every row");
    return out;
}

GlmFit fit_outcome_mean(const Dataset& data, const Eigen::MatrixXd& outcome_X, int level,
                        const GlmOptions&) {
    const std::vector<Eigen::Index> arm = data.arm_indices(level);
    require(!arm.empty(), ErrorCode::empty_class,
            "fit_outcome_mean: level " + std::to_string(level) + " is empty");
    const std::vector<Eigen::Index> cols = nonconstant_columns(outcome_X, arm);
    return fit_linear(select_columns(gather_rows(outcome_X, arm), cols), gather(data.y, arm));
}

GlmFit fit_pairwise_rank_model(const Dataset& data, const Eigen::MatrixXd& rank_X, int level,
                               const NuisanceOptions& opts) {
    const std::vector<Eigen::Index> arm = data.arm_indices(level);
    require(arm.size() >= 2, ErrorCode::invalid_argument,
            "fit_pairwise_rank_model: need at least two observations in the arm");
    std::vector<Eigen::Index> cols = nonconstant_columns(rank_X, arm);
    cols.erase(cols.begin()); // the pair design carries its own intercept
    const Eigen::MatrixXd arm_x = select_columns(gather_rows(rank_X, arm), cols);
    const Eigen::VectorXd arm_inc = gather(data.income, arm);
    PairGridSource grid(arm_x, arm_inc);
    GlmOptions gopts = opts.glm;
    gopts.block_rows = opts.block_rows;
    gopts.threads = opts.threads;
    return fit_binary_glm(grid, opts.pairwise_link, gopts);
}

LevelFits fit_level(const Dataset& data, const NuisanceDesigns& designs, int level,
                    const NuisanceOptions& opts, bool with_product) {
    LevelFits out;
    out.level = level;
    out.strategy = opts.cdf_strategy;
    const Eigen::Index n = data.n();
    const std::vector<Eigen::Index> arm = data.arm_indices(level);
    require(arm.size() >= 2, ErrorCode::invalid_argument,
            "fit_level: need at least two observations at level " + std::to_string(level));

    // outcome mean, predictions for every row
    {
        const std::vector<Eigen::Index> cols = nonconstant_columns(designs.outcome_X, arm);
        out.outcome_fit = fit_linear(select_columns(gather_rows(designs.outcome_X, arm), cols),
                                     gather(data.y, arm));
        out.m_hat = predict(out.outcome_fit, select_columns(designs.outcome_X, cols));
    }

    // pairwise rank model and the aggregates that need the n x n surface
    out.rank_cols = nonconstant_columns(designs.rank_X, arm);
    {
        std::vector<Eigen::Index> pair_cols = out.rank_cols;
        pair_cols.erase(pair_cols.begin());
        const Eigen::MatrixXd arm_x = select_columns(gather_rows(designs.rank_X, arm), pair_cols);
        const Eigen::VectorXd arm_inc = gather(data.income, arm);
        PairGridSource grid(arm_x, arm_inc);
        GlmOptions gopts = opts.glm;
        gopts.block_rows = opts.block_rows;
        gopts.threads = opts.threads;
        out.pairwise_fit = fit_binary_glm(grid, opts.pairwise_link, gopts);

        out.cond_xi.resize(n);
        out.s2.resize(n);
        Eigen::VectorXd s1_pw(n);
        if (out.pairwise_fit.constant_response) {
            const double v = out.pairwise_fit.constant_value;
            out.cond_xi.setConstant(v);
            out.s2.setConstant(v * pairwise_mean(out.m_hat));
            s1_pw.setConstant(v * pairwise_mean(out.m_hat));
        } else {
            const Eigen::MatrixXd all_x = select_columns(designs.rank_X, pair_cols);
            const Eigen::Index d = all_x.cols();
            const Eigen::VectorXd beta = out.pairwise_fit.coef.col(0);
            const double b0 = beta[0];
            Eigen::VectorXd eta_target = Eigen::VectorXd::Constant(n, b0);
            Eigen::VectorXd eta_ref = Eigen::VectorXd::Zero(n);
            if (d > 0) {
                eta_target += all_x * beta.segment(1, d);
                eta_ref = all_x * beta.segment(1 + d, d);
            }
            const Link plink = opts.pairwise_link;
            // One pass over target rows: row means (cond_xi), m-weighted row
            // means (s1 under the pairwise strategy), and m-weighted column
            // sums (s2) merged in block order.
            struct ColPartial {
                Eigen::VectorXd col_sum;
            };
            Eigen::VectorXd s2_sum = Eigen::VectorXd::Zero(n);
            auto compute = [&](Eigen::Index lo, Eigen::Index hi) {
                ColPartial part{Eigen::VectorXd::Zero(n)};
                Eigen::VectorXd row(n), mrow(n);
                for (Eigen::Index t = lo; t < hi; ++t) {
                    for (Eigen::Index r = 0; r < n; ++r) {
                        const double p = pair_inverse_link(eta_target[t] + eta_ref[r], plink);
                        row[r] = p;
                        mrow[r] = out.m_hat[r] * p;
                    }
                    out.cond_xi[t] = pairwise_mean(row);
                    s1_pw[t] = pairwise_mean(mrow);
                    part.col_sum += out.m_hat[t] * row;
                }
                return part;
            };
            auto merge = [&](ColPartial&& part) { s2_sum += part.col_sum; };
            ordered_reduce_blocks<ColPartial>(n, opts.block_rows, opts.threads, compute, merge);
            out.s2 = s2_sum / static_cast<double>(n);
        }

        if (opts.cdf_strategy == CdfStrategy::pairwise_derived) {
            out.s1 = s1_pw;
            out.xi = isotonize_over_income(out.cond_xi, data.income);
            // query curve over sorted distinct incomes
            std::vector<Eigen::Index> order(static_cast<size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
            std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return data.income[a] < data.income[b];
            });
            for (Eigen::Index i : order) {
                if (!out.curve_income.empty() && out.curve_income.back() == data.income[i])
                    continue;
                out.curve_income.push_back(data.income[i]);
                out.curve_xi.push_back(out.xi[i]);
            }
        }
    }

    out.income_min = data.income.minCoeff();

    if (opts.cdf_strategy == CdfStrategy::per_income_grid) {
        // quantile grid over the full kept sample
        std::vector<double> sorted(data.income.data(), data.income.data() + n);
        std::sort(sorted.begin(), sorted.end());
        const int q_req = std::max(2, opts.grid_size);
        std::vector<double> thr;
        for (int q = 0; q < q_req; ++q) {
            const double v =
                quantile_linear(sorted, static_cast<double>(q) / static_cast<double>(q_req - 1));
            if (thr.empty() || v > thr.back()) thr.push_back(v);
        }
        const Eigen::Index Q = static_cast<Eigen::Index>(thr.size());
        out.grid_thresholds = Eigen::Map<Eigen::VectorXd>(thr.data(), Q);

        const Eigen::MatrixXd arm_x = select_columns(gather_rows(designs.rank_X, arm), out.rank_cols);
        const Eigen::MatrixXd all_x = select_columns(designs.rank_X, out.rank_cols);
        const Eigen::VectorXd arm_inc = gather(data.income, arm);
        out.grid_fits.resize(static_cast<size_t>(Q));
        Eigen::VectorXd rowmean(Q), gq(Q);
        GlmOptions gopts = opts.glm;
        parallel_blocks(Q, 1, opts.threads, [&](int, Eigen::Index q0, Eigen::Index q1) {
            for (Eigen::Index q = q0; q < q1; ++q) {
                Eigen::VectorXd resp(arm_inc.size());
                for (Eigen::Index k = 0; k < arm_inc.size(); ++k)
                    resp[k] = arm_inc[k] <= thr[static_cast<size_t>(q)] ? 1.0 : 0.0;
                GlmFit f;
                try {
                    f = fit_binary_glm(arm_x, resp, opts.grid_link, gopts);
                } catch (const Error& err) {
                    if (err.code() != ErrorCode::separation) throw;
                    // near-degenerate thresholds can separate on a handful of
                    // extreme rows; fall back to the intercept-only MLE, whose
                    // fitted value is the arm share at the threshold
                    f.family = Family::binomial;
                    f.link = opts.grid_link;
                    f.constant_response = true;
                    f.constant_value = resp.mean();
                    f.converged = true;
                    const double pbar = std::clamp(f.constant_value, 1e-12, 1.0 - 1e-12);
                    for (Eigen::Index k = 0; k < resp.size(); ++k)
                        f.deviance += -2.0 * (resp[k] * std::log(pbar) +
                                              (1.0 - resp[k]) * std::log(1.0 - pbar));
                }
                const Eigen::VectorXd pred = predict(f, all_x);
                rowmean[q] = pairwise_mean(pred);
                gq[q] = pairwise_mean((out.m_hat.array() * pred.array()).matrix());
                out.grid_fits[static_cast<size_t>(q)] = std::move(f);
            }
        });

        // isotonize the CDF curve over the threshold grid; s1 keeps the raw
        // (non-isotonized) conditional-CDF aggregate
        std::vector<double> rm(rowmean.data(), rowmean.data() + Q);
        std::vector<double> iso = isotonic_fit(rm);
        for (double& v : iso) v = std::clamp(v, 0.0, 1.0);
        out.curve_income = thr;
        out.curve_xi = iso;
        out.xi.resize(n);
        out.s1.resize(n);
        const std::span<const double> txs(out.curve_income);
        const std::span<const double> tys(out.curve_xi);
        const std::span<const double> gys(gq.data(), static_cast<size_t>(Q));
        for (Eigen::Index i = 0; i < n; ++i) {
            out.xi[i] = interp_linear(txs, tys, data.income[i]);
            out.s1[i] = interp_linear(txs, gys, data.income[i]);
        }
    }

    if (with_product) {
        const std::vector<Eigen::Index> cols = nonconstant_columns(designs.outcome_X, arm);
        Eigen::VectorXd resp(static_cast<Eigen::Index>(arm.size()));
        for (size_t k = 0; k < arm.size(); ++k)
            resp[static_cast<Eigen::Index>(k)] = data.y[arm[k]] * out.xi[arm[k]];
        out.product_fit =
            fit_linear(select_columns(gather_rows(designs.outcome_X, arm), cols), resp);
        out.w_hat = predict(out.product_fit, select_columns(designs.outcome_X, cols));
        out.has_product = true;
    }
    return out;
}

Eigen::VectorXd counterfactual_cdf(const LevelFits& fits, const Eigen::VectorXd& incomes) {
    Eigen::VectorXd out(incomes.size());
    const std::span<const double> xs(fits.curve_income);
    const std::span<const double> ys(fits.curve_xi);
    for (Eigen::Index i = 0; i < incomes.size(); ++i) {
        if (fits.strategy == CdfStrategy::per_income_grid && incomes[i] < fits.income_min) {
            out[i] = 0.0;
            continue;
        }
        out[i] = std::clamp(interp_linear(xs, ys, incomes[i]), 0.0, 1.0);
    }
    return out;
}

double pairwise_surface_at(const LevelFits& fits, const Eigen::MatrixXd& rank_X,
                           Eigen::Index target_row, Eigen::Index ref_row) {
    if (fits.pairwise_fit.constant_response) return fits.pairwise_fit.constant_value;
    std::vector<Eigen::Index> pair_cols = fits.rank_cols;
    pair_cols.erase(pair_cols.begin());
    const Eigen::Index d = static_cast<Eigen::Index>(pair_cols.size());
    const Eigen::VectorXd beta = fits.pairwise_fit.coef.col(0);
    double eta = beta[0];
    for (Eigen::Index k = 0; k < d; ++k) {
        eta += beta[1 + k] * rank_X(target_row, pair_cols[static_cast<size_t>(k)]);
        eta += beta[1 + d + k] * rank_X(ref_row, pair_cols[static_cast<size_t>(k)]);
    }
    return pair_inverse_link(eta, fits.pairwise_fit.link);
}

double conditional_cdf_at(const LevelFits& fits, const Eigen::MatrixXd& rank_X, double income,
                          Eigen::Index row) {
    require(fits.strategy == CdfStrategy::per_income_grid, ErrorCode::invalid_argument,
            "conditional_cdf_at: available for the per-income strategy only");
    const Eigen::MatrixXd x = select_columns(rank_X, fits.rank_cols).row(row);
    const Eigen::Index Q = fits.grid_thresholds.size();
    auto pred_at = [&](Eigen::Index q) {
        return predict(fits.grid_fits[static_cast<size_t>(q)], x)[0];
    };
    if (income <= fits.grid_thresholds[0]) return pred_at(0);
    if (income >= fits.grid_thresholds[Q - 1]) return pred_at(Q - 1);
    Eigen::Index hi = 1;
    while (fits.grid_thresholds[hi] < income) ++hi;
    const double lo_t = fits.grid_thresholds[hi - 1], hi_t = fits.grid_thresholds[hi];
    const double w = (income - lo_t) / (hi_t - lo_t);
    return pred_at(hi - 1) * (1.0 - w) + pred_at(hi) * w;
}

} // namespace cci
