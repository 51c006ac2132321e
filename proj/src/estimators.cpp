#include "estimators.hpp"

#include <algorithm>
#include <cmath>

#include "mathutil.hpp"
#include "rng.hpp"

namespace cci {

namespace {

void finish_interval(IndexEstimate& est) {
    const double z = norm_quantile(0.5 * (1.0 + est.conf_level));
    est.ci_lo = est.value - z * est.se;
    est.ci_hi = est.value + z * est.se;
}

// G plus the per-observation influence values of the ratio functional
// 2 cov(Y, F(I)) / E(Y) with F estimated by the empirical CDF.
struct NaiveParts {
    double g = 0.0;
    Eigen::VectorXd phi;
};

NaiveParts naive_parts(const Eigen::VectorXd& y, const Eigen::VectorXd& income,
                       bool with_phi) {
    const Eigen::Index n = y.size();
    require(n >= 2, ErrorCode::invalid_argument, "naive_index: need at least two rows");
    const double ybar = pairwise_mean(y);
    require(ybar > 0.0, ErrorCode::degenerate_outcome,
            "naive_index: mean outcome must be positive");

    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return income[a] < income[b]; });

    // tie-grouped empirical CDF (proportion <=) and suffix sums of y for
    // g(i) = mean_k y_k 1(i <= i_k)
    Eigen::VectorXd F(n), gsuf(n);
    {
        std::vector<double> group_y_total;
        std::vector<size_t> group_end; // exclusive index into `order`
        for (size_t k = 0; k < order.size();) {
            size_t j = k;
            double tot = 0.0;
            while (j < order.size() && income[order[j]] == income[order[k]]) {
                tot += y[order[j]];
                ++j;
            }
            group_y_total.push_back(tot);
            group_end.push_back(j);
            k = j;
        }
        double suffix = 0.0;
        for (size_t g = group_y_total.size(); g-- > 0;) {
            suffix += group_y_total[g];
            const size_t begin = g == 0 ? 0 : group_end[g - 1];
            for (size_t k = begin; k < group_end[g]; ++k) {
                F[order[k]] = static_cast<double>(group_end[g]) / static_cast<double>(n);
                gsuf[order[k]] = suffix / static_cast<double>(n);
            }
        }
    }

    const double fbar = pairwise_mean(F);
    const double yf = pairwise_mean((y.array() * F.array()).matrix());
    const double cov = yf - ybar * fbar;
    NaiveParts out;
    out.g = 2.0 * cov / ybar;
    if (with_phi) {
        out.phi.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double dcov = y[i] * F[i] + gsuf[i] - 2.0 * yf - fbar * (y[i] - ybar) -
                                ybar * (1.0 - 2.0 * fbar);
            out.phi[i] = 2.0 * dcov / ybar - 2.0 * cov * (y[i] - ybar) / (ybar * ybar);
        }
    }
    return out;
}

} // namespace

IndexEstimate naive_index(const Eigen::VectorXd& y, const Eigen::VectorXd& income,
                          const NaiveOptions& opts) {
    const Eigen::Index n = y.size();
    IndexEstimate est;
    est.estimator = EstimatorKind::naive;
    est.conf_level = opts.conf_level;
    if (opts.bootstrap > 0) {
        est.value = naive_parts(y, income, false).g;
        Rng rng(opts.seed);
        Eigen::VectorXd stats(opts.bootstrap);
        Eigen::VectorXd yb(n), ib(n);
        for (int b = 0; b < opts.bootstrap; ++b) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::Index j =
                    static_cast<Eigen::Index>(rng.next_u64() % static_cast<uint64_t>(n));
                yb[i] = y[j];
                ib[i] = income[j];
            }
            stats[b] = naive_parts(yb, ib, false).g;
        }
        est.se = std::sqrt(sample_variance(stats));
    } else {
        const NaiveParts parts = naive_parts(y, income, true);
        est.value = parts.g;
        est.se = std::sqrt(sample_variance(parts.phi) / static_cast<double>(n));
    }
    est.has_se = true;
    finish_interval(est);
    return est;
}

IndexEstimate naive_index(const Dataset& data, std::optional<int> level,
                          const NaiveOptions& opts) {
    if (!level) return naive_index(data.y, data.income, opts);
    const std::vector<Eigen::Index> arm = data.arm_indices(*level);
    require(!arm.empty(), ErrorCode::empty_class, "naive_index: empty exposure level");
    Eigen::VectorXd y(static_cast<Eigen::Index>(arm.size())),
        inc(static_cast<Eigen::Index>(arm.size()));
    for (size_t k = 0; k < arm.size(); ++k) {
        y[static_cast<Eigen::Index>(k)] = data.y[arm[k]];
        inc[static_cast<Eigen::Index>(k)] = data.income[arm[k]];
    }
    return naive_index(y, inc, opts);
}

EifVector eif(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
              Variant variant) {
    const Eigen::Index n = data.n();
    require(pi.rows() == n, ErrorCode::invalid_argument, "eif: propensity cache size mismatch");
    require(variant == Variant::a1 || fits.has_product, ErrorCode::invalid_argument,
            "eif: a2 variant requires the product regression");
    const int e = fits.level;
    const Eigen::VectorXd& m = fits.m_hat;
    const Eigen::VectorXd& c = fits.cond_xi;
    const Eigen::VectorXd& xi = fits.xi;
    const Eigen::VectorXd& s1 = fits.s1;
    const Eigen::VectorXd& s2 = fits.s2;

    const double B = pairwise_mean(m);
    require(B > 0.0, ErrorCode::degenerate_outcome, "eif: B(P_n) must be positive");
    const double A1 = pairwise_mean((m.array() * c.array()).matrix());
    const double A = variant == Variant::a1 ? A1 : pairwise_mean(fits.w_hat);

    EifVector out;
    out.level = e;
    out.variant = variant;
    out.a = A;
    out.b = B;
    out.values.resize(n);
    out.phi_a.resize(n);
    out.phi_b.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double ips = 0.0;
        if (data.exposure[static_cast<size_t>(i)] == e) {
            const double p = pi(i, e);
            require(p > 0.0, ErrorCode::internal, "eif: zero propensity on a kept row");
            ips = 1.0 / p;
        }
        const double nested = ips * ((B - s1[i]) - s2[i]) + s2[i] - A1;
        double phi_a;
        if (variant == Variant::a1) {
            phi_a = ips * (data.y[i] * xi[i] - m[i] * c[i]) + m[i] * c[i] - A1 + nested;
        } else {
            const double w = fits.w_hat[i];
            phi_a = ips * (data.y[i] * xi[i] - w) + w - A + nested;
        }
        const double phi_b = ips * (data.y[i] - m[i]) + m[i] - B;
        out.phi_a[i] = phi_a;
        out.phi_b[i] = phi_b;
        out.values[i] = 2.0 * phi_a / B - 2.0 * phi_b * A / (B * B);
    }
    return out;
}

LevelEstimates estimate_level(const Dataset& data, const Eigen::MatrixXd& pi,
                              const LevelFits& fits, Variant variant, double conf_level) {
    LevelEstimates out;
    out.eif = eif(data, pi, fits, variant);
    const double n = static_cast<double>(data.n());
    const double A = out.eif.a, B = out.eif.b;
    const double se = std::sqrt(sample_variance(out.eif.values) / n);

    auto base = [&](EstimatorKind kind, double value) {
        IndexEstimate est;
        est.estimator = kind;
        est.level = fits.level;
        est.conf_level = conf_level;
        est.value = value;
        est.se = se;
        est.has_se = true;
        finish_interval(est);
        return est;
    };

    const double g_plug = 2.0 * A / B - 1.0;
    out.plug_in = base(EstimatorKind::plug_in, g_plug);
    out.one_step = base(EstimatorKind::one_step, g_plug + pairwise_mean(out.eif.values));
    const double denom = pairwise_mean(out.eif.phi_b) + 2.0 * B;
    require(std::fabs(denom) > 1e-12, ErrorCode::numeric_degeneracy,
            "est_eq: vanishing denominator");
    out.est_eq = base(EstimatorKind::est_eq,
                      2.0 * (pairwise_mean(out.eif.phi_a) + 2.0 * A) / denom - 1.0);
    return out;
}

IndexEstimate plug_in(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
                      Variant variant, double conf_level) {
    return estimate_level(data, pi, fits, variant, conf_level).plug_in;
}

IndexEstimate one_step(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
                       Variant variant, double conf_level) {
    return estimate_level(data, pi, fits, variant, conf_level).one_step;
}

IndexEstimate est_eq(const Dataset& data, const Eigen::MatrixXd& pi, const LevelFits& fits,
                     Variant variant, double conf_level) {
    return estimate_level(data, pi, fits, variant, conf_level).est_eq;
}

IndexEstimate contrast(const IndexEstimate& level_est, const EifVector& level_eif,
                       const IndexEstimate& base_est, const EifVector& base_eif) {
    require(level_eif.values.size() == base_eif.values.size(), ErrorCode::invalid_argument,
            "contrast: estimates were computed on different rows");
    require(level_est.estimator == base_est.estimator, ErrorCode::invalid_argument,
            "contrast: estimator kinds differ");
    IndexEstimate out;
    out.estimator = level_est.estimator;
    out.level = level_eif.level;
    out.is_contrast = true;
    out.conf_level = level_est.conf_level;
    out.value = level_est.value - base_est.value;
    const Eigen::VectorXd diff = level_eif.values - base_eif.values;
    out.se = std::sqrt(sample_variance(diff) / static_cast<double>(diff.size()));
    out.has_se = true;
    finish_interval(out);
    return out;
}

} // namespace cci
