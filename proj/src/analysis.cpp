#include "analysis.hpp"

#include <cmath>

#include "mathutil.hpp"

namespace cci {

AnalysisResult analyze(const Dataset& data, const NuisanceDesigns& designs,
                       const AnalysisOptions& opts) {
    data.validate(!opts.allow_negative_outcome);
    AnalysisResult out;
    out.n_input = data.n();
    out.trim_threshold = opts.nuisance.trim_threshold;

    GlmOptions glm_opts = opts.nuisance.glm;
    glm_opts.threads = opts.nuisance.threads;
    const PropensityFit prop =
        fit_propensity(data, designs.propensity_X, opts.nuisance.trim_threshold, glm_opts);
    out.n_trimmed = prop.n_trimmed;
    out.n_kept = static_cast<Eigen::Index>(prop.kept.size());

    const Dataset kept = data.subset(prop.kept);
    kept.validate(!opts.allow_negative_outcome);
    const NuisanceDesigns kept_designs = designs.subset(prop.kept);
    Eigen::MatrixXd pi(out.n_kept, data.n_levels);
    for (Eigen::Index i = 0; i < out.n_kept; ++i)
        pi.row(i) = prop.pi.row(prop.kept[static_cast<size_t>(i)]);

    const int K = data.n_levels;
    std::vector<LevelEstimates> per_level(static_cast<size_t>(K));
    for (int e = 0; e < K; ++e) {
        LevelBlock block;
        block.level = e;
        block.arm_n = kept.arm_size(e);
        if (opts.with_naive) {
            NaiveOptions nopts;
            nopts.conf_level = opts.conf_level;
            nopts.bootstrap = opts.naive_bootstrap;
            nopts.seed = opts.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(e + 1));
            block.naive = naive_index(kept, e, nopts);
        }
        if (opts.with_eif_estimators) {
            const LevelFits fits =
                fit_level(kept, kept_designs, e, opts.nuisance, opts.variant == Variant::a2);
            per_level[static_cast<size_t>(e)] =
                estimate_level(kept, pi, fits, opts.variant, opts.conf_level);
            block.eif_estimates = per_level[static_cast<size_t>(e)];
        }
        out.levels.push_back(std::move(block));
    }

    for (int e = 1; e < K; ++e) {
        ContrastBlock cb;
        cb.level = e;
        if (opts.with_eif_estimators) {
            const LevelEstimates& le = per_level[static_cast<size_t>(e)];
            const LevelEstimates& l0 = per_level[0];
            cb.estimates.push_back(contrast(le.plug_in, le.eif, l0.plug_in, l0.eif));
            cb.estimates.push_back(contrast(le.one_step, le.eif, l0.one_step, l0.eif));
            cb.estimates.push_back(contrast(le.est_eq, le.eif, l0.est_eq, l0.eif));
        }
        if (opts.with_naive) {
            // Naive per-level indexes live on disjoint arm subsamples, so the
            // contrast variance is the independent sum.
            const IndexEstimate& a = *out.levels[static_cast<size_t>(e)].naive;
            const IndexEstimate& b = *out.levels[0].naive;
            IndexEstimate nc;
            nc.estimator = EstimatorKind::naive;
            nc.level = e;
            nc.is_contrast = true;
            nc.conf_level = opts.conf_level;
            nc.value = a.value - b.value;
            nc.se = std::sqrt(a.se * a.se + b.se * b.se);
            nc.has_se = true;
            const double z = norm_quantile(0.5 * (1.0 + nc.conf_level));
            nc.ci_lo = nc.value - z * nc.se;
            nc.ci_hi = nc.value + z * nc.se;
            cb.estimates.push_back(nc);
        }
        out.contrasts.push_back(std::move(cb));
    }
    return out;
}

} // namespace cci
