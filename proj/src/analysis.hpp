#pragma once

#include <optional>
#include <vector>

#include "estimators.hpp"

namespace cci {

struct AnalysisOptions {
    NuisanceOptions nuisance;
    Variant variant = Variant::a1;
    double conf_level = 0.95;
    bool with_naive = true;
    bool with_eif_estimators = true; // plug-in, one-step, est-eq
    int naive_bootstrap = 0;
    uint64_t seed = 0;
    bool allow_negative_outcome = false; // simulation path only
};

struct LevelBlock {
    int level = 0;
    Eigen::Index arm_n = 0;
    std::optional<IndexEstimate> naive;
    std::optional<LevelEstimates> eif_estimates;
};

struct ContrastBlock {
    int level = 0; // theta(level) = G(level) - G(0)
    std::vector<IndexEstimate> estimates;
};

struct AnalysisResult {
    Eigen::Index n_input = 0;
    Eigen::Index n_kept = 0;
    Eigen::Index n_trimmed = 0;
    double trim_threshold = 0.0;
    std::vector<LevelBlock> levels;
    std::vector<ContrastBlock> contrasts;
};

// Full pipeline: trim on fitted propensities, fit per-level nuisances on the
// kept rows, run every requested estimator per level, form contrasts against
// level 0.
AnalysisResult analyze(const Dataset& data, const NuisanceDesigns& designs,
                       const AnalysisOptions& opts);

} // namespace cci
