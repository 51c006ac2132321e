#include "simulation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>

#include "mathutil.hpp"
#include "rng.hpp"

namespace cci {

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::correct: return "correct";
        case Scenario::wrong_pi: return "wrong_pi";
        case Scenario::wrong_y: return "wrong_y";
        default: return "wrong_all";
    }
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "correct") return Scenario::correct;
    if (name == "wrong_pi") return Scenario::wrong_pi;
    if (name == "wrong_y") return Scenario::wrong_y;
    if (name == "wrong_all") return Scenario::wrong_all;
    fail(ErrorCode::invalid_argument, "unknown scenario: " + name);
}

std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::naive: return "naive";
        case EstimatorKind::plug_in: return "plug-in";
        case EstimatorKind::one_step: return "one-step";
        default: return "est-eq";
    }
}

EstimatorKind estimator_from_name(const std::string& name) {
    if (name == "naive") return EstimatorKind::naive;
    if (name == "plug-in" || name == "plugin") return EstimatorKind::plug_in;
    if (name == "one-step" || name == "onestep") return EstimatorKind::one_step;
    if (name == "est-eq" || name == "esteq") return EstimatorKind::est_eq;
    fail(ErrorCode::invalid_argument, "unknown estimator: " + name);
}

Eigen::Vector3d dgp_propensities(double x1, double x2) {
    const double l1 = (5.0 * (x1 + x2) - 55.0) / (10.0 * std::sqrt(2.0));
    const double l2 =
        (3.0 * std::sqrt(2.0) * x1 - 43.0 * std::sqrt(2.0) + 4.0 * std::sqrt(2.0) * x2) /
        (10.0 * std::sqrt(2.0));
    const double den = 1.0 + std::exp(l1) + std::exp(l2);
    return {1.0 / den, std::exp(l1) / den, std::exp(l2) / den};
}

PotentialData generate_potential(Eigen::Index n, uint64_t seed, bool noise_scale_is_sd) {
    require(n >= 1, ErrorCode::invalid_argument, "generate: n must be positive");
    const double noise_sd = noise_scale_is_sd ? 2.0 : std::sqrt(2.0);
    Rng rng(seed);
    PotentialData out;
    out.x.resize(n, 2);
    out.income_pot.resize(n, 3);
    out.y_pot.resize(n, 3);
    out.exposure.resize(static_cast<size_t>(n));
    // deterministic draw order: x1, x2, eps0..eps5, exposure uniforms
    for (Eigen::Index i = 0; i < n; ++i) out.x(i, 0) = rng.normal(1.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) out.x(i, 1) = rng.normal(10.0, 1.0);
    Eigen::MatrixXd eps(n, 6);
    for (int j = 0; j < 6; ++j)
        for (Eigen::Index i = 0; i < n; ++i) eps(i, j) = rng.normal(0.0, noise_sd);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = out.x(i, 0), x2 = out.x(i, 1);
        out.income_pot(i, 0) = x1 - 0.1 * x2 + eps(i, 0);
        out.income_pot(i, 1) = -(x1 - 1.5 * x2) + eps(i, 1);
        out.income_pot(i, 2) = 20.0 * x1 - x2 + 10.0 + eps(i, 2);
        out.y_pot(i, 0) = 10.0 * x1 + x2 + eps(i, 3);
        out.y_pot(i, 1) = 10.0 * x1 + x2 + 8.0 + eps(i, 4);
        out.y_pot(i, 2) = 10.0 * x1 + x2 + 18.0 + eps(i, 5);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d p = dgp_propensities(out.x(i, 0), out.x(i, 1));
        const double u = rng.uniform();
        out.exposure[static_cast<size_t>(i)] = u <= p[0] ? 0 : u <= p[0] + p[1] ? 1 : 2;
    }
    return out;
}

Dataset generate(const DgpConfig& config) {
    require(config.n >= 50, ErrorCode::invalid_argument, "generate: n must be at least 50");
    const PotentialData pot = generate_potential(config.n, config.seed, config.noise_scale_is_sd);
    Dataset data;
    const Eigen::Index n = config.n;
    data.y.resize(n);
    data.income.resize(n);
    data.exposure = pot.exposure;
    data.covariates = with_intercept(pot.x);
    data.n_levels = 3;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int e = pot.exposure[static_cast<size_t>(i)];
        data.y[i] = pot.y_pot(i, e);
        data.income[i] = pot.income_pot(i, e);
    }
    return data;
}

NuisanceDesigns scenario_designs(const Dataset& data, Scenario scenario) {
    NuisanceDesigns designs = NuisanceDesigns::shared(data);
    const bool tp = scenario == Scenario::wrong_pi || scenario == Scenario::wrong_all;
    const bool ty = scenario == Scenario::wrong_y || scenario == Scenario::wrong_all;
    if (!tp && !ty) return designs;
    Eigen::MatrixXd transformed = data.covariates;
    for (Eigen::Index i = 0; i < transformed.rows(); ++i)
        for (Eigen::Index j = 1; j < transformed.cols(); ++j) {
            const double v = std::max(std::fabs(data.covariates(i, j)), 1e-300);
            transformed(i, j) = 2.0 * std::log(v); // log(x^2)
        }
    if (tp) designs.propensity_X = transformed;
    if (ty) designs.outcome_X = transformed;
    return designs;
}

TruthValues approximate_truth(Eigen::Index n_big, uint64_t seed, bool noise_scale_is_sd) {
    require(n_big >= 100000, ErrorCode::invalid_argument,
            "approximate_truth: n_big must be at least 1e5");
    const PotentialData pot = generate_potential(n_big, seed, noise_scale_is_sd);
    double g[3];
    for (int e = 0; e < 3; ++e)
        g[e] = naive_index(pot.y_pot.col(e), pot.income_pot.col(e)).value;
    TruthValues out;
    out.g0 = g[0];
    out.theta1 = g[1] - g[0];
    out.theta2 = g[2] - g[0];
    out.n_big = n_big;
    out.seed = seed;
    out.noise_scale_is_sd = noise_scale_is_sd;
    return out;
}

namespace {

struct RepResult {
    bool ok = false;
    std::string error;
    // [estimator][estimand] with estimands ordered G(0), theta(1), theta(2)
    std::vector<std::array<double, 3>> values;
    std::vector<std::array<double, 3>> ses;
};

constexpr std::array<const char*, 3> kEstimands = {"G(0)", "theta(1)", "theta(2)"};

} // namespace

McReport run_mc(const McConfig& config) {
    require(config.replicates >= 1, ErrorCode::invalid_argument,
            "run_mc: need at least one replicate");
    require(!config.estimators.empty(), ErrorCode::invalid_argument,
            "run_mc: empty estimator set");

    McReport report;
    report.replicates_requested = config.replicates;
    report.master_seed = config.master_seed;
    report.noise_scale_is_sd = config.noise_scale_is_sd;
    report.truth = approximate_truth(config.truth_n, derive_stream(config.master_seed, 0),
                                     config.noise_scale_is_sd);
    const double truth[3] = {report.truth.g0, report.truth.theta1, report.truth.theta2};
    const double z = norm_quantile(0.5 * (1.0 + config.conf_level));

    const size_t n_est = config.estimators.size();
    const bool want_naive =
        std::find(config.estimators.begin(), config.estimators.end(), EstimatorKind::naive) !=
        config.estimators.end();
    const bool want_eif = n_est > static_cast<size_t>(want_naive ? 1 : 0);

    for (const Eigen::Index n : config.sample_sizes) {
        for (const Scenario scenario : config.scenarios) {
            std::vector<RepResult> results(static_cast<size_t>(config.replicates));
            const uint64_t size_seed =
                derive_stream(config.master_seed, 0x5ca1ab1eULL + static_cast<uint64_t>(n));
            parallel_blocks(config.replicates, 1, config.threads,
                            [&](int, Eigen::Index r0, Eigen::Index r1) {
                for (Eigen::Index r = r0; r < r1; ++r) {
                    RepResult& res = results[static_cast<size_t>(r)];
                    try {
                        DgpConfig dgp;
                        dgp.n = n;
                        dgp.seed = derive_stream(size_seed, static_cast<uint64_t>(r));
                        dgp.noise_scale_is_sd = config.noise_scale_is_sd;
                        dgp.scenario = scenario;
                        const Dataset data = generate(dgp);
                        AnalysisOptions aopts;
                        aopts.nuisance = config.nuisance;
                        aopts.nuisance.threads = 1;
                        aopts.variant = config.variant;
                        aopts.conf_level = config.conf_level;
                        aopts.with_naive = want_naive;
                        aopts.with_eif_estimators = want_eif;
                        aopts.seed = dgp.seed;
                        aopts.allow_negative_outcome = true;
                        const AnalysisResult ana =
                            analyze(data, scenario_designs(data, scenario), aopts);
                        res.values.resize(n_est);
                        res.ses.resize(n_est);
                        for (size_t k = 0; k < n_est; ++k) {
                            const EstimatorKind kind = config.estimators[k];
                            auto pick_level = [&](const LevelBlock& block) -> const IndexEstimate& {
                                if (kind == EstimatorKind::naive) return *block.naive;
                                const LevelEstimates& le = *block.eif_estimates;
                                return kind == EstimatorKind::plug_in ? le.plug_in
                                       : kind == EstimatorKind::one_step ? le.one_step
                                                                         : le.est_eq;
                            };
                            auto pick_contrast = [&](const ContrastBlock& cb) -> const IndexEstimate& {
                                for (const IndexEstimate& est : cb.estimates)
                                    if (est.estimator == kind) return est;
                                fail(ErrorCode::internal, "run_mc: contrast estimator missing");
                            };
                            const IndexEstimate& g0 = pick_level(ana.levels[0]);
                            res.values[k][0] = g0.value;
                            res.ses[k][0] = g0.se;
                            for (int t = 1; t <= 2; ++t) {
                                const IndexEstimate& th =
                                    pick_contrast(ana.contrasts[static_cast<size_t>(t - 1)]);
                                res.values[k][static_cast<size_t>(t)] = th.value;
                                res.ses[k][static_cast<size_t>(t)] = th.se;
                            }
                        }
                        res.ok = true;
                    } catch (const Error& err) {
                        res.ok = false;
                        res.error = err.what();
                    }
                }
            });

            int failures = 0;
            for (const RepResult& r : results)
                if (!r.ok) ++failures;
            if (static_cast<double>(failures) >
                config.max_failure_rate * static_cast<double>(config.replicates))
                fail(ErrorCode::numeric_degeneracy,
                     "run_mc: " + std::to_string(failures) + " of " +
                         std::to_string(config.replicates) + " replicates failed (" +
                         scenario_name(scenario) + ", n=" + std::to_string(n) + ")");

            for (size_t k = 0; k < n_est; ++k) {
                for (size_t t = 0; t < 3; ++t) {
                    McCell cell;
                    cell.scenario = scenario;
                    cell.estimand = kEstimands[t];
                    cell.estimator = config.estimators[k];
                    cell.n = n;
                    cell.failures = failures;
                    std::vector<double> vals, ses;
                    int covered = 0;
                    for (const RepResult& r : results) {
                        if (!r.ok) continue;
                        vals.push_back(r.values[k][t]);
                        ses.push_back(r.ses[k][t]);
                        if (std::fabs(r.values[k][t] - truth[t]) <= z * r.ses[k][t]) ++covered;
                    }
                    cell.replicates = static_cast<int>(vals.size());
                    const Eigen::Map<Eigen::VectorXd> v(vals.data(),
                                                        static_cast<Eigen::Index>(vals.size()));
                    const Eigen::Map<Eigen::VectorXd> s(ses.data(),
                                                        static_cast<Eigen::Index>(ses.size()));
                    cell.bias = pairwise_mean(v) - truth[t];
                    if (vals.size() >= 2) {
                        cell.has_mc_sd = true;
                        cell.mc_sd = std::sqrt(sample_variance(v));
                    }
                    cell.est_sd = pairwise_mean(s);
                    cell.coverage =
                        vals.empty() ? 0.0
                                     : static_cast<double>(covered) /
                                           static_cast<double>(vals.size());
                    report.cells.push_back(std::move(cell));
                }
            }
        }
    }
    return report;
}

} // namespace cci
