// Acceptance suite: runs every release gate end to end and prints one
// [PASS]/[FAIL] line per criterion. Exit status is the number of failures.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "io.hpp"
#include "mathutil.hpp"
#include "oracles.hpp"
#include "rng.hpp"
#include "simulation.hpp"

using namespace cci;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& label, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, label.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

const McCell& cell_of(const McReport& rep, Scenario sc, EstimatorKind est,
                      const std::string& estimand, Eigen::Index n) {
    for (const McCell& cell : rep.cells)
        if (cell.scenario == sc && cell.estimator == est && cell.estimand == estimand &&
            cell.n == n)
            return cell;
    throw std::runtime_error("missing cell");
}

std::optional<Dataset> small_dataset(Rng& rng, Eigen::Index n, int levels) {
    Dataset out;
    out.y.resize(n);
    out.income.resize(n);
    out.exposure.resize(static_cast<size_t>(n));
    Eigen::MatrixXd raw(n, 2);
    std::vector<int> counts(static_cast<size_t>(levels), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        raw(i, 0) = rng.normal();
        raw(i, 1) = rng.normal();
        out.income[i] = rng.normal(0.0, 1.0) + 0.4 * raw(i, 0);
        out.y[i] = std::fabs(rng.normal(2.0, 1.0)) + 0.3 * std::fabs(raw(i, 1));
        const int e = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(levels));
        out.exposure[static_cast<size_t>(i)] = e;
        ++counts[static_cast<size_t>(e)];
    }
    for (int c : counts)
        if (c < 3) return std::nullopt;
    out.covariates = with_intercept(raw);
    out.n_levels = levels;
    return out;
}

char buf[512];

void criterion_1_truth() {
    const TruthValues t = approximate_truth(1000000, 20240101, true);
    const bool pass = std::fabs(t.g0 - 0.12486) <= 0.003 &&
                      std::fabs(t.theta1 - (-0.18879)) <= 0.004 &&
                      std::fabs(t.theta2 - 0.02209) <= 0.004;
    std::snprintf(buf, sizeof(buf), "G(0)=%.5f theta(1)=%.5f theta(2)=%.5f vs 0.12486/-0.18879/0.02209",
                  t.g0, t.theta1, t.theta2);
    report(1, pass, "truth reproduction at n_big=1e6", buf);
}

McReport run_table(Eigen::Index n, std::vector<Scenario> scenarios) {
    McConfig config;
    config.sample_sizes = {n};
    config.replicates = 500;
    config.scenarios = std::move(scenarios);
    config.estimators = {EstimatorKind::plug_in, EstimatorKind::one_step, EstimatorKind::est_eq};
    config.master_seed = 20240101;
    config.threads = 0;
    return run_mc(config);
}

void criterion_2_and_3(const McReport& rep) {
    {
        const McCell& os = cell_of(rep, Scenario::correct, EstimatorKind::one_step, "theta(1)", 1000);
        const McCell& pl = cell_of(rep, Scenario::correct, EstimatorKind::plug_in, "theta(1)", 1000);
        const double ratio = os.est_sd / os.mc_sd;
        const bool pass = std::fabs(os.bias) < 0.005 && os.coverage >= 0.92 &&
                          os.coverage <= 0.975 && os.est_sd >= 0.016 && os.est_sd <= 0.021 &&
                          std::fabs(pl.bias) < 0.005 && ratio >= 0.85 && ratio <= 1.15;
        std::snprintf(buf, sizeof(buf),
                      "one-step bias=%+.4f cov=%.3f est_sd=%.4f mc_sd=%.4f ratio=%.2f; plug-in "
                      "bias=%+.4f; failures=%d",
                      os.bias, os.coverage, os.est_sd, os.mc_sd, ratio, pl.bias, os.failures);
        report(2, pass, "table-1 regression, correct models, n=1000, 500 reps", buf);
    }
    {
        const McCell& pl = cell_of(rep, Scenario::wrong_y, EstimatorKind::plug_in, "theta(1)", 1000);
        const McCell& os = cell_of(rep, Scenario::wrong_y, EstimatorKind::one_step, "theta(1)", 1000);
        const McCell& eq = cell_of(rep, Scenario::wrong_y, EstimatorKind::est_eq, "theta(1)", 1000);
        const bool pass = pl.bias >= 0.09 && pl.bias <= 0.12 && pl.coverage < 0.05 &&
                          std::fabs(os.bias) < 0.01 && os.coverage >= 0.92 && os.coverage <= 0.98 &&
                          eq.bias >= 0.04 && eq.bias <= 0.065;
        std::snprintf(buf, sizeof(buf),
                      "plug-in bias=%+.4f cov=%.3f; one-step bias=%+.4f cov=%.3f; est-eq bias=%+.4f",
                      pl.bias, pl.coverage, os.bias, os.coverage, eq.bias);
        report(3, pass, "robustness signature, incorrect outcome model, n=1000, 500 reps", buf);
    }
}

void criterion_4(const McReport& rep) {
    const McCell& os = cell_of(rep, Scenario::correct, EstimatorKind::one_step, "G(0)", 2000);
    const bool pass = std::fabs(os.bias) < 0.004 && os.coverage >= 0.93 && os.coverage <= 0.98;
    std::snprintf(buf, sizeof(buf), "one-step G(0) bias=%+.4f cov=%.3f est_sd=%.4f", os.bias,
                  os.coverage, os.est_sd);
    report(4, pass, "baseline-index tables, correct models, n=2000, 500 reps", buf);
}

void criterion_5_oracle() {
    Rng rng(20240105);
    int done = 0, skipped = 0;
    double worst = 0.0;
    while (done < 200 && skipped < 2000) {
        const Eigen::Index n = 12 + static_cast<Eigen::Index>(rng.next_u64() % 9);
        const int levels = 2 + static_cast<int>(rng.next_u64() % 2);
        const std::optional<Dataset> data = small_dataset(rng, n, levels);
        if (!data) {
            ++skipped;
            continue;
        }
        bool bad_draw = false;
        for (const CdfStrategy strategy :
             {CdfStrategy::per_income_grid, CdfStrategy::pairwise_derived}) {
            for (const Variant variant : {Variant::a1, Variant::a2}) {
                PropensityFit prop;
                LevelFits fits;
                try {
                    prop = fit_propensity(*data, data->covariates, 0.0);
                    NuisanceOptions opts;
                    opts.cdf_strategy = strategy;
                    opts.grid_size = 12;
                    fits = fit_level(*data, NuisanceDesigns::shared(*data), 0, opts,
                                     variant == Variant::a2);
                } catch (const Error&) {
                    bad_draw = true;
                    break;
                }
                const LevelEstimates impl = estimate_level(*data, prop.pi, fits, variant, 0.95);
                const oracle::EifOracle ref =
                    oracle::eif_transcription(*data, prop.pi, fits, data->covariates, variant);
                worst = std::max(worst, (impl.eif.values - ref.phi).cwiseAbs().maxCoeff());
                worst = std::max(worst, std::fabs(impl.plug_in.value - ref.plug_in));
                worst = std::max(worst, std::fabs(impl.one_step.value - ref.one_step));
                worst = std::max(worst, std::fabs(impl.est_eq.value - ref.est_eq));
            }
            if (bad_draw) break;
        }
        if (bad_draw) {
            ++skipped;
            continue;
        }
        ++done;
    }
    const bool pass = done == 200 && worst < 1e-10;
    std::snprintf(buf, sizeof(buf), "%d datasets x 2 strategies x 2 variants, max |diff|=%.2e",
                  done, worst);
    report(5, pass, "nested-loop oracle equivalence on 200 small datasets", buf);
}

void criterion_6_identities() {
    const Dataset data = generate({.n = 400, .seed = 20240106});
    const PropensityFit prop = fit_propensity(data, data.covariates, 0.0);
    NuisanceOptions opts;
    opts.grid_size = 60;
    const LevelFits fits = fit_level(data, NuisanceDesigns::shared(data), 0, opts, false);
    const LevelEstimates est = estimate_level(data, prop.pi, fits, Variant::a1, 0.95);
    const double n = static_cast<double>(data.n());
    const double id1 =
        std::fabs(est.one_step.value - est.plug_in.value - pairwise_mean(est.eif.values));
    const double zeroed = 2.0 * (2.0 * est.eif.a) / (2.0 * est.eif.b) - 1.0;
    const double id2 = std::fabs(zeroed - est.plug_in.value);
    const double id3 =
        std::fabs(est.one_step.se * est.one_step.se * n - sample_variance(est.eif.values));
    const bool pass = id1 < 1e-12 && id2 < 1e-12 && id3 < 1e-12;
    std::snprintf(buf, sizeof(buf), "|one_step-plug_in-mean(phi)|=%.1e, est_eq reduction=%.1e, "
                                    "|se^2*n-var(phi)|=%.1e",
                  id1, id2, id3);
    report(6, pass, "influence-function algebra identities", buf);
}

void criterion_7_nuisance_invariants() {
    bool monotone_ok = true;
    // monotone and in [0,1] on fitted simulation datasets, both strategies
    for (int k = 0; k < 10 && monotone_ok; ++k) {
        const Dataset data = generate({.n = 800, .seed = 20240107 + static_cast<uint64_t>(k)});
        for (const CdfStrategy strategy :
             {CdfStrategy::per_income_grid, CdfStrategy::pairwise_derived}) {
            NuisanceOptions opts;
            opts.cdf_strategy = strategy;
            const LevelFits fits =
                fit_level(data, NuisanceDesigns::shared(data), k % 3, opts, false);
            if (fits.xi.minCoeff() < 0.0 || fits.xi.maxCoeff() > 1.0) monotone_ok = false;
            std::vector<Eigen::Index> order(static_cast<size_t>(data.n()));
            for (Eigen::Index i = 0; i < data.n(); ++i) order[static_cast<size_t>(i)] = i;
            std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return data.income[a] < data.income[b];
            });
            for (size_t j = 1; j < order.size(); ++j)
                if (fits.xi[order[j]] < fits.xi[order[j - 1]] - 1e-12) monotone_ok = false;
        }
    }
    // randomized DGP with income independent of X: sup distance to the arm
    // empirical CDF over 50 replicates
    double worst_sup = 0.0;
    Rng rng(20240117);
    for (int r = 0; r < 50; ++r) {
        const Eigen::Index n = 2000;
        Dataset data;
        data.y.resize(n);
        data.income.resize(n);
        data.exposure.resize(static_cast<size_t>(n));
        Eigen::MatrixXd raw(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            raw(i, 0) = rng.normal();
            raw(i, 1) = rng.normal();
            data.income[i] = rng.normal();
            data.y[i] = std::fabs(rng.normal(2.0, 1.0));
            data.exposure[static_cast<size_t>(i)] = static_cast<int>(rng.next_u64() % 2);
        }
        data.covariates = with_intercept(raw);
        data.n_levels = 2;
        const LevelFits fits =
            fit_level(data, NuisanceDesigns::shared(data), 0, NuisanceOptions{}, false);
        std::vector<double> arm_inc;
        for (Eigen::Index i = 0; i < n; ++i)
            if (data.exposure[static_cast<size_t>(i)] == 0) arm_inc.push_back(data.income[i]);
        std::sort(arm_inc.begin(), arm_inc.end());
        const Eigen::VectorXd xi = counterfactual_cdf(fits, data.income);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e =
                static_cast<double>(std::upper_bound(arm_inc.begin(), arm_inc.end(),
                                                     data.income[i]) -
                                    arm_inc.begin()) /
                static_cast<double>(arm_inc.size());
            worst_sup = std::max(worst_sup, std::fabs(xi[i] - e));
        }
    }
    const bool pass = monotone_ok && worst_sup < 0.03;
    std::snprintf(buf, sizeof(buf), "monotone/range ok=%d, sup|Xi - arm ECDF| over 50 reps=%.4f",
                  monotone_ok ? 1 : 0, worst_sup);
    report(7, pass, "counterfactual CDF invariants", buf);
}

void criterion_8_glm_oracles() {
    bool pass = true;
    std::string detail;
    // intercept-only closed forms
    {
        Eigen::MatrixXd X = Eigen::MatrixXd::Ones(16, 1);
        Eigen::VectorXd y = Eigen::VectorXd::Zero(16);
        for (int i = 0; i < 4; ++i) y[i] = 1.0;
        const GlmFit logit = fit_binary_glm(X, y, Link::logit);
        const double err1 = std::fabs(logit.coef(0, 0) - std::log(1.0 / 3.0));
        Eigen::VectorXd ylin(3);
        ylin << 1, 2, 3;
        const GlmFit lin = fit_linear(Eigen::MatrixXd::Ones(3, 1), ylin);
        const double err2 = std::fabs(lin.coef(0, 0) - 2.0);
        pass = pass && err1 < 1e-8 && err2 < 1e-8;
        detail += "closed forms " + std::to_string(std::max(err1, err2));
    }
    // K=2 multinomial vs binary logit
    {
        Rng rng(20240108);
        const Eigen::Index n = 500;
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd y(n);
        std::vector<int> labels(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = rng.normal();
            X(i, 2) = rng.normal();
            const double eta = -0.3 + 0.7 * X(i, 1) - 0.4 * X(i, 2);
            y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
            labels[static_cast<size_t>(i)] = static_cast<int>(y[i]);
        }
        const Eigen::MatrixXd pm = predict_multinomial(fit_multinomial(X, labels, 2), X);
        const Eigen::VectorXd pb = predict(fit_binary_glm(X, y, Link::logit), X);
        const double err = (pm.col(1) - pb).cwiseAbs().maxCoeff();
        pass = pass && err < 1e-6;
        detail += ", multinomial-vs-logit " + std::to_string(err);
    }
    // linear fit vs explicit normal equations
    {
        Rng rng(20240109);
        double err = 0.0;
        for (int t = 0; t < 20; ++t) {
            const Eigen::Index n = 15 + static_cast<Eigen::Index>(rng.next_u64() % 36);
            Eigen::MatrixXd X(n, 3);
            Eigen::VectorXd y(n);
            std::vector<std::vector<double>> Xo(static_cast<size_t>(n));
            std::vector<double> yo(static_cast<size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                X(i, 0) = 1.0;
                X(i, 1) = rng.normal();
                X(i, 2) = rng.uniform();
                y[i] = rng.normal(0.0, 2.0);
                Xo[static_cast<size_t>(i)] = {1.0, X(i, 1), X(i, 2)};
                yo[static_cast<size_t>(i)] = y[i];
            }
            const GlmFit fit = fit_linear(X, y);
            const std::vector<double> ref = oracle::least_squares(Xo, yo);
            for (int j = 0; j < 3; ++j)
                err = std::max(err, std::fabs(fit.coef(j, 0) - ref[static_cast<size_t>(j)]));
        }
        pass = pass && err < 1e-8;
        detail += ", normal-equations " + std::to_string(err);
    }
    report(8, pass, "GLM oracles", detail);
}

void criterion_9_end_to_end() {
    // The register case-study values are not reproducible without the data;
    // the end-to-end check substitutes an exported simulation dataset run
    // through the CSV + analysis path under the strict user-data contract.
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "cci_acceptance";
    fs::create_directories(dir);
    Dataset data = generate({.n = 2000, .seed = 20240110});
    data.y = data.y.cwiseMax(0.0);
    const fs::path csv = dir / "dgp.csv";
    save_csv(csv.string(), data);
    CsvSpec spec;
    spec.outcome_col = "y";
    spec.income_col = "income";
    spec.exposure_col = "exposure";
    spec.covariate_cols = {"x1", "x2"};
    spec.income_transform.enabled = false;
    const auto [loaded, load_rep] = load_csv(csv.string(), spec);
    AnalysisOptions opts;
    opts.with_naive = false;
    const AnalysisResult res = analyze(loaded, NuisanceDesigns::shared(loaded), opts);
    const IndexEstimate& th1 = res.contrasts[0].estimates[1];
    // the clamp needed by the strict CSV contract can shift the estimand by
    // up to ~0.01, on top of 3 standard errors
    const bool pass = std::fabs(th1.value - (-0.18879)) < 3.0 * th1.se + 0.01;
    std::snprintf(buf, sizeof(buf),
                  "case-study values are declared non-reproducible; exported-DGP "
                  "estimate theta(1)=%.4f (se %.4f) vs -0.18879",
                  th1.value, th1.se);
    report(9, pass, "non-reproducible content declared + CSV end-to-end", buf);
}

} // namespace

int main() {
    std::printf("acceptance suite: master seed 20240101, noise convention sd\n");
    criterion_1_truth();
    criterion_5_oracle();
    criterion_6_identities();
    criterion_8_glm_oracles();
    criterion_7_nuisance_invariants();
    criterion_9_end_to_end();
    const McReport t1 = run_table(1000, {Scenario::correct, Scenario::wrong_y});
    criterion_2_and_3(t1);
    const McReport t2 = run_table(2000, {Scenario::correct});
    criterion_4(t2);
    std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "SUCCESS" : "FAILURE",
                g_failures);
    return g_failures;
}
