#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "analysis.hpp"

namespace cci {

enum class Scenario { correct, wrong_pi, wrong_y, wrong_all };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct DgpConfig {
    Eigen::Index n = 1000;
    uint64_t seed = 1;
    // N(0,2) noise read as sd = 2 (calibrated default) vs variance = 2.
    bool noise_scale_is_sd = true;
    Scenario scenario = Scenario::correct;
};

// Three-level DGP: every potential income/outcome pair for each row plus the
// realized exposure, so the observed dataset and the truth computation share
// one generator.
struct PotentialData {
    Eigen::MatrixXd x;          // n x 2
    Eigen::MatrixXd income_pot; // n x 3
    Eigen::MatrixXd y_pot;      // n x 3
    std::vector<int> exposure;
};

PotentialData generate_potential(Eigen::Index n, uint64_t seed, bool noise_scale_is_sd);

// Observed dataset by consistency; covariates stay untransformed (scenario
// transforms apply only to the designs handed to the nuisance fits).
Dataset generate(const DgpConfig& config);

// Softmax exposure probabilities at covariates (x1, x2).
Eigen::Vector3d dgp_propensities(double x1, double x2);

// Design matrices per scenario: misspecified roles see log(X_j^2) in place of
// X_j; the rank-model designs always see the raw covariates.
NuisanceDesigns scenario_designs(const Dataset& data, Scenario scenario);

struct TruthValues {
    double g0 = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    Eigen::Index n_big = 0;
    uint64_t seed = 0;
    bool noise_scale_is_sd = true;
};

// Counterfactual indexes straight from the potential outcomes (no
// confounding, no nuisance fits) on one large sample.
TruthValues approximate_truth(Eigen::Index n_big, uint64_t seed, bool noise_scale_is_sd = true);

struct McConfig {
    std::vector<Eigen::Index> sample_sizes = {1000};
    int replicates = 1000;
    std::vector<Scenario> scenarios = {Scenario::correct};
    std::vector<EstimatorKind> estimators = {EstimatorKind::plug_in, EstimatorKind::one_step,
                                             EstimatorKind::est_eq};
    Variant variant = Variant::a1;
    NuisanceOptions nuisance;
    double conf_level = 0.95;
    uint64_t master_seed = 20240101;
    int threads = 0; // 0: hardware concurrency
    bool noise_scale_is_sd = true;
    Eigen::Index truth_n = 1000000;
    double max_failure_rate = 0.01;
};

struct McCell {
    Scenario scenario = Scenario::correct;
    std::string estimand; // "G(0)", "theta(1)", "theta(2)"
    EstimatorKind estimator = EstimatorKind::plug_in;
    Eigen::Index n = 0;
    int replicates = 0; // successful replicates aggregated
    double bias = 0.0;
    bool has_mc_sd = false;
    double mc_sd = 0.0;
    double est_sd = 0.0;
    double coverage = 0.0;
    int failures = 0;
};

struct McReport {
    TruthValues truth;
    int replicates_requested = 0;
    uint64_t master_seed = 0;
    bool noise_scale_is_sd = true;
    std::vector<McCell> cells;
};

// Monte Carlo harness: per replicate one dataset (seed derived from
// (master_seed, n, r) in counter mode) shared by every estimator and
// scenario; failed replicates are excluded and counted, and the run aborts if
// more than max_failure_rate of them fail.
McReport run_mc(const McConfig& config);

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

} // namespace cci
