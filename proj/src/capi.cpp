#include "cci.h"

#include <cstring>
#include <map>
#include <string>

#include "analysis.hpp"
#include "io.hpp"
#include "report.hpp"
#include "simulation.hpp"

struct cci_dataset {
    cci::Dataset data;
    cci::LoadReport load;
};

struct cci_report {
    std::map<cci_report_part, std::string> parts;
};

namespace {

thread_local std::string g_last_error;

cci_status status_of(cci::ErrorCode code) {
    return static_cast<cci_status>(static_cast<int>(code));
}

template <class Fn>
cci_status guarded(Fn&& fn) {
    try {
        fn();
        return CCI_OK;
    } catch (const cci::Error& err) {
        g_last_error = err.what();
        return status_of(err.code());
    } catch (const std::exception& err) {
        g_last_error = err.what();
        return CCI_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return CCI_ERR_INTERNAL;
    }
}

std::vector<std::string> split_csv_list(const char* text) {
    std::vector<std::string> out;
    if (text == nullptr) return out;
    std::string cur;
    for (const char* p = text;; ++p) {
        if (*p == ',' || *p == '\0') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
            if (*p == '\0') break;
        } else if (*p != ' ') {
            cur += *p;
        }
    }
    return out;
}

cci::NuisanceOptions nuisance_from(int cdf_strategy, int grid_size, int grid_link,
                                   double trim_threshold, int threads, int64_t block_rows) {
    cci::NuisanceOptions opts;
    opts.cdf_strategy = cdf_strategy == 1 ? cci::CdfStrategy::pairwise_derived
                                          : cci::CdfStrategy::per_income_grid;
    if (grid_size > 0) opts.grid_size = grid_size;
    opts.grid_link = grid_link == 1 ? cci::Link::probit : cci::Link::logit;
    opts.trim_threshold = trim_threshold;
    opts.threads = threads;
    if (block_rows > 0) opts.block_rows = block_rows;
    return opts;
}

struct EstimatorSelection {
    std::vector<cci::EstimatorKind> kinds;
    bool naive = false;
    bool eif = false;
};

EstimatorSelection parse_estimators(const char* text) {
    EstimatorSelection sel;
    std::vector<std::string> names = split_csv_list(text);
    if (names.empty()) names = {"naive", "plug-in", "one-step", "est-eq"};
    for (const std::string& name : names) {
        const cci::EstimatorKind kind = cci::estimator_from_name(name);
        sel.kinds.push_back(kind);
        if (kind == cci::EstimatorKind::naive)
            sel.naive = true;
        else
            sel.eif = true;
    }
    return sel;
}

cci::Json json_of_estimate_options(const cci_estimate_options& o) {
    cci::Json j;
    j["estimators"] = o.estimators ? o.estimators : "naive,plug-in,one-step,est-eq";
    j["variant"] = o.variant == 2 ? "A2" : "A1";
    j["cdf_strategy"] = o.cdf_strategy == 1 ? "pairwise-derived" : "per-income-grid";
    j["grid_size"] = o.grid_size;
    j["grid_link"] = o.grid_link == 1 ? "probit" : "logit";
    j["trim_threshold"] = o.trim_threshold;
    j["conf_level"] = o.conf_level;
    j["naive_bootstrap"] = o.naive_bootstrap;
    j["seed"] = o.seed;
    j["threads"] = o.threads;
    // simulation noise convention, recorded for provenance in every report
    j["noise_convention"] = "sd";
    return j;
}

} // namespace

extern "C" {

const char* cci_version(void) { return cci::library_version(); }

const char* cci_last_error_message(void) { return g_last_error.c_str(); }

void cci_csv_options_init(cci_csv_options* opts) {
    if (opts == nullptr) return;
    std::memset(opts, 0, sizeof(*opts));
    opts->income_transform = 1;
    opts->income_power = 0.2;
    opts->income_offset = 1.0;
}

cci_status cci_dataset_load_csv(const char* path, const cci_csv_options* opts,
                                cci_dataset** out) {
    return guarded([&] {
        cci::require(path != nullptr && opts != nullptr && out != nullptr,
                     cci::ErrorCode::invalid_argument, "cci_dataset_load_csv: null argument");
        cci::CsvSpec spec;
        cci::require(opts->outcome_column && opts->income_column && opts->exposure_column,
                     cci::ErrorCode::invalid_argument,
                     "cci_dataset_load_csv: outcome/income/exposure columns are required");
        spec.outcome_col = opts->outcome_column;
        spec.income_col = opts->income_column;
        spec.exposure_col = opts->exposure_column;
        spec.covariate_cols = split_csv_list(opts->covariate_columns);
        cci::require(!spec.covariate_cols.empty(), cci::ErrorCode::invalid_argument,
                     "cci_dataset_load_csv: at least one covariate column is required");
        spec.income_transform.enabled = opts->income_transform != 0;
        spec.income_transform.power = opts->income_power;
        spec.income_transform.offset = opts->income_offset;
        if (opts->baseline_label != nullptr && opts->baseline_label[0] != '\0')
            spec.baseline_label = opts->baseline_label;
        auto [data, load] = cci::load_csv(path, spec);
        *out = new cci_dataset{std::move(data), std::move(load)};
    });
}

cci_status cci_dataset_from_arrays(const double* y, const double* income, const int* exposure,
                                   const double* covariates, int64_t n, int64_t p,
                                   cci_dataset** out) {
    return guarded([&] {
        cci::require(y && income && exposure && covariates && out,
                     cci::ErrorCode::invalid_argument, "cci_dataset_from_arrays: null argument");
        cci::require(n > 0 && p > 0, cci::ErrorCode::invalid_argument,
                     "cci_dataset_from_arrays: empty dimensions");
        cci::Dataset data;
        data.y = Eigen::Map<const Eigen::VectorXd>(y, n);
        data.income = Eigen::Map<const Eigen::VectorXd>(income, n);
        data.exposure.assign(exposure, exposure + n);
        Eigen::MatrixXd raw(n, p);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < p; ++j) raw(i, j) = covariates[i * p + j];
        data.covariates = cci::with_intercept(raw);
        int max_level = 0;
        for (int e : data.exposure) max_level = std::max(max_level, e);
        data.n_levels = max_level + 1;
        data.validate();
        *out = new cci_dataset{std::move(data), {}};
    });
}

int64_t cci_dataset_rows(const cci_dataset* data) { return data == nullptr ? 0 : data->data.n(); }

int cci_dataset_levels(const cci_dataset* data) {
    return data == nullptr ? 0 : data->data.n_levels;
}

int64_t cci_dataset_dropped_rows(const cci_dataset* data) {
    return data == nullptr ? 0 : data->load.n_dropped_missing;
}

void cci_dataset_free(cci_dataset* data) { delete data; }

void cci_estimate_options_init(cci_estimate_options* opts) {
    if (opts == nullptr) return;
    std::memset(opts, 0, sizeof(*opts));
    opts->variant = 1;
    opts->grid_size = 200;
    opts->trim_threshold = 0.01;
    opts->conf_level = 0.95;
    opts->block_rows = 1024;
}

cci_status cci_estimate(const cci_dataset* data, const cci_estimate_options* opts,
                        cci_report** out) {
    return guarded([&] {
        cci::require(data && opts && out, cci::ErrorCode::invalid_argument,
                     "cci_estimate: null argument");
        const EstimatorSelection sel = parse_estimators(opts->estimators);
        cci::AnalysisOptions aopts;
        aopts.nuisance = nuisance_from(opts->cdf_strategy, opts->grid_size, opts->grid_link,
                                       opts->trim_threshold, opts->threads, opts->block_rows);
        aopts.variant = opts->variant == 2 ? cci::Variant::a2 : cci::Variant::a1;
        aopts.conf_level = opts->conf_level;
        aopts.with_naive = sel.naive;
        aopts.with_eif_estimators = sel.eif;
        aopts.naive_bootstrap = opts->naive_bootstrap;
        aopts.seed = opts->seed;
        const cci::AnalysisResult result =
            cci::analyze(data->data, cci::NuisanceDesigns::shared(data->data), aopts);
        auto* rep = new cci_report;
        rep->parts[CCI_REPORT_CSV] = cci::estimate_report_csv(result, data->load.level_labels);
        cci::Json config = json_of_estimate_options(*opts);
        config["n_dropped_missing"] = data->load.n_dropped_missing;
        rep->parts[CCI_REPORT_JSON] =
            cci::estimate_report_json(result, data->load.level_labels, config).dump(2);
        *out = rep;
    });
}

void cci_simulate_options_init(cci_simulate_options* opts) {
    if (opts == nullptr) return;
    std::memset(opts, 0, sizeof(*opts));
    opts->replicates = 1000;
    opts->variant = 1;
    opts->grid_size = 200;
    opts->trim_threshold = 0.01;
    opts->conf_level = 0.95;
    opts->seed = 20240101;
    opts->noise_scale_is_sd = 1;
    opts->truth_n = 1000000;
}

cci_status cci_simulate(const cci_simulate_options* opts, cci_report** out) {
    return guarded([&] {
        cci::require(opts && out, cci::ErrorCode::invalid_argument, "cci_simulate: null argument");
        cci::McConfig config;
        config.sample_sizes.clear();
        for (const std::string& tok : split_csv_list(opts->sample_sizes))
            config.sample_sizes.push_back(static_cast<Eigen::Index>(std::stoll(tok)));
        if (config.sample_sizes.empty()) config.sample_sizes = {1000};
        config.replicates = opts->replicates;
        config.scenarios.clear();
        for (const std::string& tok : split_csv_list(opts->scenarios))
            config.scenarios.push_back(cci::scenario_from_name(tok));
        if (config.scenarios.empty()) config.scenarios = {cci::Scenario::correct};
        config.estimators.clear();
        for (const std::string& tok : split_csv_list(opts->estimators))
            config.estimators.push_back(cci::estimator_from_name(tok));
        if (config.estimators.empty())
            config.estimators = {cci::EstimatorKind::plug_in, cci::EstimatorKind::one_step,
                                 cci::EstimatorKind::est_eq};
        config.variant = opts->variant == 2 ? cci::Variant::a2 : cci::Variant::a1;
        config.nuisance = nuisance_from(opts->cdf_strategy, opts->grid_size, opts->grid_link,
                                        opts->trim_threshold, 1, 0);
        config.conf_level = opts->conf_level;
        config.master_seed = opts->seed;
        config.threads = opts->threads;
        config.noise_scale_is_sd = opts->noise_scale_is_sd != 0;
        if (opts->truth_n > 0) config.truth_n = opts->truth_n;
        const cci::McReport report = cci::run_mc(config);

        cci::Json config_echo;
        config_echo["sample_sizes"] = opts->sample_sizes ? opts->sample_sizes : "1000";
        config_echo["replicates"] = opts->replicates;
        config_echo["scenarios"] = opts->scenarios ? opts->scenarios : "correct";
        config_echo["estimators"] =
            opts->estimators ? opts->estimators : "plug-in,one-step,est-eq";
        config_echo["variant"] = opts->variant == 2 ? "A2" : "A1";
        config_echo["cdf_strategy"] =
            opts->cdf_strategy == 1 ? "pairwise-derived" : "per-income-grid";
        config_echo["grid_size"] = opts->grid_size;
        config_echo["grid_link"] = opts->grid_link == 1 ? "probit" : "logit";
        config_echo["trim_threshold"] = opts->trim_threshold;
        config_echo["conf_level"] = opts->conf_level;
        config_echo["seed"] = opts->seed;
        config_echo["threads"] = opts->threads;
        config_echo["noise_scale"] = opts->noise_scale_is_sd ? "sd" : "variance";
        config_echo["truth_n"] = opts->truth_n;

        auto* rep = new cci_report;
        rep->parts[CCI_REPORT_CSV] = cci::mc_report_csv(report);
        rep->parts[CCI_REPORT_TEXT] = cci::mc_report_text(report);
        rep->parts[CCI_REPORT_JSON] = cci::mc_report_json(report, config_echo).dump(2);
        *out = rep;
    });
}

void cci_truth_options_init(cci_truth_options* opts) {
    if (opts == nullptr) return;
    opts->n_big = 1000000;
    opts->seed = 20240101;
    opts->noise_scale_is_sd = 1;
}

cci_status cci_truth(const cci_truth_options* opts, double out_values[3], cci_report** report) {
    return guarded([&] {
        cci::require(opts && out_values, cci::ErrorCode::invalid_argument,
                     "cci_truth: null argument");
        const cci::TruthValues truth =
            cci::approximate_truth(opts->n_big, opts->seed, opts->noise_scale_is_sd != 0);
        out_values[0] = truth.g0;
        out_values[1] = truth.theta1;
        out_values[2] = truth.theta2;
        if (report != nullptr) {
            auto* rep = new cci_report;
            rep->parts[CCI_REPORT_JSON] = cci::truth_json(truth).dump(2);
            *report = rep;
        }
    });
}

const char* cci_report_part_get(const cci_report* report, cci_report_part part) {
    if (report == nullptr) return nullptr;
    const auto it = report->parts.find(part);
    return it == report->parts.end() ? nullptr : it->second.c_str();
}

void cci_report_free(cci_report* report) { delete report; }

} // extern "C"
