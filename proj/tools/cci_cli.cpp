// Command-line front end. Talks to the library exclusively through the C API
// in cci.h; parsing and file placement happen here, everything statistical
// happens behind the API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cci.h"

namespace {

int fail_with(cci_status status, const std::string& context) {
    std::fprintf(stderr,
                 "{\"error\":{\"code\":%d,\"context\":\"%s\",\"message\":\"%s\"}}\n",
                 static_cast<int>(status), context.c_str(), cci_last_error_message());
    return 1;
}

bool write_file(const std::string& path, const char* content) {
    if (content == nullptr) return false;
    std::ofstream out(path);
    if (!out.good()) return false;
    out << content;
    return out.good();
}

int resolve_threads_flag(int threads) {
    if (const char* env = std::getenv("CCI_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return threads;
}

struct CommonFlags {
    std::string variant = "A1";
    std::string cdf_strategy = "per-income-grid";
    int grid_size = 200;
    std::string grid_link = "logit";
    double trim = 0.01;
    double conf_level = 0.95;
    uint64_t seed = 20240101;
    int threads = 0;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--variant", flags.variant, "Identification path for the EIF: A1 or A2")
        ->check(CLI::IsMember({"A1", "A2"}));
    cmd->add_option("--cdf-strategy", flags.cdf_strategy,
                    "Counterfactual CDF strategy: per-income-grid or pairwise-derived")
        ->check(CLI::IsMember({"per-income-grid", "pairwise-derived"}));
    cmd->add_option("--grid-size", flags.grid_size, "Income quantile grid size");
    cmd->add_option("--grid-link", flags.grid_link, "Per-income CDF link: logit or probit")
        ->check(CLI::IsMember({"logit", "probit"}));
    cmd->add_option("--trim", flags.trim, "Propensity trimming threshold");
    cmd->add_option("--level", flags.conf_level, "Confidence level");
    cmd->add_option("--seed", flags.seed, "Master seed; all randomness derives from it");
    cmd->add_option("--threads", flags.threads,
                    "Worker threads (0 = hardware; CCI_THREADS overrides)");
    cmd->add_option("--out-dir", flags.out_dir, "Output directory");
}

int emit_parts(const cci_report* report, const std::string& out_dir,
               const std::string& stem, bool with_text) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::string base = out_dir + "/" + stem;
    if (!write_file(base + ".csv", cci_report_part_get(report, CCI_REPORT_CSV)))
        if (cci_report_part_get(report, CCI_REPORT_CSV) != nullptr) {
            std::fprintf(stderr, "{\"error\":{\"code\":7,\"message\":\"cannot write %s.csv\"}}\n",
                         base.c_str());
            return 1;
        }
    if (!write_file(base + ".json", cci_report_part_get(report, CCI_REPORT_JSON))) {
        std::fprintf(stderr, "{\"error\":{\"code\":7,\"message\":\"cannot write %s.json\"}}\n",
                     base.c_str());
        return 1;
    }
    if (with_text && cci_report_part_get(report, CCI_REPORT_TEXT) != nullptr &&
        !write_file(base + ".txt", cci_report_part_get(report, CCI_REPORT_TEXT))) {
        std::fprintf(stderr, "{\"error\":{\"code\":7,\"message\":\"cannot write %s.txt\"}}\n",
                     base.c_str());
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual concentration index estimation"};
    app.require_subcommand(1);

    // ---- estimate ----
    auto* est = app.add_subcommand("estimate", "Estimate G(e) and contrasts from a CSV dataset");
    std::string input, outcome, income, exposure, covariates, baseline;
    std::string income_transform = "power";
    double income_power = 0.2, income_offset = 1.0;
    std::string estimators = "naive,plug-in,one-step,est-eq";
    int naive_bootstrap = 0;
    CommonFlags ef;
    est->add_option("--input", input, "Input CSV path")->required();
    est->add_option("--outcome", outcome, "Health outcome column")->required();
    est->add_option("--income", income, "Income column")->required();
    est->add_option("--exposure", exposure, "Exposure column")->required();
    est->add_option("--covariates", covariates, "Comma-separated covariate columns")->required();
    est->add_option("--income-transform", income_transform,
                    "Income transform: none or power ((i+offset)^p)")
        ->check(CLI::IsMember({"none", "power"}));
    est->add_option("--income-power", income_power, "Power transform exponent");
    est->add_option("--income-offset", income_offset, "Power transform offset");
    est->add_option("--estimators", estimators, "Comma-separated estimator set");
    est->add_option("--naive-bootstrap", naive_bootstrap,
                    "Bootstrap replicates for the naive se (0 = influence function)");
    est->add_option("--baseline", baseline, "Exposure label recoded to level 0");
    add_common(est, ef);

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo study");
    std::string sizes = "1000";
    int replicates = 1000;
    std::string scenarios = "correct,wrong_pi,wrong_y,wrong_all";
    std::string sim_estimators = "plug-in,one-step,est-eq";
    std::string noise_scale = "sd";
    int64_t truth_n = 1000000;
    CommonFlags sf;
    sim->add_option("--n", sizes, "Comma-separated sample sizes");
    sim->add_option("--replicates", replicates, "Replicates per cell");
    sim->add_option("--scenarios", scenarios, "Comma-separated scenario set");
    sim->add_option("--estimators", sim_estimators, "Comma-separated estimator set");
    sim->add_option("--noise-scale", noise_scale, "N(0,2) read as sd or variance")
        ->check(CLI::IsMember({"sd", "variance"}));
    sim->add_option("--truth-n", truth_n, "Sample size for the truth approximation");
    add_common(sim, sf);

    // ---- truth ----
    auto* tru = app.add_subcommand("truth", "Approximate the true G(0), theta(1), theta(2)");
    int64_t n_big = 1000000;
    std::string truth_noise = "sd";
    uint64_t truth_seed = 20240101;
    std::string truth_out = ".";
    tru->add_option("--n-big", n_big, "Monte Carlo sample size");
    tru->add_option("--seed", truth_seed, "Seed");
    tru->add_option("--noise-scale", truth_noise, "N(0,2) read as sd or variance")
        ->check(CLI::IsMember({"sd", "variance"}));
    tru->add_option("--out-dir", truth_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    if (est->parsed()) {
        cci_csv_options copts;
        cci_csv_options_init(&copts);
        copts.outcome_column = outcome.c_str();
        copts.income_column = income.c_str();
        copts.exposure_column = exposure.c_str();
        copts.covariate_columns = covariates.c_str();
        copts.income_transform = income_transform == "power" ? 1 : 0;
        copts.income_power = income_power;
        copts.income_offset = income_offset;
        copts.baseline_label = baseline.empty() ? nullptr : baseline.c_str();
        cci_dataset* data = nullptr;
        cci_status status = cci_dataset_load_csv(input.c_str(), &copts, &data);
        if (status != CCI_OK) return fail_with(status, "load_csv");
        if (cci_dataset_dropped_rows(data) > 0)
            std::fprintf(stderr, "note: dropped %lld rows with missing values\n",
                         static_cast<long long>(cci_dataset_dropped_rows(data)));

        cci_estimate_options eopts;
        cci_estimate_options_init(&eopts);
        eopts.estimators = estimators.c_str();
        eopts.variant = ef.variant == "A2" ? 2 : 1;
        eopts.cdf_strategy = ef.cdf_strategy == "pairwise-derived" ? 1 : 0;
        eopts.grid_size = ef.grid_size;
        eopts.grid_link = ef.grid_link == "probit" ? 1 : 0;
        eopts.trim_threshold = ef.trim;
        eopts.conf_level = ef.conf_level;
        eopts.naive_bootstrap = naive_bootstrap;
        eopts.seed = ef.seed;
        eopts.threads = resolve_threads_flag(ef.threads);
        cci_report* report = nullptr;
        status = cci_estimate(data, &eopts, &report);
        cci_dataset_free(data);
        if (status != CCI_OK) return fail_with(status, "estimate");
        const int rc = emit_parts(report, ef.out_dir, "estimates", false);
        cci_report_free(report);
        return rc;
    }

    if (sim->parsed()) {
        cci_simulate_options sopts;
        cci_simulate_options_init(&sopts);
        sopts.sample_sizes = sizes.c_str();
        sopts.replicates = replicates;
        sopts.scenarios = scenarios.c_str();
        sopts.estimators = sim_estimators.c_str();
        sopts.variant = sf.variant == "A2" ? 2 : 1;
        sopts.cdf_strategy = sf.cdf_strategy == "pairwise-derived" ? 1 : 0;
        sopts.grid_size = sf.grid_size;
        sopts.grid_link = sf.grid_link == "probit" ? 1 : 0;
        sopts.trim_threshold = sf.trim;
        sopts.conf_level = sf.conf_level;
        sopts.seed = sf.seed;
        sopts.threads = resolve_threads_flag(sf.threads);
        sopts.noise_scale_is_sd = noise_scale == "sd" ? 1 : 0;
        sopts.truth_n = truth_n;
        cci_report* report = nullptr;
        const cci_status status = cci_simulate(&sopts, &report);
        if (status != CCI_OK) return fail_with(status, "simulate");
        const int rc = emit_parts(report, sf.out_dir, "mcreport", true);
        cci_report_free(report);
        return rc;
    }

    // truth
    cci_truth_options topts;
    cci_truth_options_init(&topts);
    topts.n_big = n_big;
    topts.seed = truth_seed;
    topts.noise_scale_is_sd = truth_noise == "sd" ? 1 : 0;
    double values[3] = {0, 0, 0};
    cci_report* report = nullptr;
    const cci_status status = cci_truth(&topts, values, &report);
    if (status != CCI_OK) return fail_with(status, "truth");
    std::error_code ec;
    std::filesystem::create_directories(truth_out, ec);
    const std::string path = truth_out + "/truth.json";
    if (!write_file(path, cci_report_part_get(report, CCI_REPORT_JSON))) {
        cci_report_free(report);
        std::fprintf(stderr, "{\"error\":{\"code\":7,\"message\":\"cannot write %s\"}}\n",
                     path.c_str());
        return 1;
    }
    std::printf("G(0)=%.6f theta(1)=%.6f theta(2)=%.6f\n", values[0], values[1], values[2]);
    cci_report_free(report);
    return 0;
}
