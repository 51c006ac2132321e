#include "report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "io.hpp"

namespace cci {

namespace {

std::string label_for(const std::vector<std::string>& labels, int level) {
    return static_cast<size_t>(level) < labels.size() ? labels[static_cast<size_t>(level)]
                                                      : std::to_string(level);
}

Json estimate_json(const IndexEstimate& est) {
    Json j;
    j["value"] = est.value;
    if (est.has_se) {
        j["se"] = est.se;
        j["ci"] = Json::array({est.ci_lo, est.ci_hi});
        j["conf_level"] = est.conf_level;
    }
    if (est.estimator == EstimatorKind::plug_in) j["conservative_se"] = true;
    return j;
}

void csv_row(std::ostringstream& out, const std::string& kind, const std::string& label,
             const IndexEstimate& est) {
    out << kind << ',' << label << ',' << estimator_name(est.estimator) << ','
        << format_double(est.value) << ',';
    if (est.has_se)
        out << format_double(est.se) << ',' << format_double(est.ci_lo) << ','
            << format_double(est.ci_hi);
    else
        out << ",,";
    out << "\n";
}

std::string fmt(double v, int prec = 6) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

} // namespace

std::string estimate_report_csv(const AnalysisResult& result,
                                const std::vector<std::string>& level_labels) {
    std::ostringstream out;
    out << "kind,level,estimator,value,se,ci_lo,ci_hi\n";
    for (const LevelBlock& block : result.levels) {
        const std::string label = label_for(level_labels, block.level);
        if (block.naive) csv_row(out, "level", label, *block.naive);
        if (block.eif_estimates) {
            csv_row(out, "level", label, block.eif_estimates->plug_in);
            csv_row(out, "level", label, block.eif_estimates->one_step);
            csv_row(out, "level", label, block.eif_estimates->est_eq);
        }
    }
    for (const ContrastBlock& cb : result.contrasts) {
        const std::string label = label_for(level_labels, cb.level);
        for (const IndexEstimate& est : cb.estimates) csv_row(out, "contrast", label, est);
    }
    return out.str();
}

Json estimate_report_json(const AnalysisResult& result,
                          const std::vector<std::string>& level_labels, const Json& config_echo) {
    Json j;
    j["schema"] = "cci.estimate/1";
    j["library_version"] = library_version();
    j["config"] = config_echo;
    Json data;
    data["n_input"] = result.n_input;
    data["n_kept"] = result.n_kept;
    data["n_trimmed"] = result.n_trimmed;
    data["trim_threshold"] = result.trim_threshold;
    Json labels = Json::array();
    for (size_t e = 0; e < result.levels.size(); ++e)
        labels.push_back(label_for(level_labels, static_cast<int>(e)));
    data["level_labels"] = labels;
    j["data"] = data;

    Json levels = Json::array();
    for (const LevelBlock& block : result.levels) {
        Json lj;
        lj["level"] = block.level;
        lj["label"] = label_for(level_labels, block.level);
        lj["n"] = block.arm_n;
        if (block.naive) lj["naive"] = estimate_json(*block.naive);
        if (block.eif_estimates) {
            lj["plug_in"] = estimate_json(block.eif_estimates->plug_in);
            lj["one_step"] = estimate_json(block.eif_estimates->one_step);
            lj["est_eq"] = estimate_json(block.eif_estimates->est_eq);
        }
        levels.push_back(std::move(lj));
    }
    j["levels"] = levels;

    Json contrasts = Json::array();
    for (const ContrastBlock& cb : result.contrasts) {
        Json cj;
        cj["level"] = cb.level;
        cj["label"] = label_for(level_labels, cb.level);
        for (const IndexEstimate& est : cb.estimates) {
            std::string key = estimator_name(est.estimator);
            std::replace(key.begin(), key.end(), '-', '_');
            cj[key] = estimate_json(est);
        }
        contrasts.push_back(std::move(cj));
    }
    j["contrasts"] = contrasts;
    return j;
}

std::string mc_report_csv(const McReport& report) {
    std::ostringstream out;
    out << "scenario,estimand,estimator,n,replicates,bias,mc_sd,est_sd,coverage,failures\n";
    for (const McCell& cell : report.cells) {
        out << scenario_name(cell.scenario) << ',' << cell.estimand << ','
            << estimator_name(cell.estimator) << ',' << cell.n << ',' << cell.replicates << ','
            << format_double(cell.bias) << ',';
        if (cell.has_mc_sd) out << format_double(cell.mc_sd);
        out << ',' << format_double(cell.est_sd) << ',' << format_double(cell.coverage) << ','
            << cell.failures << "\n";
    }
    return out.str();
}

std::string mc_report_text(const McReport& report) {
    std::ostringstream out;
    out << "Truth (n_big=" << report.truth.n_big << ", noise scale "
        << (report.noise_scale_is_sd ? "sd" : "variance") << "): G(0)=" << fmt(report.truth.g0, 5)
        << "  theta(1)=" << fmt(report.truth.theta1, 5)
        << "  theta(2)=" << fmt(report.truth.theta2, 5) << "\n";

    std::set<Eigen::Index> sizes;
    std::set<std::string> estimands;
    for (const McCell& cell : report.cells) {
        sizes.insert(cell.n);
        estimands.insert(cell.estimand);
    }
    for (const Eigen::Index n : sizes) {
        std::vector<Scenario> scen_order;
        for (const McCell& cell : report.cells)
            if (cell.n == n &&
                std::find(scen_order.begin(), scen_order.end(), cell.scenario) == scen_order.end())
                scen_order.push_back(cell.scenario);
        out << "\nSample size n=" << n << " (" << report.replicates_requested
            << " replicates)\n";
        for (const Scenario scenario : scen_order) {
            out << "-- " << scenario_name(scenario) << "\n";
            out << "  estimator   estimand    bias       MC sd      est sd     coverage\n";
            for (const McCell& cell : report.cells) {
                if (cell.n != n || cell.scenario != scenario) continue;
                char line[160];
                std::snprintf(line, sizeof(line), "  %-11s %-10s %+10.6f %10.6f %10.6f %8.3f\n",
                              estimator_name(cell.estimator).c_str(), cell.estimand.c_str(),
                              cell.bias, cell.has_mc_sd ? cell.mc_sd : 0.0, cell.est_sd,
                              cell.coverage);
                out << line;
            }
        }
    }
    return out.str();
}

Json mc_report_json(const McReport& report, const Json& config_echo) {
    Json j;
    j["schema"] = "cci.mc/1";
    j["library_version"] = library_version();
    j["config"] = config_echo;
    j["noise_convention"] = report.noise_scale_is_sd ? "sd" : "variance";
    j["truth"] = truth_json(report.truth);
    j["master_seed"] = report.master_seed;
    j["replicates_requested"] = report.replicates_requested;
    Json cells = Json::array();
    for (const McCell& cell : report.cells) {
        Json cj;
        cj["scenario"] = scenario_name(cell.scenario);
        cj["estimand"] = cell.estimand;
        cj["estimator"] = estimator_name(cell.estimator);
        cj["n"] = cell.n;
        cj["replicates"] = cell.replicates;
        cj["bias"] = cell.bias;
        if (cell.has_mc_sd)
            cj["mc_sd"] = cell.mc_sd;
        else
            cj["mc_sd"] = nullptr;
        cj["est_sd"] = cell.est_sd;
        cj["coverage"] = cell.coverage;
        cj["failures"] = cell.failures;
        cells.push_back(std::move(cj));
    }
    j["cells"] = cells;
    return j;
}

Json truth_json(const TruthValues& truth) {
    Json j;
    j["schema"] = "cci.truth/1";
    j["library_version"] = library_version();
    j["g0"] = truth.g0;
    j["theta1"] = truth.theta1;
    j["theta2"] = truth.theta2;
    j["n_big"] = truth.n_big;
    j["seed"] = truth.seed;
    j["noise_convention"] = truth.noise_scale_is_sd ? "sd" : "variance";
    return j;
}

} // namespace cci
