#include "io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace cci {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "na";
}

bool parse_double(const std::string& cell, double& out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    out = std::strtod(begin, &end);
    return end == begin + cell.size() && end != begin && errno == 0 && std::isfinite(out);
}

size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    fail(ErrorCode::parse, "load_csv: column '" + name + "' not found in header");
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::pair<Dataset, LoadReport> load_csv(const std::string& path, const CsvSpec& spec) {
    require(!spec.income_transform.enabled || spec.income_transform.power > 0.0,
            ErrorCode::invalid_argument, "load_csv: income transform power must be positive");
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "load_csv: cannot open '" + path + "'");

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse,
            "load_csv: empty file '" + path + "'");
    const std::vector<std::string> raw_header = split_line(line);
    std::vector<std::string> header;
    header.reserve(raw_header.size());
    for (const std::string& h : raw_header) header.push_back(trim(h));

    const size_t yc = column_index(header, spec.outcome_col);
    const size_t ic = column_index(header, spec.income_col);
    const size_t ec = column_index(header, spec.exposure_col);
    std::vector<size_t> xc;
    for (const std::string& name : spec.covariate_cols) xc.push_back(column_index(header, name));

    std::vector<double> ys, incomes;
    std::vector<std::string> exposures;
    std::vector<std::vector<double>> covs;
    LoadReport rep;

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        ++rep.n_raw;
        const std::vector<std::string> cells = split_line(line);
        auto cell_at = [&](size_t idx, const std::string& name) -> std::string {
            require(idx < cells.size(), ErrorCode::parse,
                    "load_csv: line " + std::to_string(line_no) + " is missing column '" + name +
                        "'");
            return trim(cells[idx]);
        };
        std::vector<std::string> used;
        used.push_back(cell_at(yc, spec.outcome_col));
        used.push_back(cell_at(ic, spec.income_col));
        used.push_back(cell_at(ec, spec.exposure_col));
        for (size_t k = 0; k < xc.size(); ++k) used.push_back(cell_at(xc[k], spec.covariate_cols[k]));
        if (std::any_of(used.begin(), used.end(), [](const std::string& c) { return is_missing(c); })) {
            ++rep.n_dropped_missing;
            continue;
        }
        auto parse_cell = [&](const std::string& cell, const std::string& name) {
            double v = 0.0;
            if (!parse_double(cell, v))
                fail(ErrorCode::parse, "load_csv: line " + std::to_string(line_no) +
                                           ", column '" + name + "': cannot parse '" + cell + "'");
            return v;
        };
        ys.push_back(parse_cell(used[0], spec.outcome_col));
        double inc = parse_cell(used[1], spec.income_col);
        if (spec.income_transform.enabled) {
            const double shifted = inc + spec.income_transform.offset;
            require(shifted >= 0.0, ErrorCode::parse,
                    "load_csv: line " + std::to_string(line_no) +
                        ": income + offset is negative; cannot apply power transform");
            inc = std::pow(shifted, spec.income_transform.power);
        }
        incomes.push_back(inc);
        exposures.push_back(used[2]);
        std::vector<double> row;
        for (size_t k = 0; k < xc.size(); ++k)
            row.push_back(parse_cell(used[3 + k], spec.covariate_cols[k]));
        covs.push_back(std::move(row));
    }
    rep.n_loaded = static_cast<Eigen::Index>(ys.size());
    require(rep.n_loaded > 0, ErrorCode::parse, "load_csv: no usable rows after cleaning");

    // exposure recoding: ascending raw labels (numeric when all labels parse),
    // with the baseline label forced to level 0
    std::vector<std::string> labels;
    {
        std::vector<std::string> distinct;
        for (const std::string& e : exposures)
            if (std::find(distinct.begin(), distinct.end(), e) == distinct.end())
                distinct.push_back(e);
        bool all_numeric = true;
        std::vector<double> parsed(distinct.size());
        for (size_t i = 0; i < distinct.size(); ++i)
            if (!parse_double(distinct[i], parsed[i])) {
                all_numeric = false;
                break;
            }
        std::vector<size_t> order(distinct.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (all_numeric)
            std::sort(order.begin(), order.end(),
                      [&](size_t a, size_t b) { return parsed[a] < parsed[b]; });
        else
            std::sort(order.begin(), order.end(),
                      [&](size_t a, size_t b) { return distinct[a] < distinct[b]; });
        for (size_t i : order) labels.push_back(distinct[i]);
        if (spec.baseline_label) {
            const auto it = std::find(labels.begin(), labels.end(), *spec.baseline_label);
            require(it != labels.end(), ErrorCode::invalid_argument,
                    "load_csv: baseline label '" + *spec.baseline_label +
                        "' does not appear in the exposure column");
            std::rotate(labels.begin(), it, it + 1);
        }
    }
    std::map<std::string, int> code;
    for (size_t i = 0; i < labels.size(); ++i) code[labels[i]] = static_cast<int>(i);
    rep.level_labels = labels;

    Dataset data;
    const Eigen::Index n = rep.n_loaded;
    data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    data.income = Eigen::Map<Eigen::VectorXd>(incomes.data(), n);
    data.exposure.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        data.exposure[static_cast<size_t>(i)] = code[exposures[static_cast<size_t>(i)]];
    Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(spec.covariate_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (size_t k = 0; k < spec.covariate_cols.size(); ++k)
            raw(i, static_cast<Eigen::Index>(k)) = covs[static_cast<size_t>(i)][k];
    data.covariates = with_intercept(raw);
    data.n_levels = static_cast<int>(labels.size());
    data.validate();
    return {std::move(data), std::move(rep)};
}

void save_csv(const std::string& path, const Dataset& data,
              const std::vector<std::string>& level_labels) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "save_csv: cannot open '" + path + "' for writing");
    const Eigen::Index p = data.covariates.cols() - 1;
    out << "y,income,exposure";
    for (Eigen::Index j = 1; j <= p; ++j) out << ",x" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << format_double(data.y[i]) << ',' << format_double(data.income[i]) << ',';
        const int e = data.exposure[static_cast<size_t>(i)];
        if (static_cast<size_t>(e) < level_labels.size())
            out << level_labels[static_cast<size_t>(e)];
        else
            out << e;
        for (Eigen::Index j = 1; j <= p; ++j) out << ',' << format_double(data.covariates(i, j));
        out << "\n";
    }
    require(out.good(), ErrorCode::io, "save_csv: write failure on '" + path + "'");
}

} // namespace cci
