#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"

namespace cci {

// Variance-stabilizing income transform i -> (i + offset)^power.
struct IncomeTransform {
    bool enabled = true;
    double power = 0.2;
    double offset = 1.0;
};

struct CsvSpec {
    std::string outcome_col;
    std::string income_col;
    std::string exposure_col;
    std::vector<std::string> covariate_cols;
    IncomeTransform income_transform;
    // Raw label recoded to level 0; remaining labels keep ascending order.
    std::optional<std::string> baseline_label;
};

struct LoadReport {
    Eigen::Index n_raw = 0;
    Eigen::Index n_loaded = 0;
    Eigen::Index n_dropped_missing = 0;
    std::vector<std::string> level_labels; // raw label per coded level
};

// Comma-separated, UTF-8, '.' decimal, header row required, no quoting.
// Rows with a missing value in any used column are dropped (counted);
// unparseable cells abort with the file line and column name.
std::pair<Dataset, LoadReport> load_csv(const std::string& path, const CsvSpec& spec);

// Writes y, income, exposure and the non-intercept covariates with
// round-trippable formatting.
void save_csv(const std::string& path, const Dataset& data,
              const std::vector<std::string>& level_labels = {});

std::string format_double(double v);

} // namespace cci
