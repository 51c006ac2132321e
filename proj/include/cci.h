/* C interface to the counterfactual concentration index library.
 *
 * All entry points return a cci_status; on failure the thread-local message
 * from cci_last_error_message() describes what went wrong. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching *_free function.
 */
#ifndef CCI_H
#define CCI_H

#include <stdint.h>

#if defined(_WIN32)
#define CCI_API __declspec(dllexport)
#else
#define CCI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cci_status {
    CCI_OK = 0,
    CCI_ERR_INVALID_ARGUMENT = 1,
    CCI_ERR_RANK_DEFICIENT = 2,
    CCI_ERR_SEPARATION = 3,
    CCI_ERR_EMPTY_CLASS = 4,
    CCI_ERR_DEGENERATE_OUTCOME = 5,
    CCI_ERR_NUMERIC_DEGENERACY = 6,
    CCI_ERR_IO = 7,
    CCI_ERR_PARSE = 8,
    CCI_ERR_INTERNAL = 9
} cci_status;

typedef struct cci_dataset cci_dataset;
typedef struct cci_report cci_report;

CCI_API const char* cci_version(void);
CCI_API const char* cci_last_error_message(void);

/* ---------- datasets ---------- */

typedef struct cci_csv_options {
    const char* outcome_column;
    const char* income_column;
    const char* exposure_column;
    const char* covariate_columns; /* comma-separated column names */
    int income_transform;          /* 0: none, 1: (income + offset)^power */
    double income_power;
    double income_offset;
    const char* baseline_label;    /* optional raw label recoded to level 0 */
} cci_csv_options;

CCI_API void cci_csv_options_init(cci_csv_options* opts);
CCI_API cci_status cci_dataset_load_csv(const char* path, const cci_csv_options* opts,
                                        cci_dataset** out);
/* covariates: row-major n x p without an intercept column */
CCI_API cci_status cci_dataset_from_arrays(const double* y, const double* income,
                                           const int* exposure, const double* covariates,
                                           int64_t n, int64_t p, cci_dataset** out);
CCI_API int64_t cci_dataset_rows(const cci_dataset* data);
CCI_API int cci_dataset_levels(const cci_dataset* data);
CCI_API int64_t cci_dataset_dropped_rows(const cci_dataset* data);
CCI_API void cci_dataset_free(cci_dataset* data);

/* ---------- estimation ---------- */

typedef struct cci_estimate_options {
    const char* estimators; /* comma-separated: naive,plug-in,one-step,est-eq */
    int variant;            /* 1 or 2 */
    int cdf_strategy;       /* 0: per-income grid, 1: pairwise-derived */
    int grid_size;
    int grid_link;          /* 0: logit, 1: probit */
    double trim_threshold;
    double conf_level;
    int naive_bootstrap;    /* 0: influence-function se */
    uint64_t seed;
    int threads;            /* 0: hardware concurrency */
    int64_t block_rows;
} cci_estimate_options;

CCI_API void cci_estimate_options_init(cci_estimate_options* opts);
CCI_API cci_status cci_estimate(const cci_dataset* data, const cci_estimate_options* opts,
                                cci_report** out);

/* ---------- simulation study ---------- */

typedef struct cci_simulate_options {
    const char* sample_sizes; /* comma-separated */
    int replicates;
    const char* scenarios;    /* comma-separated: correct,wrong_pi,wrong_y,wrong_all */
    const char* estimators;
    int variant;
    int cdf_strategy;
    int grid_size;
    int grid_link;
    double trim_threshold;
    double conf_level;
    uint64_t seed;
    int threads;
    int noise_scale_is_sd;    /* nonzero: N(0,2) read as sd 2 (calibrated default) */
    int64_t truth_n;
} cci_simulate_options;

CCI_API void cci_simulate_options_init(cci_simulate_options* opts);
CCI_API cci_status cci_simulate(const cci_simulate_options* opts, cci_report** out);

typedef struct cci_truth_options {
    int64_t n_big;
    uint64_t seed;
    int noise_scale_is_sd;
} cci_truth_options;

CCI_API void cci_truth_options_init(cci_truth_options* opts);
/* out_values receives {G(0), theta(1), theta(2)}; report may be NULL */
CCI_API cci_status cci_truth(const cci_truth_options* opts, double out_values[3],
                             cci_report** report);

/* ---------- reports ---------- */

typedef enum cci_report_part {
    CCI_REPORT_JSON = 0,
    CCI_REPORT_CSV = 1,
    CCI_REPORT_TEXT = 2
} cci_report_part;

/* Returns NULL when the part is not produced by the command. The pointer is
 * valid for the lifetime of the report. */
CCI_API const char* cci_report_part_get(const cci_report* report, cci_report_part part);
CCI_API void cci_report_free(cci_report* report);

#ifdef __cplusplus
}
#endif

#endif /* CCI_H */
