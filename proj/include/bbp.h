#ifndef BBP_H
#define BBP_H

/* C interface to the feature-allocation library: stick-breaking draws,
 * binary feature matrices, exact and asymptotic feature-count curves, and
 * MCMC inference for the gated linear factor model.
 *
 * Every fallible call returns a bbp_status; on failure bbp_last_error()
 * describes the problem for the calling thread until its next failure.
 * Objects returned through out-parameters are owned by the caller and
 * released with the matching _free function. */

#include <stdint.h>

#if defined(_WIN32)
#define BBP_API __declspec(dllexport)
#else
#define BBP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bbp_status {
  BBP_OK = 0,
  BBP_ERR_INVALID = 1, /* rejected argument or inconsistent state */
  BBP_ERR_NUMERIC = 2, /* numerical failure inside a computation */
  BBP_ERR_IO = 3,      /* input/output failure */
  BBP_ERR_NULL = 4     /* required pointer was null */
} bbp_status;

BBP_API const char* bbp_version(void);
BBP_API const char* bbp_last_error(void);

/* ------------------------------------------------------------- randomness */

typedef struct bbp_stream bbp_stream;

BBP_API bbp_stream* bbp_stream_new(uint64_t seed);
BBP_API bbp_stream* bbp_stream_split(const bbp_stream* stream, uint64_t index);
BBP_API void bbp_stream_free(bbp_stream* stream);

/* ------------------------------------------------- stick-breaking measure */

typedef struct bbp_draw bbp_draw;

BBP_API bbp_status bbp_draw_new(double mass, double concentration,
                                double discount, int64_t rounds,
                                bbp_stream* stream, bbp_draw** out);
BBP_API int64_t bbp_draw_size(const bbp_draw* draw);
BBP_API double bbp_draw_total_mass(const bbp_draw* draw);
/* cap is the element capacity of out; the draw size must fit */
BBP_API bbp_status bbp_draw_weights(const bbp_draw* draw, double* out,
                                    int64_t cap);
BBP_API bbp_status bbp_draw_rounds(const bbp_draw* draw, int64_t* out,
                                   int64_t cap);
BBP_API void bbp_draw_free(bbp_draw* draw);

/* -------------------------------------------------- binary feature matrix */

typedef struct bbp_matrix bbp_matrix;

BBP_API bbp_status bbp_matrix_draw(double mass, double concentration,
                                   double discount, int64_t n_rows,
                                   int64_t rounds, bbp_stream* stream,
                                   bbp_matrix** out);
BBP_API int64_t bbp_matrix_rows(const bbp_matrix* matrix);
BBP_API int64_t bbp_matrix_cols(const bbp_matrix* matrix);
BBP_API bbp_status bbp_matrix_entry(const bbp_matrix* matrix, int64_t row,
                                    int64_t col, int32_t* out);
/* features seen within the first 1..n rows; out holds n_rows values */
BBP_API bbp_status bbp_matrix_cumulative(const bbp_matrix* matrix,
                                         int64_t* out, int64_t cap);
/* features per row; out holds n_rows values */
BBP_API bbp_status bbp_matrix_row_counts(const bbp_matrix* matrix,
                                         int64_t* out, int64_t cap);
/* features by multiplicity 1..n_rows; out holds n_rows values */
BBP_API bbp_status bbp_matrix_multiplicity_hist(const bbp_matrix* matrix,
                                                int64_t* out, int64_t cap);
BBP_API void bbp_matrix_free(bbp_matrix* matrix);

/* -------------------------------------------------------- mean curves */

/* curve kinds */
#define BBP_CURVE_TOTAL_BY_ROWS 0
#define BBP_CURVE_TOTAL_BY_TIME 1
#define BBP_CURVE_MULTIPLICITY_BY_ROWS 2
#define BBP_CURVE_MULTIPLICITY_BY_TIME 3

BBP_API bbp_status bbp_exact_curve(double mass, double concentration,
                                   double discount, int32_t kind,
                                   int64_t multiplicity, const double* xs,
                                   int64_t n, double* out);
BBP_API bbp_status bbp_asymptotic_total(double mass, double concentration,
                                        double discount, const double* xs,
                                        int64_t n, double* out);
BBP_API bbp_status bbp_asymptotic_multiplicity(double mass,
                                               double concentration,
                                               double discount,
                                               int64_t multiplicity,
                                               const double* xs, int64_t n,
                                               double* out);
BBP_API bbp_status bbp_power_law_constant(double mass, double concentration,
                                          double discount, double* out);
BBP_API bbp_status bbp_classic_means(double mass, double concentration,
                                     double n_rows, double* total,
                                     double* singletons);
BBP_API bbp_status bbp_ranked_weight_count(double mass, double concentration,
                                           double discount, double threshold,
                                           double* out);
BBP_API bbp_status bbp_chernoff_tail(double expected_total, double threshold,
                                     double* out);
BBP_API bbp_status bbp_fit_power_law(const double* xs, const double* ys,
                                     int64_t n, int32_t upper_half,
                                     double* constant, double* exponent,
                                     double* residual_rms);

/* -------------------------------------------------------------- inference */

typedef struct bbp_model bbp_model;

/* data is row-major with n_rows * n_cols entries */
BBP_API bbp_status bbp_model_new(const double* data, int64_t n_rows,
                                 int64_t n_cols, bbp_model** out);
BBP_API bbp_status bbp_model_set_hyper(bbp_model* model, double noise_variance,
                                       double weight_variance,
                                       const double* factor_variances,
                                       int64_t n_cols);
BBP_API bbp_status bbp_model_set_params(bbp_model* model, double mass,
                                        double concentration, double discount);
BBP_API bbp_status bbp_model_set_mcmc(bbp_model* model, int64_t iterations,
                                      int64_t burn_in, int64_t stick_samples,
                                      int64_t thin, int64_t init_features,
                                      uint64_t seed);
BBP_API bbp_status bbp_model_run(bbp_model* model);

BBP_API int64_t bbp_model_trace_len(const bbp_model* model);
BBP_API bbp_status bbp_model_trace_row(const bbp_model* model, int64_t index,
                                       int64_t* iteration,
                                       int64_t* feature_count,
                                       double* concentration, double* discount,
                                       double* mass, double* rmse);
BBP_API int64_t bbp_model_feature_count(const bbp_model* model);
BBP_API bbp_status bbp_model_params(const bbp_model* model, double* mass,
                                    double* concentration, double* discount);
/* row-major snapshots of the final state */
BBP_API bbp_status bbp_model_gates(const bbp_model* model, int32_t* out,
                                   int64_t cap);
BBP_API bbp_status bbp_model_weights(const bbp_model* model, double* out,
                                     int64_t cap);
BBP_API bbp_status bbp_model_factors(const bbp_model* model, double* out,
                                     int64_t cap);
BBP_API void bbp_model_free(bbp_model* model);

/* target_features <= 0 draws one instance as-is; positive values redraw
 * until the truth holds exactly that many features (max_tries attempts) */
BBP_API bbp_status bbp_synthetic(double mass, double concentration,
                                 double discount, double noise_variance,
                                 double weight_variance,
                                 const double* factor_variances,
                                 int64_t n_rows, int64_t n_cols,
                                 int64_t rounds, int64_t target_features,
                                 int64_t max_tries, bbp_stream* stream,
                                 double* data_out, int64_t* truth_features);

BBP_API bbp_status bbp_autocorrelation(const double* series, int64_t n,
                                       int64_t max_lag, double* out);

/* ------------------------------------------------------------ csv strings */

/* Returned strings are heap-allocated; release with bbp_string_free. */
BBP_API char* bbp_model_trace_csv(const bbp_model* model, uint64_t seed);
BBP_API char* bbp_table_csv(uint64_t seed, const char* const* names,
                            const double* const* columns, int64_t n_cols,
                            int64_t n_rows);
BBP_API void bbp_string_free(char* text);

/* Parsed numeric CSV file: comment lines dropped, one header row, rectangular
 * finite body. Malformed input fails with BBP_ERR_IO and a message naming the
 * offending row and column. */
typedef struct bbp_table bbp_table;

BBP_API bbp_status bbp_table_read(const char* path, bbp_table** out);
BBP_API int64_t bbp_table_rows(const bbp_table* table);
BBP_API int64_t bbp_table_cols(const bbp_table* table);
BBP_API bbp_status bbp_table_cell(const bbp_table* table, int64_t row,
                                  int64_t col, double* out);
BBP_API bbp_status bbp_table_column(const bbp_table* table, int64_t col,
                                    double* out, int64_t cap);
/* Column header; NULL when the index is out of range. */
BBP_API const char* bbp_table_name(const bbp_table* table, int64_t col);
BBP_API void bbp_table_free(bbp_table* table);

#ifdef __cplusplus
}
#endif

#endif /* BBP_H */
