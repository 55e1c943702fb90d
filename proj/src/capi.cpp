#include "bbp.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bbp/bernoulli_process.hpp"
#include "bbp/beta_process.hpp"
#include "bbp/csv.hpp"
#include "bbp/errors.hpp"
#include "bbp/factor_model.hpp"
#include "bbp/power_law.hpp"
#include "bbp/random.hpp"
#include "bbp/version.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const char* what) { g_last_error = what ? what : "unknown"; }

template <typename Fn>
bbp_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return BBP_OK;
  } catch (const bbp::numerical_error& e) {
    set_error(e.what());
    return BBP_ERR_NUMERIC;
  } catch (const bbp::io_error& e) {
    set_error(e.what());
    return BBP_ERR_IO;
  } catch (const std::bad_alloc& e) {
    set_error(e.what());
    return BBP_ERR_NUMERIC;
  } catch (const std::exception& e) {
    set_error(e.what());
    return BBP_ERR_INVALID;
  }
}

bbp_status null_arg(const char* name) {
  set_error((std::string(name) + " must not be null").c_str());
  return BBP_ERR_NULL;
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

void require_capacity(std::int64_t need, std::int64_t cap) {
  if (cap < need) {
    throw std::domain_error("buffer holds " + std::to_string(cap) +
                            " elements, " + std::to_string(need) + " needed");
  }
}

bbp::CurveKind curve_kind_of(std::int32_t kind) {
  switch (kind) {
    case BBP_CURVE_TOTAL_BY_ROWS:
      return bbp::CurveKind::total_by_rows;
    case BBP_CURVE_TOTAL_BY_TIME:
      return bbp::CurveKind::total_by_time;
    case BBP_CURVE_MULTIPLICITY_BY_ROWS:
      return bbp::CurveKind::multiplicity_by_rows;
    case BBP_CURVE_MULTIPLICITY_BY_TIME:
      return bbp::CurveKind::multiplicity_by_time;
    default:
      throw std::domain_error("unknown curve kind " + std::to_string(kind));
  }
}

}  // namespace

struct bbp_stream {
  bbp::RandomStream impl;
};

struct bbp_draw {
  bbp::BetaProcessDraw impl;
};

struct bbp_matrix {
  bbp::FeatureMatrix z;
  bbp::CountStats stats;
};

struct bbp_table {
  bbp::CsvTable impl;
};

struct bbp_model {
  Eigen::MatrixXd x;
  bbp::FactorHyper hyper;
  bbp::BpParams params{1.0, 1.0, 0.3};
  bbp::McmcConfig config;
  std::uint64_t seed = 1;
  bbp::FactorState state;
  bbp::Trace trace;
  bool has_run = false;
};

extern "C" {

const char* bbp_version(void) { return bbp::kVersion; }

const char* bbp_last_error(void) { return g_last_error.c_str(); }

/* ------------------------------------------------------------- randomness */

bbp_stream* bbp_stream_new(uint64_t seed) {
  return new (std::nothrow) bbp_stream{bbp::RandomStream(seed)};
}

bbp_stream* bbp_stream_split(const bbp_stream* stream, uint64_t index) {
  if (stream == nullptr) return nullptr;
  return new (std::nothrow) bbp_stream{stream->impl.split_child(index)};
}

void bbp_stream_free(bbp_stream* stream) { delete stream; }

/* ------------------------------------------------- stick-breaking measure */

bbp_status bbp_draw_new(double mass, double concentration, double discount,
                        int64_t rounds, bbp_stream* stream, bbp_draw** out) {
  if (stream == nullptr) return null_arg("stream");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    auto draw = bbp::stick_break(params, rounds, stream->impl);
    *out = new bbp_draw{std::move(draw)};
  });
}

int64_t bbp_draw_size(const bbp_draw* draw) {
  return draw == nullptr ? -1 : draw->impl.size();
}

double bbp_draw_total_mass(const bbp_draw* draw) {
  return draw == nullptr ? -1.0 : draw->impl.total_mass();
}

bbp_status bbp_draw_weights(const bbp_draw* draw, double* out, int64_t cap) {
  if (draw == nullptr) return null_arg("draw");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    require_capacity(draw->impl.size(), cap);
    std::memcpy(out, draw->impl.weights.data(),
                draw->impl.weights.size() * sizeof(double));
  });
}

bbp_status bbp_draw_rounds(const bbp_draw* draw, int64_t* out, int64_t cap) {
  if (draw == nullptr) return null_arg("draw");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    require_capacity(draw->impl.size(), cap);
    std::memcpy(out, draw->impl.rounds.data(),
                draw->impl.rounds.size() * sizeof(int64_t));
  });
}

void bbp_draw_free(bbp_draw* draw) { delete draw; }

/* -------------------------------------------------- binary feature matrix */

bbp_status bbp_matrix_draw(double mass, double concentration, double discount,
                           int64_t n_rows, int64_t rounds, bbp_stream* stream,
                           bbp_matrix** out) {
  if (stream == nullptr) return null_arg("stream");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    auto z = bbp::draw_feature_matrix(params, n_rows, rounds, stream->impl);
    auto stats = bbp::count_stats(z);
    *out = new bbp_matrix{std::move(z), std::move(stats)};
  });
}

int64_t bbp_matrix_rows(const bbp_matrix* matrix) {
  return matrix == nullptr ? -1 : matrix->z.rows;
}

int64_t bbp_matrix_cols(const bbp_matrix* matrix) {
  return matrix == nullptr ? -1 : matrix->z.cols;
}

bbp_status bbp_matrix_entry(const bbp_matrix* matrix, int64_t row, int64_t col,
                            int32_t* out) {
  if (matrix == nullptr) return null_arg("matrix");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (row < 0 || row >= matrix->z.rows || col < 0 || col >= matrix->z.cols) {
      throw std::domain_error("entry index out of range");
    }
    *out = matrix->z.at(row, col);
  });
}

bbp_status bbp_matrix_cumulative(const bbp_matrix* matrix, int64_t* out,
                                 int64_t cap) {
  if (matrix == nullptr) return null_arg("matrix");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const auto& series = matrix->stats.cumulative_features;
    require_capacity(static_cast<std::int64_t>(series.size()), cap);
    std::memcpy(out, series.data(), series.size() * sizeof(int64_t));
  });
}

bbp_status bbp_matrix_row_counts(const bbp_matrix* matrix, int64_t* out,
                                 int64_t cap) {
  if (matrix == nullptr) return null_arg("matrix");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const auto& counts = matrix->stats.row_counts;
    require_capacity(static_cast<std::int64_t>(counts.size()), cap);
    std::memcpy(out, counts.data(), counts.size() * sizeof(int64_t));
  });
}

bbp_status bbp_matrix_multiplicity_hist(const bbp_matrix* matrix, int64_t* out,
                                        int64_t cap) {
  if (matrix == nullptr) return null_arg("matrix");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    require_capacity(matrix->z.rows, cap);
    for (std::int64_t m = 0; m < matrix->z.rows; ++m) out[m] = 0;
    for (const auto& [multiplicity, columns] : matrix->stats.multiplicity_hist) {
      if (multiplicity >= 1 && multiplicity <= matrix->z.rows) {
        out[multiplicity - 1] = columns;
      }
    }
  });
}

void bbp_matrix_free(bbp_matrix* matrix) { delete matrix; }

/* ------------------------------------------------------------ mean curves */

bbp_status bbp_exact_curve(double mass, double concentration, double discount,
                           int32_t kind, int64_t multiplicity,
                           const double* xs, int64_t n, double* out) {
  if (xs == nullptr) return null_arg("xs");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    const std::vector<double> points(xs, xs + n);
    const auto curve =
        bbp::exact_mean_curve(params, curve_kind_of(kind), points, multiplicity);
    std::memcpy(out, curve.values.data(), curve.values.size() * sizeof(double));
  });
}

bbp_status bbp_asymptotic_total(double mass, double concentration,
                                double discount, const double* xs, int64_t n,
                                double* out) {
  if (xs == nullptr) return null_arg("xs");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    for (int64_t i = 0; i < n; ++i) {
      out[i] = bbp::asymptotic_total_features(params, xs[i]);
    }
  });
}

bbp_status bbp_asymptotic_multiplicity(double mass, double concentration,
                                       double discount, int64_t multiplicity,
                                       const double* xs, int64_t n,
                                       double* out) {
  if (xs == nullptr) return null_arg("xs");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    for (int64_t i = 0; i < n; ++i) {
      out[i] = bbp::asymptotic_multiplicity_features(params, multiplicity, xs[i]);
    }
  });
}

bbp_status bbp_power_law_constant(double mass, double concentration,
                                  double discount, double* out) {
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    *out = bbp::power_law_constant(params);
  });
}

bbp_status bbp_classic_means(double mass, double concentration, double n_rows,
                             double* total, double* singletons) {
  if (total == nullptr) return null_arg("total");
  if (singletons == nullptr) return null_arg("singletons");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, 0.0};
    const auto means = bbp::classic_mean_features(params, n_rows);
    *total = means.total;
    *singletons = means.singletons;
  });
}

bbp_status bbp_ranked_weight_count(double mass, double concentration,
                                   double discount, double threshold,
                                   double* out) {
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    *out = bbp::ranked_weight_count(params, threshold);
  });
}

bbp_status bbp_chernoff_tail(double expected_total, double threshold,
                             double* out) {
  if (out == nullptr) return null_arg("out");
  return guarded([&] { *out = bbp::chernoff_tail(expected_total, threshold); });
}

bbp_status bbp_fit_power_law(const double* xs, const double* ys, int64_t n,
                             int32_t upper_half, double* constant,
                             double* exponent, double* residual_rms) {
  if (xs == nullptr) return null_arg("xs");
  if (ys == nullptr) return null_arg("ys");
  if (constant == nullptr) return null_arg("constant");
  if (exponent == nullptr) return null_arg("exponent");
  if (residual_rms == nullptr) return null_arg("residual_rms");
  return guarded([&] {
    const std::vector<double> vx(xs, xs + n);
    const std::vector<double> vy(ys, ys + n);
    const auto law = bbp::fit_power_law(vx, vy, upper_half != 0);
    *constant = law.constant;
    *exponent = law.exponent;
    *residual_rms = law.residual_rms;
  });
}

/* -------------------------------------------------------------- inference */

bbp_status bbp_model_new(const double* data, int64_t n_rows, int64_t n_cols,
                         bbp_model** out) {
  if (data == nullptr) return null_arg("data");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (n_rows < 1 || n_cols < 1) {
      throw std::domain_error("data must have positive dimensions");
    }
    auto model = std::make_unique<bbp_model>();
    model->x.resize(n_rows, n_cols);
    for (int64_t r = 0; r < n_rows; ++r) {
      for (int64_t c = 0; c < n_cols; ++c) {
        model->x(r, c) = data[r * n_cols + c];
      }
    }
    if (!model->x.allFinite()) {
      throw std::domain_error("data must be finite");
    }
    model->hyper.factor_variances.assign(static_cast<std::size_t>(n_cols), 1.0);
    *out = model.release();
  });
}

bbp_status bbp_model_set_hyper(bbp_model* model, double noise_variance,
                               double weight_variance,
                               const double* factor_variances, int64_t n_cols) {
  if (model == nullptr) return null_arg("model");
  if (factor_variances == nullptr) return null_arg("factor_variances");
  return guarded([&] {
    bbp::FactorHyper hyper;
    hyper.noise_variance = noise_variance;
    hyper.weight_variance = weight_variance;
    hyper.factor_variances.assign(factor_variances, factor_variances + n_cols);
    bbp::validate(hyper, model->x.cols());
    model->hyper = std::move(hyper);
  });
}

bbp_status bbp_model_set_params(bbp_model* model, double mass,
                                double concentration, double discount) {
  if (model == nullptr) return null_arg("model");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    bbp::validate(params);
    model->params = params;
  });
}

bbp_status bbp_model_set_mcmc(bbp_model* model, int64_t iterations,
                              int64_t burn_in, int64_t stick_samples,
                              int64_t thin, int64_t init_features,
                              uint64_t seed) {
  if (model == nullptr) return null_arg("model");
  return guarded([&] {
    bbp::McmcConfig config;
    config.iterations = iterations;
    config.burn_in = burn_in;
    config.stick_samples = stick_samples;
    config.thin = thin;
    config.init_features = init_features;
    config.stream = bbp::RandomStream(seed);
    bbp::validate(config);
    model->config = config;
    model->seed = seed;
  });
}

bbp_status bbp_model_run(bbp_model* model) {
  if (model == nullptr) return null_arg("model");
  return guarded([&] {
    bbp::RandomStream init_stream(model->seed, 1);
    model->state = bbp::init_state(model->x, model->params, model->hyper,
                                   model->config.init_features, init_stream);
    model->trace =
        bbp::run_mcmc(model->x, model->config, model->hyper, model->state);
    model->has_run = true;
  });
}

int64_t bbp_model_trace_len(const bbp_model* model) {
  if (model == nullptr) return -1;
  return static_cast<int64_t>(model->trace.rows.size());
}

bbp_status bbp_model_trace_row(const bbp_model* model, int64_t index,
                               int64_t* iteration, int64_t* feature_count,
                               double* concentration, double* discount,
                               double* mass, double* rmse) {
  if (model == nullptr) return null_arg("model");
  return guarded([&] {
    if (index < 0 ||
        index >= static_cast<int64_t>(model->trace.rows.size())) {
      throw std::domain_error("trace row index out of range");
    }
    const auto& row = model->trace.rows[static_cast<std::size_t>(index)];
    if (iteration != nullptr) *iteration = row.iteration;
    if (feature_count != nullptr) *feature_count = row.feature_count;
    if (concentration != nullptr) *concentration = row.concentration;
    if (discount != nullptr) *discount = row.discount;
    if (mass != nullptr) *mass = row.mass;
    if (rmse != nullptr) *rmse = row.rmse;
  });
}

int64_t bbp_model_feature_count(const bbp_model* model) {
  if (model == nullptr || !model->has_run) return -1;
  return model->state.feature_count();
}

bbp_status bbp_model_params(const bbp_model* model, double* mass,
                            double* concentration, double* discount) {
  if (model == nullptr) return null_arg("model");
  return guarded([&] {
    if (mass != nullptr) *mass = model->state.params.mass;
    if (concentration != nullptr) {
      *concentration = model->state.params.concentration;
    }
    if (discount != nullptr) *discount = model->state.params.discount;
  });
}

bbp_status bbp_model_gates(const bbp_model* model, int32_t* out, int64_t cap) {
  if (model == nullptr) return null_arg("model");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (!model->has_run) throw std::domain_error("model has not run");
    const auto& z = model->state.z;
    require_capacity(z.rows * z.cols, cap);
    for (std::size_t i = 0; i < z.entries.size(); ++i) {
      out[i] = z.entries[i];
    }
  });
}

bbp_status bbp_model_weights(const bbp_model* model, double* out,
                             int64_t cap) {
  if (model == nullptr) return null_arg("model");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (!model->has_run) throw std::domain_error("model has not run");
    const auto& w = model->state.weights;
    require_capacity(w.rows() * w.cols(), cap);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        out[r * w.cols() + c] = w(r, c);
      }
    }
  });
}

bbp_status bbp_model_factors(const bbp_model* model, double* out,
                             int64_t cap) {
  if (model == nullptr) return null_arg("model");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (!model->has_run) throw std::domain_error("model has not run");
    const auto& f = model->state.factors;
    require_capacity(f.rows() * f.cols(), cap);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      for (Eigen::Index c = 0; c < f.cols(); ++c) {
        out[r * f.cols() + c] = f(r, c);
      }
    }
  });
}

void bbp_model_free(bbp_model* model) { delete model; }

bbp_status bbp_synthetic(double mass, double concentration, double discount,
                         double noise_variance, double weight_variance,
                         const double* factor_variances, int64_t n_rows,
                         int64_t n_cols, int64_t rounds,
                         int64_t target_features, int64_t max_tries,
                         bbp_stream* stream, double* data_out,
                         int64_t* truth_features) {
  if (factor_variances == nullptr) return null_arg("factor_variances");
  if (stream == nullptr) return null_arg("stream");
  if (data_out == nullptr) return null_arg("data_out");
  return guarded([&] {
    const bbp::BpParams params{mass, concentration, discount};
    bbp::FactorHyper hyper;
    hyper.noise_variance = noise_variance;
    hyper.weight_variance = weight_variance;
    hyper.factor_variances.assign(factor_variances,
                                  factor_variances + n_cols);
    const auto data =
        target_features > 0
            ? bbp::generate_synthetic_with_features(
                  params, hyper, n_rows, n_cols, rounds, target_features,
                  max_tries, stream->impl)
            : bbp::generate_synthetic(params, hyper, n_rows, n_cols, rounds,
                                      stream->impl);
    for (int64_t r = 0; r < n_rows; ++r) {
      for (int64_t c = 0; c < n_cols; ++c) {
        data_out[r * n_cols + c] = data.x(r, c);
      }
    }
    if (truth_features != nullptr) {
      *truth_features = data.truth.feature_count();
    }
  });
}

bbp_status bbp_autocorrelation(const double* series, int64_t n,
                               int64_t max_lag, double* out) {
  if (series == nullptr) return null_arg("series");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    const std::vector<double> values(series, series + n);
    const auto ac = bbp::autocorrelation(values, max_lag);
    std::memcpy(out, ac.data(), ac.size() * sizeof(double));
  });
}

/* ------------------------------------------------------------ csv strings */

char* bbp_model_trace_csv(const bbp_model* model, uint64_t seed) {
  if (model == nullptr) return nullptr;
  std::ostringstream os;
  const bbp_status rc =
      guarded([&] { bbp::write_trace_csv(os, model->trace, seed); });
  return rc == BBP_OK ? copy_string(os.str()) : nullptr;
}

bbp_status bbp_table_read(const char* path, bbp_table** out) {
  if (path == nullptr) return null_arg("path");
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto table = std::make_unique<bbp_table>();
    table->impl = bbp::read_csv_file(path);
    *out = table.release();
  });
}

int64_t bbp_table_rows(const bbp_table* table) {
  if (table == nullptr) return -1;
  return static_cast<int64_t>(table->impl.rows.size());
}

int64_t bbp_table_cols(const bbp_table* table) {
  if (table == nullptr) return -1;
  return static_cast<int64_t>(table->impl.names.size());
}

bbp_status bbp_table_cell(const bbp_table* table, int64_t row, int64_t col,
                          double* out) {
  if (table == nullptr) return null_arg("table");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (row < 0 || row >= bbp_table_rows(table) || col < 0 ||
        col >= bbp_table_cols(table)) {
      throw std::domain_error("cell index out of range");
    }
    *out = table->impl.rows[static_cast<std::size_t>(row)]
                          [static_cast<std::size_t>(col)];
  });
}

bbp_status bbp_table_column(const bbp_table* table, int64_t col, double* out,
                            int64_t cap) {
  if (table == nullptr) return null_arg("table");
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    if (col < 0 || col >= bbp_table_cols(table)) {
      throw std::domain_error("column index out of range");
    }
    require_capacity(bbp_table_rows(table), cap);
    for (std::size_t r = 0; r < table->impl.rows.size(); ++r) {
      out[r] = table->impl.rows[r][static_cast<std::size_t>(col)];
    }
  });
}

const char* bbp_table_name(const bbp_table* table, int64_t col) {
  if (table == nullptr || col < 0 || col >= bbp_table_cols(table)) {
    return nullptr;
  }
  return table->impl.names[static_cast<std::size_t>(col)].c_str();
}

void bbp_table_free(bbp_table* table) { delete table; }

char* bbp_table_csv(uint64_t seed, const char* const* names,
                    const double* const* columns, int64_t n_cols,
                    int64_t n_rows) {
  if (names == nullptr || columns == nullptr) return nullptr;
  std::ostringstream os;
  const bbp_status rc = guarded([&] {
    std::vector<std::string> header;
    std::vector<std::vector<double>> table;
    header.reserve(static_cast<std::size_t>(n_cols));
    table.reserve(static_cast<std::size_t>(n_cols));
    for (int64_t c = 0; c < n_cols; ++c) {
      if (names[c] == nullptr || columns[c] == nullptr) {
        throw std::domain_error("column " + std::to_string(c) + " is null");
      }
      header.emplace_back(names[c]);
      table.emplace_back(columns[c], columns[c] + n_rows);
    }
    bbp::write_table_csv(os, seed, header, table);
  });
  return rc == BBP_OK ? copy_string(os.str()) : nullptr;
}

void bbp_string_free(char* text) { std::free(text); }

}  /* extern "C" */
