// Command-line front end. All numerics go through the shared C API; this
// translation unit only does argument handling, file layout, and plotting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bbp.h"
#include "common.hpp"
#include "manifest.hpp"
#include "svg.hpp"

namespace cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

[[noreturn]] void raise(bbp_status rc) {
  const std::string what = bbp_last_error();
  switch (rc) {
    case BBP_ERR_NUMERIC:
      throw numeric_failure(what);
    case BBP_ERR_IO:
      throw io_failure(what);
    default:
      throw usage_error(what);
  }
}

void check(bbp_status rc) {
  if (rc != BBP_OK) raise(rc);
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T* get() const { return ptr; }
  T** out() { return &ptr; }
};

using StreamHandle = Handle<bbp_stream, bbp_stream_free>;
using DrawHandle = Handle<bbp_draw, bbp_draw_free>;
using MatrixHandle = Handle<bbp_matrix, bbp_matrix_free>;
using ModelHandle = Handle<bbp_model, bbp_model_free>;
using TableHandle = Handle<bbp_table, bbp_table_free>;

std::string num_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void ensure_outdir(const std::string& outdir) {
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw io_failure("cannot create " + outdir + ": " + ec.message());
}

// Emits one table through the library so every CSV shares the same banner
// and cell formatting.
void write_table(const std::string& path, std::uint64_t seed,
                 const std::vector<std::string>& names,
                 const std::vector<std::vector<double>>& columns) {
  static const double dummy = 0.0;
  std::vector<const char*> name_ptrs;
  std::vector<const double*> column_ptrs;
  std::size_t n_rows = 0;
  for (std::size_t c = 0; c < names.size(); ++c) {
    name_ptrs.push_back(names[c].c_str());
    column_ptrs.push_back(columns[c].empty() ? &dummy : columns[c].data());
    n_rows = std::max(n_rows, columns[c].size());
  }
  char* text = bbp_table_csv(seed, name_ptrs.data(), column_ptrs.data(),
                             static_cast<std::int64_t>(names.size()),
                             static_cast<std::int64_t>(n_rows));
  if (text == nullptr) throw numeric_failure(bbp_last_error());
  const std::string body(text);
  bbp_string_free(text);
  write_file(path, body);
}

/* ---------------------------------------------------------------- simulate */

struct SimulateParams {
  double gamma = 3.0;
  double theta = 1.0;
  std::vector<double> alphas = {0.0, 0.3, 0.6};
  std::int64_t n_data = 1000;
  std::int64_t rounds = 2000;
  std::uint64_t seed = 42;
};

struct AlphaResult {
  double alpha = 0.0;
  std::vector<double> ns, ks, exact, asym;
  std::vector<double> js, counts, jexact, jasym;
  std::vector<double> ranks, weights;
  std::vector<std::string> files;
};

// Logarithmic growth law of the zero-discount process, used wherever the
// positive-discount power asymptote does not apply.
double classic_total(double gamma, double theta, double n) {
  double total = 0.0;
  double singles = 0.0;
  check(bbp_classic_means(gamma, theta, n, &total, &singles));
  return total;
}

AlphaResult simulate_alpha(const SimulateParams& p, std::size_t index,
                           const std::string& outdir) {
  const double alpha = p.alphas[index];
  AlphaResult res;
  res.alpha = alpha;

  StreamHandle root;
  root.ptr = bbp_stream_new(p.seed);
  StreamHandle worker;
  worker.ptr = bbp_stream_split(root.get(), index);
  StreamHandle z_stream;
  z_stream.ptr = bbp_stream_split(worker.get(), 0);
  StreamHandle w_stream;
  w_stream.ptr = bbp_stream_split(worker.get(), 1);
  if (w_stream.get() == nullptr) throw numeric_failure("stream allocation");

  MatrixHandle m;
  check(bbp_matrix_draw(p.gamma, p.theta, alpha, p.n_data, p.rounds,
                        z_stream.get(), m.out()));
  const std::int64_t n = p.n_data;

  std::vector<std::int64_t> cumulative(static_cast<std::size_t>(n));
  std::vector<std::int64_t> row_counts(static_cast<std::size_t>(n));
  std::vector<std::int64_t> hist(static_cast<std::size_t>(n));
  check(bbp_matrix_cumulative(m.get(), cumulative.data(), n));
  check(bbp_matrix_row_counts(m.get(), row_counts.data(), n));
  check(bbp_matrix_multiplicity_hist(m.get(), hist.data(), n));

  for (std::int64_t i = 0; i < n; ++i) {
    res.ns.push_back(static_cast<double>(i + 1));
    res.ks.push_back(static_cast<double>(cumulative[i]));
  }
  res.exact.resize(res.ns.size());
  check(bbp_exact_curve(p.gamma, p.theta, alpha, BBP_CURVE_TOTAL_BY_ROWS, 0,
                        res.ns.data(), n, res.exact.data()));
  res.asym.resize(res.ns.size());
  if (alpha > 0.0) {
    check(bbp_asymptotic_total(p.gamma, p.theta, alpha, res.ns.data(), n,
                               res.asym.data()));
  } else {
    for (std::size_t i = 0; i < res.ns.size(); ++i) {
      res.asym[i] = classic_total(p.gamma, p.theta, res.ns[i]);
    }
  }

  const std::string tag = "alpha_" + num_text(alpha);
  res.files.push_back("K_prefix_" + tag + ".csv");
  write_table(outdir + "/" + res.files.back(), p.seed,
              {"n", "K", "exact", "asymptotic"},
              {res.ns, res.ks, res.exact, res.asym});

  std::int64_t j_max = 1;
  for (std::int64_t j = 1; j <= n; ++j) {
    if (hist[static_cast<std::size_t>(j - 1)] > 0) j_max = j;
  }
  const double n_real = static_cast<double>(n);
  for (std::int64_t j = 1; j <= j_max; ++j) {
    res.js.push_back(static_cast<double>(j));
    res.counts.push_back(
        static_cast<double>(hist[static_cast<std::size_t>(j - 1)]));
    double exact_j = 0.0;
    check(bbp_exact_curve(p.gamma, p.theta, alpha,
                          BBP_CURVE_MULTIPLICITY_BY_ROWS, j, &n_real, 1,
                          &exact_j));
    res.jexact.push_back(exact_j);
    double asym_j = 0.0;
    if (alpha > 0.0) {
      check(bbp_asymptotic_multiplicity(p.gamma, p.theta, alpha, j, &n_real,
                                        1, &asym_j));
    } else if (j == 1) {
      double total = 0.0;
      check(bbp_classic_means(p.gamma, p.theta, n_real, &total, &asym_j));
    }
    res.jasym.push_back(asym_j);
  }
  res.files.push_back("K_hist_" + tag + ".csv");
  write_table(outdir + "/" + res.files.back(), p.seed,
              {"multiplicity", "count", "exact", "asymptotic"},
              {res.js, res.counts, res.jexact, res.jasym});

  std::vector<double> row_index, row_vals;
  for (std::int64_t i = 0; i < n; ++i) {
    row_index.push_back(static_cast<double>(i + 1));
    row_vals.push_back(static_cast<double>(row_counts[i]));
  }
  res.files.push_back("row_counts_" + tag + ".csv");
  write_table(outdir + "/" + res.files.back(), p.seed, {"row", "count"},
              {row_index, row_vals});

  DrawHandle d;
  check(bbp_draw_new(p.gamma, p.theta, alpha, p.rounds, w_stream.get(),
                     d.out()));
  const std::int64_t atoms = bbp_draw_size(d.get());
  res.weights.resize(static_cast<std::size_t>(atoms));
  check(bbp_draw_weights(d.get(), res.weights.data(), atoms));
  std::sort(res.weights.begin(), res.weights.end(), std::greater<double>());
  for (std::int64_t r = 1; r <= atoms; ++r) {
    res.ranks.push_back(static_cast<double>(r));
  }
  res.files.push_back("ranked_weights_" + tag + ".csv");
  write_table(outdir + "/" + res.files.back(), p.seed, {"rank", "weight"},
              {res.ranks, res.weights});
  return res;
}

const char* kPointColors[] = {"#1f77b4", "#ff7f0e", "#9467bd",
                              "#8c564b", "#17becf", "#7f7f7f"};

void run_simulate(const SimulateParams& p, const std::string& outdir) {
  if (p.alphas.empty()) throw usage_error("at least one --alpha is required");
  ensure_outdir(outdir);

  std::vector<AlphaResult> results(p.alphas.size());
  std::vector<std::exception_ptr> errors(p.alphas.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < p.alphas.size(); ++i) {
    workers.emplace_back([&, i] {
      try {
        results[i] = simulate_alpha(p, i, outdir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Plot growth;
  growth.title = "distinct features against rows";
  growth.x_label = "rows";
  growth.y_label = "features";
  growth.log_x = true;
  growth.log_y = true;
  Plot mult;
  mult.title = "features by multiplicity";
  mult.x_label = "multiplicity";
  mult.y_label = "features";
  mult.log_x = true;
  mult.log_y = true;
  Plot ranked;
  ranked.title = "ranked stick weights";
  ranked.x_label = "rank";
  ranked.y_label = "weight";
  ranked.log_x = true;
  ranked.log_y = true;

  for (std::size_t i = 0; i < results.size(); ++i) {
    const AlphaResult& r = results[i];
    const std::string tag = "alpha=" + num_text(r.alpha);
    const std::string color = kPointColors[i % 6];
    growth.series.push_back({tag + " empirical", color, false, false, r.ns,
                             r.ks});
    growth.series.push_back(
        {tag + " exact", "#d62728", true, false, r.ns, r.exact});
    growth.series.push_back(
        {tag + " asymptotic", "#2ca02c", true, true, r.ns, r.asym});
    mult.series.push_back(
        {tag + " empirical", color, false, false, r.js, r.counts});
    mult.series.push_back(
        {tag + " exact", "#d62728", true, false, r.js, r.jexact});
    if (r.alpha > 0.0) {
      mult.series.push_back(
          {tag + " asymptotic", "#2ca02c", true, true, r.js, r.jasym});
    }
    ranked.series.push_back(
        {tag + " empirical", color, false, false, r.ranks, r.weights});
    if (r.alpha > 0.0) {
      // the tail law counts weights above a level; inverting it turns a rank
      // into the weight the law predicts at that rank
      double c = 0.0;
      check(bbp_power_law_constant(p.gamma, p.theta, r.alpha, &c));
      std::vector<double> law;
      for (double rank : r.ranks) {
        law.push_back(std::pow(rank / c, -1.0 / r.alpha));
      }
      ranked.series.push_back(
          {tag + " law", "#2ca02c", true, true, r.ranks, law});
    }
  }

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.seed = p.seed;
  manifest.parameters["gamma"] = p.gamma;
  manifest.parameters["theta"] = p.theta;
  manifest.parameters["alpha"] = p.alphas;
  manifest.parameters["n_data"] = p.n_data;
  manifest.parameters["rounds"] = p.rounds;
  for (const AlphaResult& r : results) {
    for (const std::string& f : r.files) manifest.outputs.push_back(f);
  }
  for (const auto& [name, plot] :
       {std::pair<std::string, const Plot*>{"growth.svg", &growth},
        {"multiplicity.svg", &mult},
        {"ranked_weights.svg", &ranked}}) {
    write_file(outdir + "/" + name, plot->render());
    manifest.outputs.push_back(name);
  }
  write_manifest(outdir, std::move(manifest));
}

/* ------------------------------------------------------------------ curves */

struct CurvesParams {
  double gamma = 3.0;
  double theta = 1.0;
  double alpha = 0.3;
  std::string kind = "total_by_rows";
  std::int64_t multiplicity = 1;
  double grid_min = 10.0;
  double grid_max = 100000.0;
  std::int64_t points = 25;
  std::uint64_t seed = 42;
};

std::int32_t curve_kind_id(const std::string& kind) {
  if (kind == "total_by_rows") return BBP_CURVE_TOTAL_BY_ROWS;
  if (kind == "total_by_time") return BBP_CURVE_TOTAL_BY_TIME;
  if (kind == "multiplicity_by_rows") return BBP_CURVE_MULTIPLICITY_BY_ROWS;
  if (kind == "multiplicity_by_time") return BBP_CURVE_MULTIPLICITY_BY_TIME;
  throw usage_error("unknown curve kind " + kind);
}

void run_curves(const CurvesParams& p, const std::string& outdir) {
  const std::int32_t kind = curve_kind_id(p.kind);
  if (p.points < 1) throw usage_error("the grid needs at least one point");
  if (!(p.grid_min > 0.0) || !(p.grid_max >= p.grid_min)) {
    throw usage_error("grid bounds must satisfy 0 < min <= max");
  }
  ensure_outdir(outdir);

  std::vector<double> xs;
  if (p.points == 1) {
    xs.push_back(p.grid_min);
  } else {
    const double step = std::log(p.grid_max / p.grid_min) /
                        static_cast<double>(p.points - 1);
    for (std::int64_t i = 0; i < p.points; ++i) {
      xs.push_back(p.grid_min * std::exp(step * static_cast<double>(i)));
    }
  }

  std::vector<double> exact(xs.size());
  check(bbp_exact_curve(p.gamma, p.theta, p.alpha, kind, p.multiplicity,
                        xs.data(), static_cast<std::int64_t>(xs.size()),
                        exact.data()));
  std::vector<double> asym(xs.size());
  const bool total = kind == BBP_CURVE_TOTAL_BY_ROWS ||
                     kind == BBP_CURVE_TOTAL_BY_TIME;
  if (p.alpha > 0.0) {
    if (total) {
      check(bbp_asymptotic_total(p.gamma, p.theta, p.alpha, xs.data(),
                                 static_cast<std::int64_t>(xs.size()),
                                 asym.data()));
    } else {
      check(bbp_asymptotic_multiplicity(p.gamma, p.theta, p.alpha,
                                        p.multiplicity, xs.data(),
                                        static_cast<std::int64_t>(xs.size()),
                                        asym.data()));
    }
  } else {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (total) {
        asym[i] = classic_total(p.gamma, p.theta, xs[i]);
      } else if (p.multiplicity == 1) {
        double ignored = 0.0;
        check(bbp_classic_means(p.gamma, p.theta, xs[i], &ignored, &asym[i]));
      } else {
        asym[i] = 0.0;
      }
    }
  }

  write_table(outdir + "/curves.csv", p.seed, {"x", "exact", "asymptotic"},
              {xs, exact, asym});

  RunManifest manifest;
  manifest.command = "curves";
  manifest.seed = p.seed;
  manifest.parameters["gamma"] = p.gamma;
  manifest.parameters["theta"] = p.theta;
  manifest.parameters["alpha"] = p.alpha;
  manifest.parameters["kind"] = p.kind;
  manifest.parameters["multiplicity"] = p.multiplicity;
  manifest.parameters["grid_min"] = p.grid_min;
  manifest.parameters["grid_max"] = p.grid_max;
  manifest.parameters["points"] = p.points;
  manifest.outputs.push_back("curves.csv");
  write_manifest(outdir, std::move(manifest));
}

/* ------------------------------------------------------------------- infer */

struct InferParams {
  std::string data_path;  // empty selects synthetic input
  bool synthetic = false;
  std::int64_t n_data = 100;
  std::int64_t n_dims = 16;
  std::int64_t features = 5;
  std::int64_t rounds = 200;
  std::int64_t max_tries = 1000;
  double synthetic_gamma = 0.0;  // <= 0 derives it from the feature target
  double gamma = 1.0;
  double theta = 1.0;
  double alpha = 0.3;
  double noise_variance = 0.1;
  double weight_variance = 1.0;
  double factor_variance = 1.0;
  std::int64_t iterations = 1000;
  std::int64_t burn_in = 100;
  std::int64_t thin = 1;
  std::int64_t stick_samples = 256;
  std::int64_t init_features = 20;
  std::uint64_t seed = 42;
};

// Mass that makes the prior mean feature count hit the requested target, so
// rejection sampling of the synthetic instance has a reasonable hit rate.
double derive_synthetic_mass(const InferParams& p) {
  const double n = static_cast<double>(p.n_data);
  double unit_mean = 0.0;
  check(bbp_exact_curve(1.0, p.theta, p.alpha, BBP_CURVE_TOTAL_BY_ROWS, 0, &n,
                        1, &unit_mean));
  if (!(unit_mean > 0.0)) throw numeric_failure("degenerate mean curve");
  return static_cast<double>(p.features) / unit_mean;
}

void autocorr_column(const std::vector<double>& chain, std::int64_t max_lag,
                     std::vector<double>* out) {
  out->assign(static_cast<std::size_t>(max_lag + 1), 0.0);
  if (bbp_autocorrelation(chain.data(),
                          static_cast<std::int64_t>(chain.size()), max_lag,
                          out->data()) != BBP_OK) {
    (*out)[0] = 1.0;  // a constant chain has no correlation structure
  }
}

void run_infer(InferParams p, const std::string& outdir) {
  if (p.synthetic != p.data_path.empty()) {
    // both set or both missing
    throw usage_error("provide a data CSV path or --synthetic, not both");
  }
  ensure_outdir(outdir);

  std::vector<double> data;
  std::int64_t n = 0;
  std::int64_t dims = 0;
  std::int64_t truth_features = -1;
  if (p.synthetic) {
    if (p.synthetic_gamma <= 0.0) p.synthetic_gamma = derive_synthetic_mass(p);
    n = p.n_data;
    dims = p.n_dims;
    data.resize(static_cast<std::size_t>(n * dims));
    const std::vector<double> rho(static_cast<std::size_t>(dims),
                                  p.factor_variance);
    StreamHandle stream;
    stream.ptr = bbp_stream_new(p.seed);
    check(bbp_synthetic(p.synthetic_gamma, p.theta, p.alpha,
                        p.noise_variance, p.weight_variance, rho.data(), n,
                        dims, p.rounds, p.features, p.max_tries, stream.get(),
                        data.data(), &truth_features));
  } else {
    TableHandle table;
    check(bbp_table_read(p.data_path.c_str(), table.out()));
    n = bbp_table_rows(table.get());
    dims = bbp_table_cols(table.get());
    if (n < 1 || dims < 1) throw usage_error("data file has no rows");
    data.resize(static_cast<std::size_t>(n * dims));
    std::vector<double> column(static_cast<std::size_t>(n));
    for (std::int64_t c = 0; c < dims; ++c) {
      check(bbp_table_column(table.get(), c, column.data(), n));
      for (std::int64_t r = 0; r < n; ++r) {
        data[static_cast<std::size_t>(r * dims + c)] =
            column[static_cast<std::size_t>(r)];
      }
    }
  }

  ModelHandle model;
  check(bbp_model_new(data.data(), n, dims, model.out()));
  const std::vector<double> rho(static_cast<std::size_t>(dims),
                                p.factor_variance);
  check(bbp_model_set_hyper(model.get(), p.noise_variance, p.weight_variance,
                            rho.data(), dims));
  check(bbp_model_set_params(model.get(), p.gamma, p.theta, p.alpha));
  check(bbp_model_set_mcmc(model.get(), p.iterations, p.burn_in,
                           p.stick_samples, p.thin, p.init_features, p.seed));
  check(bbp_model_run(model.get()));

  RunManifest manifest;
  manifest.command = "infer";
  manifest.seed = p.seed;
  manifest.parameters["mode"] = p.synthetic ? "synthetic" : "data";
  if (p.synthetic) {
    manifest.parameters["n_data"] = p.n_data;
    manifest.parameters["n_dims"] = p.n_dims;
    manifest.parameters["features"] = p.features;
    manifest.parameters["rounds"] = p.rounds;
    manifest.parameters["max_tries"] = p.max_tries;
    manifest.parameters["synthetic_gamma"] = p.synthetic_gamma;
    manifest.parameters["truth_features"] = truth_features;
  } else {
    manifest.parameters["data"] = p.data_path;
  }
  manifest.parameters["gamma"] = p.gamma;
  manifest.parameters["theta"] = p.theta;
  manifest.parameters["alpha"] = p.alpha;
  manifest.parameters["noise_variance"] = p.noise_variance;
  manifest.parameters["weight_variance"] = p.weight_variance;
  manifest.parameters["factor_variance"] = p.factor_variance;
  manifest.parameters["iterations"] = p.iterations;
  manifest.parameters["burn_in"] = p.burn_in;
  manifest.parameters["thin"] = p.thin;
  manifest.parameters["stick_samples"] = p.stick_samples;
  manifest.parameters["init_features"] = p.init_features;

  char* trace_text = bbp_model_trace_csv(model.get(), p.seed);
  if (trace_text == nullptr) throw numeric_failure(bbp_last_error());
  write_file(outdir + "/trace.csv", trace_text);
  bbp_string_free(trace_text);
  manifest.outputs.push_back("trace.csv");

  const std::int64_t rows = bbp_model_trace_len(model.get());
  std::vector<double> its, ks, thetas, alphas, gammas, rmses;
  for (std::int64_t i = 0; i < rows; ++i) {
    std::int64_t iteration = 0;
    std::int64_t k = 0;
    double conc = 0.0, disc = 0.0, mass = 0.0, rmse = 0.0;
    check(bbp_model_trace_row(model.get(), i, &iteration, &k, &conc, &disc,
                              &mass, &rmse));
    its.push_back(static_cast<double>(iteration));
    ks.push_back(static_cast<double>(k));
    thetas.push_back(conc);
    alphas.push_back(disc);
    gammas.push_back(mass);
    rmses.push_back(rmse);
  }

  // correlation structure of the kept part of the chain
  std::vector<double> kept_k, kept_theta, kept_alpha, kept_gamma, kept_rmse;
  for (std::size_t i = 0; i < its.size(); ++i) {
    if (its[i] <= static_cast<double>(p.burn_in) && p.iterations > 0) continue;
    kept_k.push_back(ks[i]);
    kept_theta.push_back(thetas[i]);
    kept_alpha.push_back(alphas[i]);
    kept_gamma.push_back(gammas[i]);
    kept_rmse.push_back(rmses[i]);
  }
  std::vector<std::vector<double>> ac_columns(6);
  if (kept_k.size() >= 3) {
    const std::int64_t max_lag = std::min<std::int64_t>(
        50, static_cast<std::int64_t>(kept_k.size()) / 2);
    for (std::int64_t lag = 0; lag <= max_lag; ++lag) {
      ac_columns[0].push_back(static_cast<double>(lag));
    }
    autocorr_column(kept_k, max_lag, &ac_columns[1]);
    autocorr_column(kept_theta, max_lag, &ac_columns[2]);
    autocorr_column(kept_alpha, max_lag, &ac_columns[3]);
    autocorr_column(kept_gamma, max_lag, &ac_columns[4]);
    autocorr_column(kept_rmse, max_lag, &ac_columns[5]);
  }
  write_table(outdir + "/autocorrelation.csv", p.seed,
              {"lag", "K", "theta", "alpha", "gamma", "rmse"}, ac_columns);
  manifest.outputs.push_back("autocorrelation.csv");

  Plot trace_k;
  trace_k.title = "feature count trace";
  trace_k.x_label = "iteration";
  trace_k.y_label = "K";
  trace_k.series.push_back({"K", "#1f77b4", true, false, its, ks});
  write_file(outdir + "/trace_K.svg", trace_k.render());
  manifest.outputs.push_back("trace_K.svg");

  Plot trace_hyper;
  trace_hyper.title = "hyperparameter traces";
  trace_hyper.x_label = "iteration";
  trace_hyper.y_label = "value";
  trace_hyper.series.push_back(
      {"theta", "#1f77b4", true, false, its, thetas});
  trace_hyper.series.push_back(
      {"alpha", "#d62728", true, false, its, alphas});
  trace_hyper.series.push_back(
      {"gamma", "#2ca02c", true, false, its, gammas});
  write_file(outdir + "/trace_hyper.svg", trace_hyper.render());
  manifest.outputs.push_back("trace_hyper.svg");

  const std::int64_t k = bbp_model_feature_count(model.get());
  std::vector<std::int32_t> gates(static_cast<std::size_t>(n * k));
  std::vector<double> weights(static_cast<std::size_t>(n * k));
  std::vector<double> factors(static_cast<std::size_t>(k * dims));
  if (k > 0) {
    check(bbp_model_gates(model.get(), gates.data(), n * k));
    check(bbp_model_weights(model.get(), weights.data(), n * k));
    check(bbp_model_factors(model.get(), factors.data(), k * dims));
  }

  std::vector<double> row_ids;
  for (std::int64_t r = 0; r < n; ++r) {
    row_ids.push_back(static_cast<double>(r + 1));
  }
  std::vector<std::string> gate_names = {"row"};
  std::vector<std::vector<double>> gate_cols = {row_ids};
  std::vector<std::vector<double>> weight_cols = {row_ids};
  for (std::int64_t c = 0; c < k; ++c) {
    gate_names.push_back("f" + std::to_string(c));
    std::vector<double> g, w;
    for (std::int64_t r = 0; r < n; ++r) {
      g.push_back(static_cast<double>(gates[static_cast<std::size_t>(
          r * k + c)]));
      w.push_back(weights[static_cast<std::size_t>(r * k + c)]);
    }
    gate_cols.push_back(std::move(g));
    weight_cols.push_back(std::move(w));
  }
  write_table(outdir + "/gates.csv", p.seed, gate_names, gate_cols);
  manifest.outputs.push_back("gates.csv");
  write_table(outdir + "/weights.csv", p.seed, gate_names, weight_cols);
  manifest.outputs.push_back("weights.csv");

  std::vector<std::string> factor_names = {"feature"};
  std::vector<std::vector<double>> factor_cols(1);
  for (std::int64_t r = 0; r < k; ++r) {
    factor_cols[0].push_back(static_cast<double>(r + 1));
  }
  for (std::int64_t c = 0; c < dims; ++c) {
    factor_names.push_back("d" + std::to_string(c));
    std::vector<double> col;
    for (std::int64_t r = 0; r < k; ++r) {
      col.push_back(factors[static_cast<std::size_t>(r * dims + c)]);
    }
    factor_cols.push_back(std::move(col));
  }
  write_table(outdir + "/factors.csv", p.seed, factor_names, factor_cols);
  manifest.outputs.push_back("factors.csv");

  write_manifest(outdir, std::move(manifest));
}

/* ----------------------------------------------------------------- analyze */

struct AnalyzeParams {
  std::string series_path;
  std::int64_t x_column = 0;
  std::int64_t y_column = 1;
  double min_x = -std::numeric_limits<double>::infinity();
  double max_x = std::numeric_limits<double>::infinity();
  bool full_range = false;
  std::uint64_t seed = 42;
};

void run_analyze(const AnalyzeParams& p, const std::string& outdir) {
  TableHandle table;
  check(bbp_table_read(p.series_path.c_str(), table.out()));
  const std::int64_t rows = bbp_table_rows(table.get());
  const std::int64_t cols = bbp_table_cols(table.get());
  if (p.x_column < 0 || p.x_column >= cols || p.y_column < 0 ||
      p.y_column >= cols) {
    throw usage_error("column indices must address the file's columns");
  }
  ensure_outdir(outdir);

  std::vector<double> all_x(static_cast<std::size_t>(rows));
  std::vector<double> all_y(static_cast<std::size_t>(rows));
  check(bbp_table_column(table.get(), p.x_column, all_x.data(), rows));
  check(bbp_table_column(table.get(), p.y_column, all_y.data(), rows));
  std::vector<double> xs, ys;
  for (std::int64_t i = 0; i < rows; ++i) {
    const double x = all_x[static_cast<std::size_t>(i)];
    if (x < p.min_x || x > p.max_x) continue;
    xs.push_back(x);
    ys.push_back(all_y[static_cast<std::size_t>(i)]);
  }

  double constant = 0.0;
  double exponent = 0.0;
  double residual = 0.0;
  check(bbp_fit_power_law(xs.data(), ys.data(),
                          static_cast<std::int64_t>(xs.size()),
                          p.full_range ? 0 : 1, &constant, &exponent,
                          &residual));

  // mirror the fitter's data-driven range choice to report what it used
  double fit_lo = xs.empty() ? 0.0 : xs[0];
  double fit_hi = fit_lo;
  std::int64_t used = 0;
  {
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    double cut = p.full_range ? *lo_it : std::sqrt(*lo_it * *hi_it);
    std::int64_t kept = 0;
    for (double x : xs) {
      if (x >= cut) ++kept;
    }
    if (kept < 3) cut = *lo_it;
    bool first = true;
    for (double x : xs) {
      if (x < cut) continue;
      fit_lo = first ? x : std::min(fit_lo, x);
      fit_hi = first ? x : std::max(fit_hi, x);
      first = false;
      ++used;
    }
  }

  write_table(outdir + "/fit.csv", p.seed,
              {"constant", "exponent", "residual_rms", "fit_min_x",
               "fit_max_x", "points_used"},
              {{constant},
               {exponent},
               {residual},
               {fit_lo},
               {fit_hi},
               {static_cast<double>(used)}});

  RunManifest manifest;
  manifest.command = "analyze";
  manifest.seed = p.seed;
  manifest.parameters["series"] = p.series_path;
  manifest.parameters["x_column"] = p.x_column;
  manifest.parameters["y_column"] = p.y_column;
  manifest.parameters["min_x"] =
      std::isfinite(p.min_x) ? ordered_json(p.min_x) : ordered_json(nullptr);
  manifest.parameters["max_x"] =
      std::isfinite(p.max_x) ? ordered_json(p.max_x) : ordered_json(nullptr);
  manifest.parameters["full_range"] = p.full_range;
  manifest.outputs.push_back("fit.csv");
  write_manifest(outdir, std::move(manifest));
}

/* ------------------------------------------------------------------ replay */

double jnum(const ordered_json& params, const char* key) {
  if (!params.contains(key) || !params[key].is_number()) {
    throw io_failure(std::string("manifest parameter ") + key +
                     " is missing or not a number");
  }
  return params[key].get<double>();
}

std::int64_t jint(const ordered_json& params, const char* key) {
  if (!params.contains(key) || !params[key].is_number_integer()) {
    throw io_failure(std::string("manifest parameter ") + key +
                     " is missing or not an integer");
  }
  return params[key].get<std::int64_t>();
}

std::string jtext(const ordered_json& params, const char* key) {
  if (!params.contains(key) || !params[key].is_string()) {
    throw io_failure(std::string("manifest parameter ") + key +
                     " is missing or not a string");
  }
  return params[key].get<std::string>();
}

void run_replay(const std::string& manifest_path, std::string outdir) {
  const RunManifest m = load_manifest(manifest_path);
  if (outdir.empty()) {
    outdir = fs::path(manifest_path).parent_path().string();
    if (outdir.empty()) outdir = ".";
  }
  const ordered_json& q = m.parameters;
  if (m.command == "simulate") {
    SimulateParams p;
    p.gamma = jnum(q, "gamma");
    p.theta = jnum(q, "theta");
    if (!q.contains("alpha") || !q["alpha"].is_array()) {
      throw io_failure("manifest parameter alpha is missing or not a list");
    }
    p.alphas = q["alpha"].get<std::vector<double>>();
    p.n_data = jint(q, "n_data");
    p.rounds = jint(q, "rounds");
    p.seed = m.seed;
    run_simulate(p, outdir);
  } else if (m.command == "curves") {
    CurvesParams p;
    p.gamma = jnum(q, "gamma");
    p.theta = jnum(q, "theta");
    p.alpha = jnum(q, "alpha");
    p.kind = jtext(q, "kind");
    p.multiplicity = jint(q, "multiplicity");
    p.grid_min = jnum(q, "grid_min");
    p.grid_max = jnum(q, "grid_max");
    p.points = jint(q, "points");
    p.seed = m.seed;
    run_curves(p, outdir);
  } else if (m.command == "infer") {
    InferParams p;
    const std::string mode = jtext(q, "mode");
    if (mode == "synthetic") {
      p.synthetic = true;
      p.n_data = jint(q, "n_data");
      p.n_dims = jint(q, "n_dims");
      p.features = jint(q, "features");
      p.rounds = jint(q, "rounds");
      p.max_tries = jint(q, "max_tries");
      p.synthetic_gamma = jnum(q, "synthetic_gamma");
    } else if (mode == "data") {
      p.data_path = jtext(q, "data");
    } else {
      throw io_failure("manifest names unknown infer mode " + mode);
    }
    p.gamma = jnum(q, "gamma");
    p.theta = jnum(q, "theta");
    p.alpha = jnum(q, "alpha");
    p.noise_variance = jnum(q, "noise_variance");
    p.weight_variance = jnum(q, "weight_variance");
    p.factor_variance = jnum(q, "factor_variance");
    p.iterations = jint(q, "iterations");
    p.burn_in = jint(q, "burn_in");
    p.thin = jint(q, "thin");
    p.stick_samples = jint(q, "stick_samples");
    p.init_features = jint(q, "init_features");
    p.seed = m.seed;
    run_infer(p, outdir);
  } else if (m.command == "analyze") {
    AnalyzeParams p;
    p.series_path = jtext(q, "series");
    p.x_column = jint(q, "x_column");
    p.y_column = jint(q, "y_column");
    if (q.contains("min_x") && q["min_x"].is_number()) {
      p.min_x = q["min_x"].get<double>();
    }
    if (q.contains("max_x") && q["max_x"].is_number()) {
      p.max_x = q["max_x"].get<double>();
    }
    p.full_range = q.contains("full_range") && q["full_range"].is_boolean() &&
                   q["full_range"].get<bool>();
    p.seed = m.seed;
    run_analyze(p, outdir);
  } else {
    throw io_failure("manifest names unknown command " + m.command);
  }
}

/* ------------------------------------------------------------------ config */

// Flat key=value file; blank lines and '#' comments are skipped.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_failure("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == start) {
      throw usage_error("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    const auto trim = [](std::string text) {
      const auto a = text.find_first_not_of(" \t\r");
      const auto b = text.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string()
                                    : text.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw usage_error("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    out[key] = value;
  }
  return out;
}

double config_num(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) {
    throw usage_error("config value for " + key + " is not a number: " +
                      text);
  }
  return value;
}

std::int64_t config_int(const std::string& key, const std::string& text) {
  const double value = config_num(key, text);
  if (value != std::floor(value)) {
    throw usage_error("config value for " + key + " must be an integer");
  }
  return static_cast<std::int64_t>(value);
}

void apply_config(const std::string& path, const CLI::App* sub,
                  InferParams* p) {
  const auto entries = read_config(path);
  const auto given = [&](const char* flag) { return sub->count(flag) > 0; };
  for (const auto& [key, value] : entries) {
    if (key == "gamma") {
      if (!given("--gamma")) p->gamma = config_num(key, value);
    } else if (key == "theta") {
      if (!given("--theta")) p->theta = config_num(key, value);
    } else if (key == "alpha") {
      if (!given("--alpha")) p->alpha = config_num(key, value);
    } else if (key == "noise_variance") {
      if (!given("--noise-variance")) {
        p->noise_variance = config_num(key, value);
      }
    } else if (key == "weight_variance") {
      if (!given("--weight-variance")) {
        p->weight_variance = config_num(key, value);
      }
    } else if (key == "factor_variance") {
      if (!given("--factor-variance")) {
        p->factor_variance = config_num(key, value);
      }
    } else if (key == "iterations") {
      if (!given("--iterations")) p->iterations = config_int(key, value);
    } else if (key == "burn_in") {
      if (!given("--burn-in")) p->burn_in = config_int(key, value);
    } else if (key == "thin") {
      if (!given("--thin")) p->thin = config_int(key, value);
    } else if (key == "stick_samples") {
      if (!given("--stick-samples")) {
        p->stick_samples = config_int(key, value);
      }
    } else if (key == "init_features") {
      if (!given("--init-features")) {
        p->init_features = config_int(key, value);
      }
    } else if (key == "n_data") {
      if (!given("--n-data")) p->n_data = config_int(key, value);
    } else if (key == "n_dims") {
      if (!given("--n-dims")) p->n_dims = config_int(key, value);
    } else if (key == "features") {
      if (!given("--features")) p->features = config_int(key, value);
    } else if (key == "rounds") {
      if (!given("--rounds")) p->rounds = config_int(key, value);
    } else if (key == "max_tries") {
      if (!given("--max-tries")) p->max_tries = config_int(key, value);
    } else if (key == "seed") {
      if (!given("--seed")) {
        const std::int64_t seed = config_int(key, value);
        if (seed < 0) throw usage_error("config seed must be nonnegative");
        p->seed = static_cast<std::uint64_t>(seed);
      }
    } else {
      throw usage_error("config key " + key + " is not recognized");
    }
  }
}

}  // namespace
}  // namespace cli

int main(int argc, char** argv) {
  using namespace cli;

  CLI::App app{"beta process feature models: simulation, mean curves, "
               "inference, and power-law analysis"};
  app.set_version_flag("--version", bbp_version());
  app.require_subcommand(1);

  SimulateParams sim;
  std::string sim_outdir = "bbp_out";
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "draw feature matrices and their growth statistics");
  sim_cmd->add_option("--gamma", sim.gamma, "mass parameter");
  sim_cmd->add_option("--theta", sim.theta, "concentration parameter");
  sim_cmd->add_option("--alpha", sim.alphas, "discount values (repeatable)");
  sim_cmd->add_option("--n-data", sim.n_data, "rows to draw");
  sim_cmd->add_option("--rounds", sim.rounds, "stick-breaking rounds");
  sim_cmd->add_option("--seed", sim.seed, "random seed");
  sim_cmd->add_option("--outdir", sim_outdir, "output directory");

  CurvesParams cur;
  std::string cur_outdir = "bbp_out";
  CLI::App* cur_cmd = app.add_subcommand(
      "curves", "tabulate exact and asymptotic mean feature counts");
  cur_cmd->add_option("--gamma", cur.gamma, "mass parameter");
  cur_cmd->add_option("--theta", cur.theta, "concentration parameter");
  cur_cmd->add_option("--alpha", cur.alpha, "discount parameter");
  cur_cmd->add_option("--kind", cur.kind,
                      "total_by_rows, total_by_time, multiplicity_by_rows, "
                      "or multiplicity_by_time");
  cur_cmd->add_option("--multiplicity", cur.multiplicity,
                      "multiplicity for the multiplicity kinds");
  cur_cmd->add_option("--grid-min", cur.grid_min, "smallest grid point");
  cur_cmd->add_option("--grid-max", cur.grid_max, "largest grid point");
  cur_cmd->add_option("--points", cur.points, "geometric grid size");
  cur_cmd->add_option("--seed", cur.seed, "seed recorded in the banner");
  cur_cmd->add_option("--outdir", cur_outdir, "output directory");

  InferParams inf;
  std::string inf_outdir = "bbp_out";
  std::string inf_config;
  CLI::App* inf_cmd = app.add_subcommand(
      "infer", "run the posterior sampler on a data table");
  inf_cmd->add_option("data", inf.data_path, "numeric CSV of observations");
  inf_cmd->add_flag("--synthetic", inf.synthetic,
                    "generate the input instead of reading a file");
  inf_cmd->add_option("--config", inf_config, "key=value settings file");
  inf_cmd->add_option("--n-data", inf.n_data, "synthetic rows");
  inf_cmd->add_option("--n-dims", inf.n_dims, "synthetic columns");
  inf_cmd->add_option("--features", inf.features,
                      "synthetic true feature count");
  inf_cmd->add_option("--rounds", inf.rounds, "synthetic prior rounds");
  inf_cmd->add_option("--max-tries", inf.max_tries,
                      "synthetic rejection attempts");
  inf_cmd->add_option("--gamma", inf.gamma, "initial mass");
  inf_cmd->add_option("--theta", inf.theta, "initial concentration");
  inf_cmd->add_option("--alpha", inf.alpha, "initial discount");
  inf_cmd->add_option("--noise-variance", inf.noise_variance,
                      "observation noise variance");
  inf_cmd->add_option("--weight-variance", inf.weight_variance,
                      "gated weight variance");
  inf_cmd->add_option("--factor-variance", inf.factor_variance,
                      "per-dimension factor variance");
  inf_cmd->add_option("--iterations", inf.iterations, "sweeps to run");
  inf_cmd->add_option("--burn-in", inf.burn_in, "sweeps discarded by summaries");
  inf_cmd->add_option("--thin", inf.thin, "trace recording stride");
  inf_cmd->add_option("--stick-samples", inf.stick_samples,
                      "Monte-Carlo chains per gate marginal");
  inf_cmd->add_option("--init-features", inf.init_features,
                      "features at initialization");
  inf_cmd->add_option("--seed", inf.seed, "random seed");
  inf_cmd->add_option("--outdir", inf_outdir, "output directory");

  AnalyzeParams ana;
  std::string ana_outdir = "bbp_out";
  CLI::App* ana_cmd = app.add_subcommand(
      "analyze", "fit a power law to a two-column series");
  ana_cmd->add_option("series", ana.series_path, "CSV with x and y columns")
      ->required();
  ana_cmd->add_option("--x-column", ana.x_column, "x column index");
  ana_cmd->add_option("--y-column", ana.y_column, "y column index");
  ana_cmd->add_option("--min-x", ana.min_x, "drop rows with x below this");
  ana_cmd->add_option("--max-x", ana.max_x, "drop rows with x above this");
  ana_cmd->add_flag("--full-range", ana.full_range,
                    "fit all rows instead of the upper half in log x");
  ana_cmd->add_option("--seed", ana.seed, "seed recorded in the banner");
  ana_cmd->add_option("--outdir", ana_outdir, "output directory");

  std::string replay_manifest;
  std::string replay_outdir;
  CLI::App* rep_cmd = app.add_subcommand(
      "replay", "re-run a command from its manifest");
  rep_cmd->add_option("manifest", replay_manifest, "path to manifest.json")
      ->required();
  rep_cmd->add_option("--outdir", replay_outdir,
                      "write outputs here instead of the manifest's directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (sim_cmd->parsed()) {
      run_simulate(sim, sim_outdir);
    } else if (cur_cmd->parsed()) {
      run_curves(cur, cur_outdir);
    } else if (inf_cmd->parsed()) {
      if (!inf_config.empty()) apply_config(inf_config, inf_cmd, &inf);
      run_infer(inf, inf_outdir);
    } else if (ana_cmd->parsed()) {
      run_analyze(ana, ana_outdir);
    } else if (rep_cmd->parsed()) {
      run_replay(replay_manifest, replay_outdir);
    }
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const io_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
