#pragma once

// Linear-Gaussian factor model gated by a feature-allocation prior. Data rows
// are weighted combinations of shared factor rows, switched on and off by a
// binary gate matrix whose columns carry round indicators from the
// stick-breaking construction. Inference is collapsed Gibbs over
// {round indicators, gates, mass, concentration, discount, factors, weights}.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bbp/bernoulli_process.hpp"
#include "bbp/beta_process.hpp"
#include "bbp/random.hpp"

namespace bbp {

struct FactorHyper {
  double noise_variance = 0.1;
  double weight_variance = 1.0;
  std::vector<double> factor_variances;  // one per observed column
};

// Inference-grade validation: strictly positive variances, one per column.
void validate(const FactorHyper& hyper, std::int64_t n_cols);

struct FactorState {
  FeatureMatrix z;          // gates, one column per represented feature
  Eigen::MatrixXd weights;  // same shape as z; entries under a zero gate are
                            // inert and never read by the likelihood
  Eigen::MatrixXd factors;  // one row per feature
  std::vector<std::int64_t> round_index;  // per feature, nondecreasing
  BpParams params;

  std::int64_t feature_count() const { return z.cols; }
};

// Cross-field consistency: shapes agree, gate counts match entries, round
// indicators are positive and nondecreasing. Throws std::domain_error.
void check_state(const FactorState& state);

struct McmcConfig {
  std::int64_t iterations = 2000;
  std::int64_t burn_in = 500;
  std::int64_t stick_samples = 256;  // Monte-Carlo chains per gate marginal
  std::int64_t theta_grid_points = 41;
  double theta_step_scale = 0.05;  // step = max(scale * current, step_min)
  double theta_step_min = 0.01;
  double theta_max = 100.0;
  double alpha_step = 0.01;  // midpoint lattice over (0, 1)
  double round_tail_threshold = 1e-8;  // stop rule for round enumeration
  std::int64_t thin = 1;
  std::int64_t init_features = 20;
  RandomStream stream{1};
};

void validate(const McmcConfig& config);

struct TraceRow {
  std::int64_t iteration;
  std::int64_t feature_count;
  double concentration;
  double discount;
  double mass;
  double rmse;
};

struct Trace {
  std::vector<TraceRow> rows;
  std::int64_t thin = 1;
  // Defensive-path counters: exhausted round-prior tails and hyper grids
  // whose every cell lost all mass.
  std::int64_t prior_underflows = 0;
  std::int64_t grid_underflows = 0;
};

// Columns: iteration,K,theta,alpha,gamma,rmse.
void write_trace_csv(std::ostream& os, const Trace& trace, std::uint64_t seed);

// Monte-Carlo marginal of one gate column under the stick prior. The table
// owns a fixed set of stick chains, extends them lazily by round, and is
// shared across candidate rounds and columns so ratios ride on common random
// numbers. Results are memoized per (round, ones, zeros).
class StickProbTable {
 public:
  StickProbTable(const BpParams& params, std::int64_t samples,
                 RandomStream stream);

  // log of (1/S) sum_s pick_s^ones (1 - pick_s)^zeros at the given round.
  double log_marginal(std::int64_t round, std::int64_t ones,
                      std::int64_t zeros);

 private:
  void extend(std::int64_t round);

  BpParams params_;
  std::int64_t samples_;
  RandomStream stream_;
  std::vector<std::vector<double>> log_pick_;  // [round-1][chain]
  std::vector<std::vector<double>> log_skip_;  // [round-1][chain]
  std::vector<double> log_survive_;            // [chain], through stored rounds
  std::vector<double> work_;
  std::unordered_map<std::uint64_t, double> memo_;
};

// One-shot version of the table for a single (round, counts) query.
double stick_mc_prob(std::int64_t round, std::int64_t ones, std::int64_t zeros,
                     const BpParams& params, std::int64_t samples,
                     RandomStream& stream);

// Log density of one data row with its weights integrated out, evaluated
// through the active-set inner system rather than the dense covariance.
double collapsed_row_loglik(const Eigen::VectorXd& x_row,
                            const Eigen::MatrixXd& active_factors,
                            double noise_variance, double weight_variance);

// Gibbs blocks; each runs one full pass and mutates the state in place.
void sample_round_indicators(FactorState& state, const McmcConfig& config,
                             RandomStream& stream, Trace* log = nullptr);
// remove_dead=false keeps gate columns whose count hits zero; the stationary
// distribution tests need the fixed-dimension chain.
void sample_gates(FactorState& state, const Eigen::MatrixXd& x,
                  const FactorHyper& hyper, const McmcConfig& config,
                  RandomStream& stream, bool remove_dead = true);
double sample_total_mass(FactorState& state, RandomStream& stream);
void sample_concentration(FactorState& state, const McmcConfig& config,
                          RandomStream& stream, Trace* log = nullptr);
void sample_discount(FactorState& state, const McmcConfig& config,
                     RandomStream& stream, Trace* log = nullptr);
void sample_factors(FactorState& state, const Eigen::MatrixXd& x,
                    const FactorHyper& hyper, RandomStream& stream);
void sample_weights(FactorState& state, const Eigen::MatrixXd& x,
                    const FactorHyper& hyper, RandomStream& stream);

// Exact posterior moments behind the two Gaussian blocks, exposed so tests
// can pin the samplers against closed forms.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> factor_column_posterior(
    const FactorState& state, const Eigen::MatrixXd& x,
    const FactorHyper& hyper, std::int64_t col);
std::pair<Eigen::VectorXd, Eigen::MatrixXd> weight_row_posterior(
    const FactorState& state, const Eigen::MatrixXd& x,
    const FactorHyper& hyper, std::int64_t row);

FactorState init_state(const Eigen::MatrixXd& x, const BpParams& params,
                       const FactorHyper& hyper, std::int64_t n_features,
                       RandomStream& stream);

// Full sweep loop; the state argument is advanced to the final state. The
// returned trace has the initial state first, then one row per kept
// iteration.
Trace run_mcmc(const Eigen::MatrixXd& x, const McmcConfig& config,
               const FactorHyper& hyper, FactorState& state);

// Per-element reconstruction error of the gated model against the data.
double reconstruction_rmse(const FactorState& state, const Eigen::MatrixXd& x);

struct SyntheticData {
  Eigen::MatrixXd x;
  FactorState truth;
};

SyntheticData generate_synthetic(const BpParams& params,
                                 const FactorHyper& hyper, std::int64_t n_rows,
                                 std::int64_t n_cols, std::int64_t rounds,
                                 RandomStream& stream);

// Redraws until the realized feature count hits the target; domain_error
// after max_tries misses.
SyntheticData generate_synthetic_with_features(
    const BpParams& params, const FactorHyper& hyper, std::int64_t n_rows,
    std::int64_t n_cols, std::int64_t rounds, std::int64_t target_features,
    std::int64_t max_tries, RandomStream& stream);

// Sample autocorrelation at lags 0..max_lag; lag 0 is exactly 1. A constant
// series yields {1, 0, 0, ...} and sets *degenerate when provided.
std::vector<double> autocorrelation(std::span<const double> series,
                                    std::int64_t max_lag,
                                    bool* degenerate = nullptr);

}  // namespace bbp
