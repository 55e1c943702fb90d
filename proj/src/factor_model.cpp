#include "bbp/factor_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "bbp/csv.hpp"
#include "bbp/errors.hpp"
#include "bbp/special.hpp"

namespace bbp {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Hard ceiling on stick levels; a healthy chain never gets near it.
constexpr std::int64_t kLevelCap = 4000;

std::vector<std::int64_t> active_columns(const FeatureMatrix& z,
                                         std::int64_t row) {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(z.cols));
  for (std::int64_t c = 0; c < z.cols; ++c) {
    if (z.at(row, c) != 0) out.push_back(c);
  }
  return out;
}

// Weights with zero gates zeroed out, the matrix the likelihood sees.
Eigen::MatrixXd gated_weights(const FactorState& state) {
  Eigen::MatrixXd a = state.weights;
  for (std::int64_t r = 0; r < state.z.rows; ++r) {
    for (std::int64_t c = 0; c < state.z.cols; ++c) {
      if (state.z.at(r, c) == 0) a(r, c) = 0.0;
    }
  }
  return a;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& source,
                            const std::vector<std::int64_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  }
  return out;
}

// P(count > bound) for a Poisson round size, summed upward so small tails
// never pass through a cancelling subtraction.
double poisson_upper_tail(double mean, std::int64_t bound) {
  if (bound < 0) return 1.0;
  if (static_cast<double>(bound) < mean) {
    // left of the bulk the complement is the small quantity; summing the
    // lower pmf downward from the bound keeps the terms decaying
    double term = std::exp(static_cast<double>(bound) * std::log(mean) -
                           mean - log_gamma(static_cast<double>(bound) + 1.0));
    double cdf = 0.0;
    for (std::int64_t i = bound; i >= 0; --i) {
      cdf += term;
      if (term == 0.0 || term < cdf * 1e-18) break;
      term *= static_cast<double>(i) / mean;
    }
    return 1.0 - cdf;
  }
  double log_term = static_cast<double>(bound + 1) * std::log(mean) - mean -
                    log_gamma(static_cast<double>(bound) + 2.0);
  double term = std::exp(log_term);
  double total = 0.0;
  const std::int64_t cap =
      bound + 2000 + static_cast<std::int64_t>(8.0 * std::sqrt(mean));
  for (std::int64_t i = bound + 1; i < cap; ++i) {
    total += term;
    if (term == 0.0 || term < total * 1e-18) break;
    term *= mean / static_cast<double>(i + 1);
  }
  return total;
}

std::size_t categorical_from_log(std::span<const double> log_mass,
                                 RandomStream& stream) {
  const double norm = log_sum_exp(log_mass);
  if (!std::isfinite(norm)) {
    throw numerical_error("categorical draw lost all probability mass");
  }
  const double u = stream.next_uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < log_mass.size(); ++i) {
    acc += std::exp(log_mass[i] - norm);
    if (u < acc) return i;
  }
  return log_mass.size() - 1;
}

void remove_dead_columns(FactorState& state) {
  std::vector<std::int64_t> keep;
  keep.reserve(static_cast<std::size_t>(state.z.cols));
  for (std::int64_t c = 0; c < state.z.cols; ++c) {
    if (state.z.column_counts[c] > 0) keep.push_back(c);
  }
  if (static_cast<std::int64_t>(keep.size()) == state.z.cols) return;

  const std::int64_t n = state.z.rows;
  const std::int64_t kk = static_cast<std::int64_t>(keep.size());
  FeatureMatrix z;
  z.rows = n;
  z.cols = kk;
  z.entries.assign(static_cast<std::size_t>(n * kk), 0);
  z.column_counts.resize(static_cast<std::size_t>(kk));
  Eigen::MatrixXd weights(n, kk);
  Eigen::MatrixXd factors(kk, state.factors.cols());
  std::vector<std::int64_t> rounds(static_cast<std::size_t>(kk));
  for (std::int64_t i = 0; i < kk; ++i) {
    const std::int64_t c = keep[static_cast<std::size_t>(i)];
    for (std::int64_t r = 0; r < n; ++r) z.set(r, i, state.z.at(r, c));
    z.column_counts[static_cast<std::size_t>(i)] =
        state.z.column_counts[static_cast<std::size_t>(c)];
    weights.col(i) = state.weights.col(c);
    factors.row(i) = state.factors.row(c);
    rounds[static_cast<std::size_t>(i)] =
        state.round_index[static_cast<std::size_t>(c)];
  }
  state.z = std::move(z);
  state.weights = std::move(weights);
  state.factors = std::move(factors);
  state.round_index = std::move(rounds);
}

double centered_normal(double variance, RandomStream& stream) {
  return variance > 0.0 ? sample_normal(0.0, variance, stream) : 0.0;
}

}  // namespace

void validate(const FactorHyper& hyper, std::int64_t n_cols) {
  if (n_cols < 1) throw std::domain_error("column count must be positive");
  if (!(hyper.noise_variance > 0.0) || !std::isfinite(hyper.noise_variance)) {
    throw std::domain_error("noise variance must be positive and finite");
  }
  if (!(hyper.weight_variance > 0.0) || !std::isfinite(hyper.weight_variance)) {
    throw std::domain_error("weight variance must be positive and finite");
  }
  if (static_cast<std::int64_t>(hyper.factor_variances.size()) != n_cols) {
    throw std::domain_error("factor variance count and column count differ");
  }
  for (double v : hyper.factor_variances) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::domain_error("factor variances must be positive and finite");
    }
  }
}

void check_state(const FactorState& state) {
  validate(state.params);
  const std::int64_t n = state.z.rows;
  const std::int64_t kk = state.z.cols;
  if (n < 1) throw std::domain_error("state must hold at least one row");
  if (kk < 0) throw std::domain_error("feature count must be nonnegative");
  if (static_cast<std::int64_t>(state.z.entries.size()) != n * kk) {
    throw std::domain_error("gate storage size mismatch");
  }
  if (static_cast<std::int64_t>(state.z.column_counts.size()) != kk) {
    throw std::domain_error("gate count size mismatch");
  }
  if (state.weights.rows() != n || state.weights.cols() != kk) {
    throw std::domain_error("weight matrix shape mismatch");
  }
  if (state.factors.rows() != kk) {
    throw std::domain_error("factor row count mismatch");
  }
  if (static_cast<std::int64_t>(state.round_index.size()) != kk) {
    throw std::domain_error("round index size mismatch");
  }
  for (std::int64_t c = 0; c < kk; ++c) {
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < n; ++r) {
      const std::uint8_t v = state.z.at(r, c);
      if (v > 1) throw std::domain_error("gates must be binary");
      count += v;
    }
    if (count != state.z.column_counts[static_cast<std::size_t>(c)]) {
      throw std::domain_error("gate counts disagree with entries");
    }
  }
  std::int64_t prev = 1;
  for (std::int64_t c = 0; c < kk; ++c) {
    const std::int64_t r = state.round_index[static_cast<std::size_t>(c)];
    if (r < prev) {
      throw std::domain_error("round indicators must be nondecreasing from 1");
    }
    prev = r;
  }
  if (!state.weights.allFinite() || !state.factors.allFinite()) {
    throw std::domain_error("state matrices must be finite");
  }
}

void validate(const McmcConfig& config) {
  if (config.iterations < 0) {
    throw std::domain_error("iteration count must be nonnegative");
  }
  if (config.burn_in < 0 ||
      config.burn_in >= std::max<std::int64_t>(config.iterations, 1)) {
    throw std::domain_error("burn-in must fit inside the iteration budget");
  }
  if (config.stick_samples < 1) {
    throw std::domain_error("stick sample count must be positive");
  }
  if (config.theta_grid_points < 3 || config.theta_grid_points % 2 == 0) {
    throw std::domain_error(
        "concentration grid needs an odd size of at least 3");
  }
  if (!(config.theta_step_scale > 0.0) || !(config.theta_step_min > 0.0) ||
      !(config.theta_max > 0.0)) {
    throw std::domain_error("concentration grid geometry must be positive");
  }
  if (!(config.alpha_step > 0.0) || config.alpha_step > 0.5) {
    throw std::domain_error("discount step must lie in (0, 0.5]");
  }
  if (!(config.round_tail_threshold > 0.0) ||
      !(config.round_tail_threshold < 1.0)) {
    throw std::domain_error("round tail threshold must lie in (0, 1)");
  }
  if (config.thin < 1) throw std::domain_error("thinning stride must be positive");
  if (config.init_features < 1) {
    throw std::domain_error("initial feature count must be positive");
  }
}

StickProbTable::StickProbTable(const BpParams& params, std::int64_t samples,
                               RandomStream stream)
    : params_(params), samples_(samples), stream_(stream) {
  validate(params);
  if (samples < 1) throw std::domain_error("stick sample count must be positive");
  log_survive_.assign(static_cast<std::size_t>(samples), 0.0);
  work_.resize(static_cast<std::size_t>(samples));
}

void StickProbTable::extend(std::int64_t round) {
  while (static_cast<std::int64_t>(log_pick_.size()) < round) {
    const std::int64_t level =
        static_cast<std::int64_t>(log_pick_.size()) + 1;
    if (level > kLevelCap) {
      throw numerical_error("stick table exceeded the level cap");
    }
    const DistSpec spec = stick_distribution(params_, level);
    std::vector<double> pick(static_cast<std::size_t>(samples_));
    std::vector<double> skip(static_cast<std::size_t>(samples_));
    for (std::int64_t s = 0; s < samples_; ++s) {
      const double v = draw(spec, stream_);
      const std::size_t i = static_cast<std::size_t>(s);
      const double lp = std::log(v) + log_survive_[i];
      double p = std::exp(lp);
      if (p > 1.0 - 1e-16) p = 1.0 - 1e-16;  // keep the complement away from 0
      pick[i] = lp;
      skip[i] = std::log1p(-p);
      log_survive_[i] += std::log1p(-v);
    }
    log_pick_.push_back(std::move(pick));
    log_skip_.push_back(std::move(skip));
  }
}

double StickProbTable::log_marginal(std::int64_t round, std::int64_t ones,
                                    std::int64_t zeros) {
  if (round < 1) throw std::domain_error("round must be positive");
  if (ones < 0 || zeros < 0) {
    throw std::domain_error("gate counts must be nonnegative");
  }
  if (ones == 0 && zeros == 0) return 0.0;

  constexpr std::int64_t kPackLimit = std::int64_t{1} << 21;
  const bool packable = round < kPackLimit && ones < kPackLimit &&
                        zeros < kPackLimit;
  std::uint64_t key = 0;
  if (packable) {
    key = (static_cast<std::uint64_t>(round) << 42) |
          (static_cast<std::uint64_t>(ones) << 21) |
          static_cast<std::uint64_t>(zeros);
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }

  extend(round);
  const auto& lp = log_pick_[static_cast<std::size_t>(round - 1)];
  const auto& ls = log_skip_[static_cast<std::size_t>(round - 1)];
  const double o = static_cast<double>(ones);
  const double z = static_cast<double>(zeros);
  for (std::int64_t s = 0; s < samples_; ++s) {
    const std::size_t i = static_cast<std::size_t>(s);
    work_[i] = o * lp[i] + z * ls[i];
  }
  const double out =
      log_sum_exp(work_) - std::log(static_cast<double>(samples_));
  if (packable) memo_.emplace(key, out);
  return out;
}

double stick_mc_prob(std::int64_t round, std::int64_t ones, std::int64_t zeros,
                     const BpParams& params, std::int64_t samples,
                     RandomStream& stream) {
  StickProbTable table(params, samples,
                       stream.split_child(stream.next_u64()));
  return std::exp(table.log_marginal(round, ones, zeros));
}

double collapsed_row_loglik(const Eigen::VectorXd& x_row,
                            const Eigen::MatrixXd& active_factors,
                            double noise_variance, double weight_variance) {
  if (!(noise_variance > 0.0) || !(weight_variance > 0.0)) {
    throw std::domain_error("collapsed likelihood needs positive variances");
  }
  const Eigen::Index p = x_row.size();
  if (p < 1) throw std::domain_error("data row must be nonempty");
  const Eigen::Index m = active_factors.rows();
  if (m > 0 && active_factors.cols() != p) {
    throw std::domain_error("factor row length and data width differ");
  }
  double out = -0.5 * (static_cast<double>(p) *
                           (kLogTwoPi + std::log(noise_variance)) +
                       x_row.squaredNorm() / noise_variance);
  if (m == 0) return out;

  // Inner system of the low-rank covariance; size tracks the active set.
  Eigen::MatrixXd inner =
      active_factors * active_factors.transpose() / noise_variance;
  inner.diagonal().array() += 1.0 / weight_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("collapsed likelihood factorization failed");
  }
  const Eigen::VectorXd proj = active_factors * x_row / noise_variance;
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    log_det += std::log(llt.matrixLLT()(i, i));
  }
  log_det *= 2.0;
  const double correction = proj.dot(llt.solve(proj));
  out -= 0.5 * (static_cast<double>(m) * std::log(weight_variance) + log_det);
  out += 0.5 * correction;
  return out;
}

void sample_round_indicators(FactorState& state, const McmcConfig& config,
                             RandomStream& stream, Trace* log) {
  const std::int64_t k_total = state.feature_count();
  if (k_total == 0) return;
  StickProbTable table(state.params, config.stick_samples,
                       stream.split_child(stream.next_u64()));
  const std::int64_t n_rows = state.z.rows;
  const double log_p0 = -state.params.mass;
  const double log_1m_p0 = std::log1p(-std::exp(-state.params.mass));
  const double log_stop = std::log(config.round_tail_threshold);

  std::vector<double> log_mass;
  std::vector<std::int64_t> cand;
  for (std::int64_t k = 0; k < k_total; ++k) {
    const std::int64_t prev =
        k == 0 ? 1 : state.round_index[static_cast<std::size_t>(k - 1)];
    std::int64_t run = 0;
    for (std::int64_t j = k - 1;
         j >= 0 && state.round_index[static_cast<std::size_t>(j)] == prev; --j) {
      ++run;
    }
    const double tail_hi = poisson_upper_tail(state.params.mass, run);
    const double tail_lo = poisson_upper_tail(state.params.mass, run - 1);
    bool underflow = false;
    double stay = 0.0;
    if (tail_lo > 0.0) {
      stay = tail_hi / tail_lo;
      if (stay >= 1.0) stay = 1.0 - 1e-16;
    } else {
      underflow = true;  // tail ratio lost to rounding, move cases only
    }

    const std::int64_t ones =
        state.z.column_counts[static_cast<std::size_t>(k)];
    const std::int64_t zeros = n_rows - ones;
    log_mass.clear();
    cand.clear();
    double best = kNegInf;
    if (!underflow && stay > 0.0) {
      const double lm =
          std::log(stay) + table.log_marginal(prev, ones, zeros);
      log_mass.push_back(lm);
      cand.push_back(prev);
      best = lm;
    }
    const double log_move = underflow ? 0.0 : std::log1p(-stay);
    for (std::int64_t h = 1; h <= kLevelCap; ++h) {
      const double lm = log_move + log_1m_p0 +
                        static_cast<double>(h - 1) * log_p0 +
                        table.log_marginal(prev + h, ones, zeros);
      log_mass.push_back(lm);
      cand.push_back(prev + h);
      if (lm > best) best = lm;
      if (h >= 2 && lm < best + log_stop) break;
    }
    const std::size_t pick = categorical_from_log(log_mass, stream);
    state.round_index[static_cast<std::size_t>(k)] = cand[pick];
    if (underflow && log != nullptr) ++log->prior_underflows;
  }
}

void sample_gates(FactorState& state, const Eigen::MatrixXd& x,
                  const FactorHyper& hyper, const McmcConfig& config,
                  RandomStream& stream, bool remove_dead) {
  const std::int64_t n_rows = state.z.rows;
  const std::int64_t k_total = state.z.cols;
  if (x.rows() != n_rows) {
    throw std::domain_error("state and data row counts differ");
  }
  validate(hyper, x.cols());
  if (k_total == 0) return;
  if (state.factors.cols() != x.cols()) {
    throw std::domain_error("factor width and data width differ");
  }
  StickProbTable table(state.params, config.stick_samples,
                       stream.split_child(stream.next_u64()));
  const double nv = hyper.noise_variance;
  const double wv = hyper.weight_variance;

  std::vector<std::int64_t> act;
  act.reserve(static_cast<std::size_t>(k_total));
  for (std::int64_t n = 0; n < n_rows; ++n) {
    const Eigen::VectorXd x_row = x.row(n).transpose();
    for (std::int64_t k = 0; k < k_total; ++k) {
      const std::uint8_t cur = state.z.at(n, k);
      const std::int64_t m1 =
          state.z.column_counts[static_cast<std::size_t>(k)] - cur;
      const std::int64_t m0 = (n_rows - 1) - m1;
      const std::int64_t round =
          state.round_index[static_cast<std::size_t>(k)];
      const double log_prior_odds =
          table.log_marginal(round, m1 + 1, m0) -
          table.log_marginal(round, m1, m0 + 1);

      act.clear();
      for (std::int64_t j = 0; j < k_total; ++j) {
        if (j != k && state.z.at(n, j) != 0) act.push_back(j);
      }
      Eigen::MatrixXd off(static_cast<Eigen::Index>(act.size()), x.cols());
      for (std::size_t i = 0; i < act.size(); ++i) {
        off.row(static_cast<Eigen::Index>(i)) = state.factors.row(act[i]);
      }
      Eigen::MatrixXd on(off.rows() + 1, x.cols());
      on.topRows(off.rows()) = off;
      on.row(off.rows()) = state.factors.row(k);

      const double log_odds = collapsed_row_loglik(x_row, on, nv, wv) -
                              collapsed_row_loglik(x_row, off, nv, wv) +
                              log_prior_odds;
      const double p_on = 1.0 / (1.0 + std::exp(-log_odds));
      const std::uint8_t bit =
          static_cast<std::uint8_t>(sample_bernoulli(p_on, stream));
      if (bit != cur) {
        state.z.set(n, k, bit);
        state.z.column_counts[static_cast<std::size_t>(k)] +=
            bit != 0 ? 1 : -1;
      }
    }
  }
  if (remove_dead) remove_dead_columns(state);
}

double sample_total_mass(FactorState& state, RandomStream& stream) {
  if (state.round_index.empty()) {
    throw std::domain_error("mass update needs at least one feature");
  }
  const double shape = static_cast<double>(state.feature_count());
  const double rate = static_cast<double>(state.round_index.back());
  const double mass = sample_gamma(shape, rate, stream);
  state.params.mass = mass;
  return mass;
}

namespace {

// Shared grid machinery: score every candidate parameter value with the gate
// marginal under common random numbers, then draw from the normalized grid.
void grid_update(FactorState& state, const McmcConfig& config,
                 RandomStream& stream, Trace* log,
                 const std::vector<double>& candidates, bool concentration) {
  if (candidates.empty()) return;
  const std::uint64_t tag = stream.next_u64();
  const std::int64_t n_rows = state.z.rows;
  const std::int64_t k_total = state.feature_count();
  std::vector<double> log_mass;
  log_mass.reserve(candidates.size());
  for (const double c : candidates) {
    BpParams p = state.params;
    if (concentration) {
      p.concentration = c;
    } else {
      p.discount = c;
    }
    StickProbTable table(p, config.stick_samples, stream.split_child(tag));
    double ll = 0.0;
    for (std::int64_t k = 0; k < k_total; ++k) {
      const std::int64_t ones =
          state.z.column_counts[static_cast<std::size_t>(k)];
      ll += table.log_marginal(state.round_index[static_cast<std::size_t>(k)],
                               ones, n_rows - ones);
    }
    log_mass.push_back(ll);
  }
  const double norm = log_sum_exp(log_mass);
  if (!std::isfinite(norm)) {
    if (log != nullptr) ++log->grid_underflows;
    return;
  }
  const std::size_t pick = categorical_from_log(log_mass, stream);
  if (concentration) {
    state.params.concentration = candidates[pick];
  } else {
    state.params.discount = candidates[pick];
  }
}

}  // namespace

void sample_concentration(FactorState& state, const McmcConfig& config,
                          RandomStream& stream, Trace* log) {
  const double cur = state.params.concentration;
  const double step =
      std::max(config.theta_step_scale * cur, config.theta_step_min);
  const std::int64_t half = (config.theta_grid_points - 1) / 2;
  std::vector<double> candidates;
  candidates.reserve(static_cast<std::size_t>(config.theta_grid_points));
  for (std::int64_t t = -half; t <= half; ++t) {
    const double c = cur + static_cast<double>(t) * step;
    if (c > 0.0 && c <= config.theta_max) candidates.push_back(c);
  }
  grid_update(state, config, stream, log, candidates, true);
}

void sample_discount(FactorState& state, const McmcConfig& config,
                     RandomStream& stream, Trace* log) {
  const std::int64_t cells =
      static_cast<std::int64_t>(std::llround(1.0 / config.alpha_step));
  std::vector<double> candidates;
  candidates.reserve(static_cast<std::size_t>(cells));
  for (std::int64_t t = 0; t < cells; ++t) {
    const double c = (static_cast<double>(t) + 0.5) * config.alpha_step;
    if (c > 0.0 && c < 1.0) candidates.push_back(c);
  }
  grid_update(state, config, stream, log, candidates, false);
}

void sample_factors(FactorState& state, const Eigen::MatrixXd& x,
                    const FactorHyper& hyper, RandomStream& stream) {
  const std::int64_t kk = state.feature_count();
  if (kk == 0) throw std::domain_error("factor update needs a feature");
  validate(hyper, x.cols());
  if (x.rows() != state.z.rows || x.cols() != state.factors.cols()) {
    throw std::domain_error("data shape and state shape differ");
  }
  const Eigen::MatrixXd a = gated_weights(state);
  const Eigen::MatrixXd gram =
      a.transpose() * a / hyper.noise_variance;
  const Eigen::MatrixXd cross =
      a.transpose() * x / hyper.noise_variance;
  Eigen::VectorXd zvec(kk);
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    Eigen::MatrixXd prec = gram;
    prec.diagonal().array() +=
        1.0 / hyper.factor_variances[static_cast<std::size_t>(p)];
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("factor precision factorization failed");
    }
    const Eigen::VectorXd mu = llt.solve(cross.col(p));
    for (Eigen::Index i = 0; i < zvec.size(); ++i) {
      zvec[i] = stream.next_standard_normal();
    }
    state.factors.col(p) = mu + llt.matrixU().solve(zvec);
  }
}

void sample_weights(FactorState& state, const Eigen::MatrixXd& x,
                    const FactorHyper& hyper, RandomStream& stream) {
  validate(hyper, x.cols());
  if (x.rows() != state.z.rows) {
    throw std::domain_error("state and data row counts differ");
  }
  if (state.feature_count() > 0 && state.factors.cols() != x.cols()) {
    throw std::domain_error("factor width and data width differ");
  }
  const double nv = hyper.noise_variance;
  const double wv = hyper.weight_variance;
  for (std::int64_t n = 0; n < state.z.rows; ++n) {
    const std::vector<std::int64_t> act = active_columns(state.z, n);
    if (act.empty()) continue;
    const Eigen::MatrixXd phi = gather_rows(state.factors, act);
    Eigen::MatrixXd prec = phi * phi.transpose() / nv;
    prec.diagonal().array() += 1.0 / wv;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("weight precision factorization failed");
    }
    const Eigen::VectorXd mu = llt.solve(phi * x.row(n).transpose() / nv);
    Eigen::VectorXd zvec(static_cast<Eigen::Index>(act.size()));
    for (Eigen::Index i = 0; i < zvec.size(); ++i) {
      zvec[i] = stream.next_standard_normal();
    }
    const Eigen::VectorXd draw = mu + llt.matrixU().solve(zvec);
    for (std::size_t i = 0; i < act.size(); ++i) {
      state.weights(n, act[i]) = draw[static_cast<Eigen::Index>(i)];
    }
  }
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> factor_column_posterior(
    const FactorState& state, const Eigen::MatrixXd& x,
    const FactorHyper& hyper, std::int64_t col) {
  const std::int64_t kk = state.feature_count();
  if (kk == 0) throw std::domain_error("posterior needs a feature");
  validate(hyper, x.cols());
  if (col < 0 || col >= x.cols()) {
    throw std::domain_error("column index out of range");
  }
  const Eigen::MatrixXd a = gated_weights(state);
  Eigen::MatrixXd prec = a.transpose() * a / hyper.noise_variance;
  prec.diagonal().array() +=
      1.0 / hyper.factor_variances[static_cast<std::size_t>(col)];
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("factor precision factorization failed");
  }
  const Eigen::VectorXd mu =
      llt.solve(a.transpose() * x.col(col) / hyper.noise_variance);
  const Eigen::MatrixXd cov =
      llt.solve(Eigen::MatrixXd::Identity(kk, kk));
  return {mu, cov};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> weight_row_posterior(
    const FactorState& state, const Eigen::MatrixXd& x,
    const FactorHyper& hyper, std::int64_t row) {
  validate(hyper, x.cols());
  if (row < 0 || row >= state.z.rows) {
    throw std::domain_error("row index out of range");
  }
  const std::vector<std::int64_t> act = active_columns(state.z, row);
  const Eigen::Index m = static_cast<Eigen::Index>(act.size());
  if (m == 0) return {Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};
  const Eigen::MatrixXd phi = gather_rows(state.factors, act);
  Eigen::MatrixXd prec = phi * phi.transpose() / hyper.noise_variance;
  prec.diagonal().array() += 1.0 / hyper.weight_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("weight precision factorization failed");
  }
  const Eigen::VectorXd mu =
      llt.solve(phi * x.row(row).transpose() / hyper.noise_variance);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
  return {mu, cov};
}

FactorState init_state(const Eigen::MatrixXd& x, const BpParams& params,
                       const FactorHyper& hyper, std::int64_t n_features,
                       RandomStream& stream) {
  validate(params);
  validate(hyper, x.cols());
  if (x.rows() < 1) throw std::domain_error("data matrix must be nonempty");
  if (n_features < 1) {
    throw std::domain_error("initial feature count must be positive");
  }
  const std::int64_t n = x.rows();
  const std::int64_t p = x.cols();
  const std::int64_t kk = n_features;
  FactorState state;
  state.params = params;
  state.z.rows = n;
  state.z.cols = kk;
  state.z.entries.assign(static_cast<std::size_t>(n * kk), 0);
  state.z.column_counts.assign(static_cast<std::size_t>(kk), 0);
  for (std::int64_t c = 0; c < kk; ++c) {
    std::int64_t count = 0;
    std::int64_t tries = 0;
    while (count == 0) {
      if (++tries > 10000) {  // pathologically unlucky, force one gate
        state.z.set(0, c, 1);
        count = 1;
        break;
      }
      count = 0;
      for (std::int64_t r = 0; r < n; ++r) {
        const std::uint8_t bit =
            static_cast<std::uint8_t>(sample_bernoulli(0.1, stream));
        state.z.set(r, c, bit);
        count += bit;
      }
    }
    state.z.column_counts[static_cast<std::size_t>(c)] = count;
  }
  std::int64_t per_round = static_cast<std::int64_t>(std::ceil(params.mass));
  if (per_round < 1) per_round = 1;
  state.round_index.resize(static_cast<std::size_t>(kk));
  for (std::int64_t c = 0; c < kk; ++c) {
    state.round_index[static_cast<std::size_t>(c)] = 1 + c / per_round;
  }
  state.weights.resize(n, kk);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < kk; ++c) {
      state.weights(r, c) = centered_normal(hyper.weight_variance, stream);
    }
  }
  state.factors.resize(kk, p);
  for (std::int64_t r = 0; r < kk; ++r) {
    for (std::int64_t c = 0; c < p; ++c) {
      state.factors(r, c) = centered_normal(
          hyper.factor_variances[static_cast<std::size_t>(c)], stream);
    }
  }
  return state;
}

double reconstruction_rmse(const FactorState& state,
                           const Eigen::MatrixXd& x) {
  if (x.rows() != state.z.rows) {
    throw std::domain_error("state and data row counts differ");
  }
  Eigen::MatrixXd resid = x;
  if (state.feature_count() > 0) {
    resid -= gated_weights(state) * state.factors;
  }
  return std::sqrt(resid.squaredNorm() /
                   static_cast<double>(x.rows() * x.cols()));
}

Trace run_mcmc(const Eigen::MatrixXd& x, const McmcConfig& config,
               const FactorHyper& hyper, FactorState& state) {
  validate(config);
  validate(hyper, x.cols());
  if (x.rows() < 1 || x.cols() < 1) {
    throw std::domain_error("data matrix must be nonempty");
  }
  if (!x.allFinite()) throw std::domain_error("data matrix must be finite");
  check_state(state);
  if (state.z.rows != x.rows()) {
    throw std::domain_error("state and data row counts differ");
  }
  if (state.feature_count() > 0 && state.factors.cols() != x.cols()) {
    throw std::domain_error("factor width and data width differ");
  }

  RandomStream chain = config.stream;
  Trace trace;
  trace.thin = config.thin;
  const auto record = [&](std::int64_t iteration) {
    trace.rows.push_back({iteration, state.feature_count(),
                          state.params.concentration, state.params.discount,
                          state.params.mass, reconstruction_rmse(state, x)});
  };
  record(0);
  const auto tagged = [](std::int64_t it, const char* what) {
    return "iteration " + std::to_string(it) + ": " + std::string(what);
  };
  for (std::int64_t it = 1; it <= config.iterations; ++it) {
    try {
      if (state.feature_count() > 0) {
        sample_round_indicators(state, config, chain, &trace);
      }
      sample_gates(state, x, hyper, config, chain, true);
      if (state.feature_count() > 0) sample_total_mass(state, chain);
      sample_concentration(state, config, chain, &trace);
      sample_discount(state, config, chain, &trace);
      if (state.feature_count() > 0) {
        sample_factors(state, x, hyper, chain);
        sample_weights(state, x, hyper, chain);
      }
    } catch (const numerical_error& e) {
      throw numerical_error(tagged(it, e.what()));
    } catch (const std::domain_error& e) {
      throw std::domain_error(tagged(it, e.what()));
    }
    if (it % config.thin == 0 || it == config.iterations) record(it);
  }
  return trace;
}

void write_trace_csv(std::ostream& os, const Trace& trace,
                     std::uint64_t seed) {
  const std::vector<std::string> names = {"iteration", "K",     "theta",
                                          "alpha",     "gamma", "rmse"};
  std::vector<std::vector<double>> cols(6);
  for (auto& c : cols) c.reserve(trace.rows.size());
  for (const TraceRow& row : trace.rows) {
    cols[0].push_back(static_cast<double>(row.iteration));
    cols[1].push_back(static_cast<double>(row.feature_count));
    cols[2].push_back(row.concentration);
    cols[3].push_back(row.discount);
    cols[4].push_back(row.mass);
    cols[5].push_back(row.rmse);
  }
  write_table_csv(os, seed, names, cols);
}

SyntheticData generate_synthetic(const BpParams& params,
                                 const FactorHyper& hyper, std::int64_t n_rows,
                                 std::int64_t n_cols, std::int64_t rounds,
                                 RandomStream& stream) {
  validate(params);
  if (n_rows < 1 || n_cols < 1 || rounds < 1) {
    throw std::domain_error("synthetic shape must be positive");
  }
  if (static_cast<std::int64_t>(hyper.factor_variances.size()) != n_cols) {
    throw std::domain_error("factor variance count and column count differ");
  }
  if (!(hyper.noise_variance >= 0.0) || !(hyper.weight_variance >= 0.0)) {
    throw std::domain_error("generation variances must be nonnegative");
  }
  for (double v : hyper.factor_variances) {
    if (!(v >= 0.0)) {
      throw std::domain_error("generation variances must be nonnegative");
    }
  }

  const BetaProcessDraw draw = stick_break(params, rounds, stream);
  std::vector<std::vector<std::uint8_t>> cols;
  std::vector<std::int64_t> col_rounds;
  for (std::size_t a = 0; a < draw.size(); ++a) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(n_rows));
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      bits[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(
          sample_bernoulli(draw.weights[a], stream));
      count += bits[static_cast<std::size_t>(r)];
    }
    if (count > 0) {
      cols.push_back(std::move(bits));
      col_rounds.push_back(draw.rounds[a]);
    }
  }

  const std::int64_t kk = static_cast<std::int64_t>(cols.size());
  FactorState truth;
  truth.params = params;
  truth.z.rows = n_rows;
  truth.z.cols = kk;
  truth.z.entries.assign(static_cast<std::size_t>(n_rows * kk), 0);
  truth.z.column_counts.assign(static_cast<std::size_t>(kk), 0);
  for (std::int64_t c = 0; c < kk; ++c) {
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      const std::uint8_t bit =
          cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
      truth.z.set(r, c, bit);
      count += bit;
    }
    truth.z.column_counts[static_cast<std::size_t>(c)] = count;
  }
  truth.round_index = std::move(col_rounds);
  truth.weights.resize(n_rows, kk);
  for (std::int64_t r = 0; r < n_rows; ++r) {
    for (std::int64_t c = 0; c < kk; ++c) {
      truth.weights(r, c) = centered_normal(hyper.weight_variance, stream);
    }
  }
  truth.factors.resize(kk, n_cols);
  for (std::int64_t r = 0; r < kk; ++r) {
    for (std::int64_t c = 0; c < n_cols; ++c) {
      truth.factors(r, c) = centered_normal(
          hyper.factor_variances[static_cast<std::size_t>(c)], stream);
    }
  }

  SyntheticData out;
  out.x.resize(n_rows, n_cols);
  Eigen::MatrixXd signal = Eigen::MatrixXd::Zero(n_rows, n_cols);
  if (kk > 0) signal = gated_weights(truth) * truth.factors;
  for (std::int64_t r = 0; r < n_rows; ++r) {
    for (std::int64_t c = 0; c < n_cols; ++c) {
      out.x(r, c) =
          signal(r, c) + centered_normal(hyper.noise_variance, stream);
    }
  }
  out.truth = std::move(truth);
  return out;
}

SyntheticData generate_synthetic_with_features(
    const BpParams& params, const FactorHyper& hyper, std::int64_t n_rows,
    std::int64_t n_cols, std::int64_t rounds, std::int64_t target_features,
    std::int64_t max_tries, RandomStream& stream) {
  if (target_features < 1) {
    throw std::domain_error("target feature count must be positive");
  }
  if (max_tries < 1) throw std::domain_error("try budget must be positive");
  for (std::int64_t t = 0; t < max_tries; ++t) {
    SyntheticData data =
        generate_synthetic(params, hyper, n_rows, n_cols, rounds, stream);
    if (data.truth.feature_count() == target_features) return data;
  }
  throw std::domain_error(
      "target feature count unreachable in the allotted tries");
}

std::vector<double> autocorrelation(std::span<const double> series,
                                    std::int64_t max_lag, bool* degenerate) {
  if (max_lag < 0) throw std::domain_error("maximum lag must be nonnegative");
  const std::int64_t n = static_cast<std::int64_t>(series.size());
  if (n <= max_lag) {
    throw std::domain_error("series shorter than the requested lags");
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  const bool flat = !(denom > 0.0);
  if (degenerate != nullptr) *degenerate = flat;
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 0.0);
  out[0] = 1.0;
  if (flat) return out;
  for (std::int64_t lag = 1; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::int64_t t = 0; t + lag < n; ++t) {
      acc += (series[static_cast<std::size_t>(t)] - mean) *
             (series[static_cast<std::size_t>(t + lag)] - mean);
    }
    out[static_cast<std::size_t>(lag)] = acc / denom;
  }
  return out;
}

}  // namespace bbp
