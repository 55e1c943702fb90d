#include "bbp/beta_process.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "bbp/special.hpp"

namespace bbp {

void validate(const BpParams& params) {
  if (!(params.mass > 0.0) || !std::isfinite(params.mass))
    throw std::domain_error("mass must be positive and finite");
  if (!(params.discount >= 0.0) || !(params.discount < 1.0))
    throw std::domain_error("discount must lie in [0, 1)");
  if (!(params.concentration > -params.discount) ||
      !std::isfinite(params.concentration))
    throw std::domain_error("concentration must exceed -discount");
}

double levy_density(double u, const BpParams& params) {
  validate(params);
  if (!(u > 0.0) || !(u < 1.0))
    throw std::domain_error("levy_density requires u in (0, 1)");
  const double a = params.discount;
  const double t = params.concentration;
  const double log_c = log_gamma(1.0 + t) - log_gamma(1.0 - a) - log_gamma(t + a);
  return std::exp(log_c + (-1.0 - a) * std::log(u) +
                  (t + a - 1.0) * std::log1p(-u));
}

DistSpec stick_distribution(const BpParams& params, std::int64_t level) {
  validate(params);
  if (level < 1) throw std::domain_error("stick level must be >= 1");
  return DistSpec::beta(1.0 - params.discount,
                        params.concentration +
                            static_cast<double>(level) * params.discount);
}

double BetaProcessDraw::total_mass() const {
  double acc = 0.0;
  for (double w : weights) acc += w;
  return acc;
}

BetaProcessDraw stick_break(const BpParams& params, std::int64_t rounds,
                            RandomStream& stream, StickTrace* trace) {
  validate(params);
  if (rounds < 1) throw std::domain_error("stick_break requires rounds >= 1");

  BetaProcessDraw draw;
  draw.truncation_rounds = rounds;
  const double a = 1.0 - params.discount;
  for (std::int64_t i = 1; i <= rounds; ++i) {
    const std::int64_t atoms = sample_poisson(params.mass, stream);
    for (std::int64_t j = 0; j < atoms; ++j) {
      double weight = 1.0;
      std::vector<double> levels;
      if (trace) levels.reserve(static_cast<std::size_t>(i));
      for (std::int64_t l = 1; l <= i; ++l) {
        const double b =
            params.concentration + static_cast<double>(l) * params.discount;
        const double v = sample_beta(a, b, stream);
        if (trace) levels.push_back(v);
        weight *= (l == i) ? v : (1.0 - v);
      }
      // Deep rounds can underflow the product; keep the weight inside (0,1).
      if (!(weight > 0.0)) weight = std::numeric_limits<double>::denorm_min();
      draw.weights.push_back(weight);
      draw.rounds.push_back(i);
      draw.atom_labels.push_back(stream.next_uniform());
      if (trace) trace->proportions.push_back(std::move(levels));
    }
  }
  return draw;
}

BetaProcessDraw stick_frequency_chain(const BpParams& params,
                                      std::int64_t rounds,
                                      RandomStream& stream) {
  validate(params);
  if (rounds < 1)
    throw std::domain_error("stick_frequency_chain requires rounds >= 1");

  BetaProcessDraw draw;
  draw.truncation_rounds = rounds;
  draw.weights.reserve(static_cast<std::size_t>(rounds));
  const double a = 1.0 - params.discount;
  double survive = 1.0;
  for (std::int64_t l = 1; l <= rounds; ++l) {
    const double b =
        params.concentration + static_cast<double>(l) * params.discount;
    const double v = sample_beta(a, b, stream);
    double weight = survive * v;
    if (!(weight > 0.0)) weight = std::numeric_limits<double>::denorm_min();
    draw.weights.push_back(weight);
    draw.rounds.push_back(l);
    draw.atom_labels.push_back(stream.next_uniform());
    survive *= 1.0 - v;
  }
  return draw;
}

double size_biased_pick(const BetaProcessDraw& draw, RandomStream& stream) {
  if (draw.weights.empty())
    throw std::domain_error("size_biased_pick requires a nonempty draw");
  const double total = draw.total_mass();
  if (!(total > 0.0))
    throw std::domain_error("size_biased_pick requires positive total mass");
  const double target = stream.next_uniform() * total;
  double acc = 0.0;
  for (double w : draw.weights) {
    acc += w;
    if (acc >= target) return w;
  }
  return draw.weights.back();
}

double residual_mass_estimate(const BpParams& params, std::int64_t rounds,
                              std::int64_t replicates, RandomStream& stream) {
  validate(params);
  if (rounds < 1) throw std::domain_error("rounds must be >= 1");
  if (replicates < 1) throw std::domain_error("replicates must be >= 1");

  // Each replicate gets its own substream so results do not depend on
  // scheduling; the nonce keeps repeated calls on one parent independent.
  RandomStream nursery(stream.seed(), stream.next_u64());
  double acc = 0.0;
  for (std::int64_t r = 0; r < replicates; ++r) {
    RandomStream child = nursery.split_child(static_cast<std::uint64_t>(r));
    acc += stick_break(params, rounds, child).total_mass();
  }
  return params.mass - acc / static_cast<double>(replicates);
}

}  // namespace bbp
