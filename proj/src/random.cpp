#include "bbp/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace bbp {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : seed_(seed),
      stream_id_(stream_id),
      state_(mix64(mix64(seed + kGolden) ^ mix64(stream_id + 0xD1B54A32D192ED03ULL))) {}

std::uint64_t RandomStream::next_u64() noexcept {
  state_ += kGolden;
  return mix64(state_);
}

double RandomStream::next_uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::next_standard_normal() noexcept {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_uniform() - 1.0;
    v = 2.0 * next_uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_normal_ = true;
  return u * f;
}

RandomStream RandomStream::split_child(std::uint64_t index) const noexcept {
  // Child identity depends only on (seed, stream_id, index).
  const std::uint64_t child_id =
      mix64(stream_id_ + kGolden * (index + 1) + 0x8CB92BA72F3D8DD7ULL);
  return RandomStream(seed_, child_id);
}

std::vector<RandomStream> RandomStream::split(std::size_t n) const {
  if (n == 0) throw std::domain_error("split requires n >= 1");
  std::vector<RandomStream> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(split_child(i));
  return out;
}

void DistSpec::validate() const {
  const bool f1 = std::isfinite(p1), f2 = std::isfinite(p2);
  switch (family) {
    case Family::beta:
      if (!f1 || !f2 || p1 <= 0.0 || p2 <= 0.0)
        throw std::domain_error("beta requires a > 0 and b > 0");
      return;
    case Family::gamma:
      if (!f1 || !f2 || p1 <= 0.0 || p2 <= 0.0)
        throw std::domain_error("gamma requires shape > 0 and rate > 0");
      return;
    case Family::poisson:
      if (!f1 || p1 < 0.0)
        throw std::domain_error("poisson requires lambda >= 0");
      return;
    case Family::bernoulli:
      if (!f1 || p1 < 0.0 || p1 > 1.0)
        throw std::domain_error("bernoulli requires p in [0, 1]");
      return;
    case Family::normal:
      if (!f1 || !f2 || p2 < 0.0)
        throw std::domain_error("normal requires finite mu and variance >= 0");
      return;
  }
  throw std::domain_error("unknown distribution family");
}

namespace {

// Marsaglia-Tsang for shape >= 1.
inline double gamma_mt(double shape, RandomStream& rs) noexcept {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rs.next_standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rs.next_uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double sample_gamma(double shape, double rate, RandomStream& rs) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    throw std::domain_error("gamma requires shape > 0 and rate > 0");
  if (shape < 1.0) {
    // Boosting keeps the rejection valid below shape 1:
    // G(a) =d G(a+1) * U^(1/a).
    const double g = gamma_mt(shape + 1.0, rs);
    const double u = rs.next_uniform_open();
    return g * std::exp(std::log(u) / shape) / rate;
  }
  return gamma_mt(shape, rs) / rate;
}

double sample_beta(double a, double b, RandomStream& rs) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::domain_error("beta requires a > 0 and b > 0");
  // Unit shapes invert the CDF directly; the deep stick loops live here.
  if (a == 1.0 && b == 1.0) return rs.next_uniform_open();
  if (a == 1.0 || b == 1.0) {
    const double u = rs.next_uniform_open();
    double v = (a == 1.0) ? -std::expm1(std::log(u) / b)
                          : std::exp(std::log(u) / a);
    if (!(v > 0.0)) v = std::numeric_limits<double>::denorm_min();
    if (v >= 1.0) v = 1.0 - 0x1.0p-53;
    return v;
  }
  const double x = sample_gamma(a, 1.0, rs);
  const double y = sample_gamma(b, 1.0, rs);
  double v = x / (x + y);
  // Keep samples strictly inside (0,1) even when one gamma underflows.
  if (!(v > 0.0)) v = std::numeric_limits<double>::denorm_min();
  if (v >= 1.0) v = 1.0 - 0x1.0p-53;
  return v;
}

std::int64_t sample_poisson(double lambda, RandomStream& rs) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::domain_error("poisson requires lambda >= 0");
  if (lambda == 0.0) return 0;
  if (lambda <= 30.0) {
    // Inversion by uniform products.
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= rs.next_uniform_open();
    } while (p > limit);
    return k - 1;
  }
  // Atkinson's logistic-envelope rejection; exact, no normal approximation.
  const double beta = std::numbers::pi / std::sqrt(3.0 * lambda);
  const double alpha = beta * lambda;
  const double k = std::log(0.767 - 3.36 / lambda) - lambda - std::log(beta);
  const double log_lambda = std::log(lambda);
  for (;;) {
    const double u = rs.next_uniform_open();
    const double x = (alpha - std::log((1.0 - u) / u)) / beta;
    const double n = std::floor(x + 0.5);
    if (n < 0.0) continue;
    const double v = rs.next_uniform_open();
    const double y = alpha - beta * x;
    const double t = 1.0 + std::exp(y);
    const double lhs = y + std::log(v / (t * t));
    const double rhs = k + n * log_lambda - std::lgamma(n + 1.0);
    if (lhs <= rhs) return static_cast<std::int64_t>(n);
  }
}

int sample_bernoulli(double p, RandomStream& rs) {
  if (!(p >= 0.0) || p > 1.0)
    throw std::domain_error("bernoulli requires p in [0, 1]");
  return rs.next_uniform() < p ? 1 : 0;
}

double sample_normal(double mu, double variance, RandomStream& rs) {
  if (!std::isfinite(mu) || !(variance >= 0.0) || !std::isfinite(variance))
    throw std::domain_error("normal requires finite mu and variance >= 0");
  if (variance == 0.0) return mu;
  return mu + std::sqrt(variance) * rs.next_standard_normal();
}

double draw(const DistSpec& spec, RandomStream& rs) {
  spec.validate();
  switch (spec.family) {
    case DistSpec::Family::beta:
      return sample_beta(spec.p1, spec.p2, rs);
    case DistSpec::Family::gamma:
      return sample_gamma(spec.p1, spec.p2, rs);
    case DistSpec::Family::poisson:
      return static_cast<double>(sample_poisson(spec.p1, rs));
    case DistSpec::Family::bernoulli:
      return static_cast<double>(sample_bernoulli(spec.p1, rs));
    case DistSpec::Family::normal:
      return sample_normal(spec.p1, spec.p2, rs);
  }
  throw std::domain_error("unknown distribution family");
}

}  // namespace bbp
