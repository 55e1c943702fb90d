#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace bbp {

// Counter-style 64-bit generator with cheap deterministic stream splitting.
// A stream is identified by (seed, stream_id); the internal state is a pure
// function of that pair, so equal ids replay equal sequences. split() derives
// children from the parent's identity only, never from its position, so
// splitting twice yields the same children.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  double next_uniform() noexcept;       // [0, 1)
  double next_uniform_open() noexcept;  // (0, 1)

  // Standard normal with a cached spare (polar method); the cache is part of
  // the stream state and replays deterministically.
  double next_standard_normal() noexcept;

  RandomStream split_child(std::uint64_t index) const noexcept;
  std::vector<RandomStream> split(std::size_t n) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

// One-dimensional sampling spec. Families and their parameters:
//   beta(a, b)            a > 0, b > 0
//   gamma(shape, rate)    shape > 0, rate > 0
//   poisson(lambda)       lambda >= 0
//   bernoulli(p)          p in [0, 1]
//   normal(mu, variance)  variance >= 0
struct DistSpec {
  enum class Family { beta, gamma, poisson, bernoulli, normal };

  Family family;
  double p1 = 0.0;
  double p2 = 0.0;

  static DistSpec beta(double a, double b) { return {Family::beta, a, b}; }
  static DistSpec gamma(double shape, double rate) {
    return {Family::gamma, shape, rate};
  }
  static DistSpec poisson(double lambda) {
    return {Family::poisson, lambda, 0.0};
  }
  static DistSpec bernoulli(double p) {
    return {Family::bernoulli, p, 0.0};
  }
  static DistSpec normal(double mu, double variance) {
    return {Family::normal, mu, variance};
  }

  void validate() const;  // throws std::domain_error
};

// Draws one variate; counts come back as exact small integers in a double.
double draw(const DistSpec& spec, RandomStream& rs);

// Typed samplers used on hot paths (draw() dispatches to these).
double sample_beta(double a, double b, RandomStream& rs);
double sample_gamma(double shape, double rate, RandomStream& rs);
std::int64_t sample_poisson(double lambda, RandomStream& rs);
int sample_bernoulli(double p, RandomStream& rs);
double sample_normal(double mu, double variance, RandomStream& rs);

}  // namespace bbp
