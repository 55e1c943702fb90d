#include "bbp/power_law.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbp/errors.hpp"
#include "bbp/special.hpp"

namespace bbp {

namespace {

// 15-point Kronrod extension of 7-point Gauss (positive abscissae).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a, b, estimate, error;
  bool operator<(const Interval& o) const { return error < o.error; }
};

template <typename F>
Interval gk15(const F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  for (int j = 0; j < 3; ++j) {
    const int idx = 2 * j + 1;
    const double absc = half * kXgk[idx];
    const double fsum = f(centre - absc) + f(centre + absc);
    resg += kWg[j] * fsum;
    resk += kWgk[idx] * fsum;
  }
  for (int idx = 0; idx < 8; idx += 2) {
    const double absc = half * kXgk[idx];
    const double fsum = f(centre - absc) + f(centre + absc);
    resk += kWgk[idx] * fsum;
  }
  return {a, b, resk * half, std::fabs((resk - resg) * half)};
}

// Globally adaptive bisection on the worst interval.
double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double rel_tol) {
  if (!(b > a)) return 0.0;
  constexpr std::size_t kMaxIntervals = 4096;
  std::vector<Interval> heap;
  heap.push_back(gk15(f, a, b));
  double total = heap[0].estimate, err = heap[0].error;
  while (err > rel_tol * std::max(std::fabs(total), 1e-300)) {
    if (heap.size() >= kMaxIntervals)
      throw numerical_error(
          "quadrature refinement limit reached; achieved relative error " +
          std::to_string(err / std::max(std::fabs(total), 1e-300)) +
          " vs target " + std::to_string(rel_tol));
    std::pop_heap(heap.begin(), heap.end());
    const Interval worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    total -= worst.estimate;
    err -= worst.error;
    for (const Interval& piece :
         {gk15(f, worst.a, mid), gk15(f, mid, worst.b)}) {
      total += piece.estimate;
      err += piece.error;
      heap.push_back(piece);
      std::push_heap(heap.begin(), heap.end());
    }
  }
  return total;
}

// One mean-count integral against the mass-scaled rate measure. The kernel is
// supplied three ways so both endpoints stay stable:
//   near_zero(u):  kernel(u)/u, bounded as u -> 0
//   middle(u):     kernel(u) on [1/2, 1)
// expressed with z = 1-u for the right piece via middle_z.
struct Kernel {
  std::function<double(double)> over_u;    // kernel(u)/u for the left piece
  std::function<double(double)> from_z;    // kernel(1-z) for the right piece
};

double integrate_kernel(const BpParams& p, const Kernel& kernel) {
  const double a = p.discount;
  const double t = p.concentration;
  const double log_norm =
      log_gamma(1.0 + t) - log_gamma(1.0 - a) - log_gamma(t + a);
  const double scale = p.mass * std::exp(log_norm);
  const double pa = 1.0 - a;
  const double pb = t + a;

  // Left: u = s^(1/pa) maps u^(-a)du to ds/pa, so the u^(-1-a) singularity
  // cancels against the kernel's leading power exactly.
  const double left = adaptive_gk(
      [&](double s) {
        const double u = s > 0.0 ? std::exp(std::log(s) / pa) : 0.0;
        return kernel.over_u(u) * std::exp((pb - 1.0) * std::log1p(-u)) / pa;
      },
      0.0, std::pow(0.5, pa), 1e-11);

  // Right: 1-u = w^(1/pb) maps (1-u)^(pb-1)du to dw/pb.
  const double right = adaptive_gk(
      [&](double w) {
        const double z = w > 0.0 ? std::exp(std::log(w) / pb) : 0.0;
        return kernel.from_z(z) * std::exp((-1.0 - a) * std::log1p(-z)) / pb;
      },
      0.0, std::pow(0.5, pb), 1e-11);

  return scale * (left + right);
}

Kernel make_kernel(CurveKind kind, double point, std::int64_t j) {
  switch (kind) {
    case CurveKind::total_by_rows:
      return {[n = point](double u) {
                return u > 0.0 ? -std::expm1(n * std::log1p(-u)) / u : n;
              },
              [n = point](double z) {
                return z > 0.0 ? -std::expm1(n * std::log(z)) : 1.0;
              }};
    case CurveKind::total_by_time:
      return {[t = point](double u) {
                return u > 0.0 ? -std::expm1(-t * u) / u : t;
              },
              [t = point](double z) { return -std::expm1(-t * (1.0 - z)); }};
    case CurveKind::multiplicity_by_rows: {
      // log of the binomial coefficient for real row count n.
      const double n = point;
      const double jd = static_cast<double>(j);
      const double lc =
          log_gamma(n + 1.0) - log_gamma(jd + 1.0) - log_gamma(n - jd + 1.0);
      return {[=](double u) {
                if (u <= 0.0) return j == 1 ? n : 0.0;
                return std::exp(lc + (jd - 1.0) * std::log(u) +
                                (n - jd) * std::log1p(-u));
              },
              [=](double z) {
                if (z <= 0.0) return n == jd ? 1.0 : 0.0;
                return std::exp(lc + jd * std::log1p(-z) +
                                (n - jd) * std::log(z));
              }};
    }
    case CurveKind::multiplicity_by_time: {
      const double t = point;
      const double jd = static_cast<double>(j);
      const double lf = log_gamma(jd + 1.0);
      return {[=](double u) {
                if (u <= 0.0) return j == 1 ? t : 0.0;
                return std::exp(-t * u + jd * std::log(t * u) - lf) / u;
              },
              [=](double z) {
                const double u = 1.0 - z;
                return std::exp(-t * u + jd * std::log(t * u) - lf);
              }};
    }
  }
  throw std::domain_error("unknown curve kind");
}

bool needs_multiplicity(CurveKind kind) {
  return kind == CurveKind::multiplicity_by_rows ||
         kind == CurveKind::multiplicity_by_time;
}

}  // namespace

MeanCurve exact_mean_curve(const BpParams& params, CurveKind kind,
                           std::span<const double> points,
                           std::int64_t multiplicity) {
  validate(params);
  if (needs_multiplicity(kind) && multiplicity < 1)
    throw std::domain_error("multiplicity must be >= 1 for multiplicity curves");
  MeanCurve curve;
  curve.kind = kind;
  curve.multiplicity = needs_multiplicity(kind) ? multiplicity : 0;
  curve.abscissae.assign(points.begin(), points.end());
  curve.values.reserve(points.size());
  for (double point : points) {
    if (!(point > 0.0))
      throw std::domain_error("curve points must be positive");
    if (kind == CurveKind::multiplicity_by_rows &&
        point < static_cast<double>(multiplicity)) {
      curve.values.push_back(0.0);  // fewer rows than required successes
      continue;
    }
    curve.values.push_back(
        integrate_kernel(params, make_kernel(kind, point, multiplicity)));
  }
  return curve;
}

double power_law_constant(const BpParams& params) {
  validate(params);
  if (!(params.discount > 0.0))
    throw std::domain_error("power-law constant requires positive discount");
  const double a = params.discount;
  const double t = params.concentration;
  return params.mass / a *
         std::exp(log_gamma(1.0 + t) - log_gamma(1.0 - a) - log_gamma(t + a));
}

double asymptotic_total_features(const BpParams& params, double n) {
  if (!(n >= 1.0)) throw std::domain_error("n must be >= 1");
  const double c = power_law_constant(params);
  return std::exp(log_gamma(1.0 - params.discount)) * c *
         std::pow(n, params.discount);
}

double asymptotic_multiplicity_features(const BpParams& params, double n,
                                        std::int64_t multiplicity) {
  if (!(n >= 1.0)) throw std::domain_error("n must be >= 1");
  if (multiplicity < 1) throw std::domain_error("multiplicity must be >= 1");
  const double c = power_law_constant(params);
  const double jd = static_cast<double>(multiplicity);
  return params.discount *
         std::exp(log_gamma(jd - params.discount) - log_gamma(jd + 1.0)) * c *
         std::pow(n, params.discount);
}

ClassicMeans classic_mean_features(const BpParams& params, std::int64_t n) {
  validate(params);
  if (params.discount != 0.0)
    throw std::domain_error("classic means require zero discount");
  if (n < 1) throw std::domain_error("n must be >= 1");
  const double t = params.concentration;
  double acc = 0.0;
  for (std::int64_t k = 0; k < n; ++k) acc += 1.0 / (static_cast<double>(k) + t);
  return {params.mass * t * acc,
          t * static_cast<double>(n) / (static_cast<double>(n) - 1.0 + t)};
}

double ranked_weight_count(const BpParams& params, double x) {
  const double c = power_law_constant(params);
  if (!(x > 0.0) || !(x <= 1.0))
    throw std::domain_error("threshold must lie in (0, 1]");
  return c * std::exp(-params.discount * std::log(x));
}

double chernoff_tail(double expected_total, double threshold) {
  if (!(expected_total > 0.0))
    throw std::domain_error("expected total must be positive");
  if (!(threshold > expected_total))
    throw std::domain_error("threshold must exceed the expected total");
  return std::exp(threshold - expected_total +
                  threshold * std::log(expected_total / threshold));
}

AsymptoticLaw fit_power_law(std::span<const double> xs,
                            std::span<const double> ys, bool upper_half) {
  if (xs.size() != ys.size())
    throw std::domain_error("fit requires equal-length series");
  if (xs.size() < 3) throw std::domain_error("fit requires at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::domain_error("fit requires positive values");

  std::vector<std::size_t> keep;
  if (upper_half) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double cut = std::sqrt(*lo * *hi);
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (xs[i] >= cut) keep.push_back(i);
  }
  if (keep.size() < 3) {
    keep.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) keep[i] = i;
  }

  double mx = 0.0, my = 0.0;
  for (std::size_t i : keep) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(keep.size());
  my /= static_cast<double>(keep.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i : keep) {
    const double dx = std::log(xs[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(ys[i]) - my);
  }
  if (!(sxx > 0.0)) throw std::domain_error("fit requires distinct abscissae");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i : keep) {
    const double r = std::log(ys[i]) - intercept - slope * std::log(xs[i]);
    rss += r * r;
  }
  return {std::exp(intercept), slope,
          std::sqrt(rss / static_cast<double>(keep.size()))};
}

}  // namespace bbp
