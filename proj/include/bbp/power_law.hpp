#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bbp/beta_process.hpp"

namespace bbp {

// Fitted or theoretical law y ~ constant * x^exponent.
struct AsymptoticLaw {
  double constant = 0.0;
  double exponent = 0.0;
  double residual_rms = 0.0;
};

enum class CurveKind {
  total_by_rows,         // expected distinct features after n rows
  total_by_time,         // Poissonized version at continuous time t
  multiplicity_by_rows,  // expected features seen exactly j times in n rows
  multiplicity_by_time,
};

struct MeanCurve {
  CurveKind kind = CurveKind::total_by_rows;
  std::int64_t multiplicity = 0;  // j, meaningful for the multiplicity kinds
  std::vector<double> abscissae;
  std::vector<double> values;
};

// Quadrature of the requested mean-count integral against the mass-scaled
// rate measure, relative error 1e-10 (throws bbp::numerical_error with the
// achieved tolerance if refinement stalls).
MeanCurve exact_mean_curve(const BpParams& params, CurveKind kind,
                           std::span<const double> points,
                           std::int64_t multiplicity = 0);

// Leading constant of the power laws; requires discount > 0.
double power_law_constant(const BpParams& params);

// Closed-form asymptotic feature counts (discount > 0).
double asymptotic_total_features(const BpParams& params, double n);
double asymptotic_multiplicity_features(const BpParams& params, double n,
                                        std::int64_t multiplicity);

// Zero-discount growth: exact mean total and the unit-mass closed form for
// the expected singleton count.
struct ClassicMeans {
  double total = 0.0;       // mass-scaled, grows like mass*conc*log(n)
  double singletons = 0.0;  // unit-mass closed form conc*n/(n-1+conc)
};
ClassicMeans classic_mean_features(const BpParams& params, std::int64_t n);

// Expected number of weights at or above x (discount > 0, x in (0,1]).
double ranked_weight_count(const BpParams& params, double x);

// Super-exponential tail bound on a Poisson-like row count: for threshold m
// above the expected total q, exp(m - q) * (q/m)^m.
double chernoff_tail(double expected_total, double threshold);

// Least squares on (log x, log y). With upper_half (the default) only points
// with x above the geometric midpoint of [min, max] enter the fit; callers
// that pre-select a window pass false.
AsymptoticLaw fit_power_law(std::span<const double> xs,
                            std::span<const double> ys,
                            bool upper_half = true);

}  // namespace bbp
