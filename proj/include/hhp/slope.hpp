#pragma once

#include <span>
#include <utility>

namespace hhp {

/// Power-law fit value ~ prefactor * t^exponent by least squares on logs.
struct SlopeFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> t_range{0.0, 0.0};
  int samples = 0;

  /// r^2 below 0.95 marks the fit inconclusive.
  bool conclusive() const { return r_squared >= 0.95; }
};

/// Fits log(values) against log(times). Needs at least 8 strictly positive samples;
/// throws NumericalError otherwise.
SlopeFit fit_power_law(std::span<const double> times, std::span<const double> values);

/// Ordinary least squares y = a + b x; returns (a, b, r^2).
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace hhp
