#include "hhp/slope.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "hhp/errors.hpp"

namespace hhp {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("line fit needs two equally long samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericalError("line fit: abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

SlopeFit fit_power_law(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw ArgumentError("power-law fit: length mismatch");
  if (times.size() < 8) throw NumericalError("power-law fit needs at least 8 samples, got " + std::to_string(times.size()));
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0) || !(values[i] > 1e-300) || !std::isfinite(values[i])) {
      throw NumericalError("power-law fit: non-positive or non-finite sample");
    }
    lx.push_back(std::log(times[i]));
    ly.push_back(std::log(values[i]));
  }
  const LinearFit line = fit_line(lx, ly);
  SlopeFit out;
  out.exponent = line.slope;
  out.prefactor = std::exp(line.intercept);
  out.r_squared = line.r_squared;
  out.t_range = {times.front(), times.back()};
  out.samples = static_cast<int>(times.size());
  return out;
}

}  // namespace hhp
