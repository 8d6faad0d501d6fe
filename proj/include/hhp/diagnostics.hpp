#pragma once

// Decay-rate estimators, blow-up functionals and brute-force oracles.
// Every function here is pure in its inputs.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hhp/field.hpp"
#include "hhp/slope.hpp"

namespace hhp {

/// Probe points for sup norms at time t: the origin and a fixed star of points
/// on Koranyi spheres of radius 0.25 .. 4, dilated by sqrt(t).
std::vector<GPoint> probe_targets(double t);

/// Log-spaced samples t_min .. t_max (count >= 2).
std::vector<double> log_spaced(double t_min, double t_max, int count);

struct DecayReport {
  SlopeFit fit;
  std::vector<double> times;
  std::vector<double> values;
  double expected_exponent = 0.0;
  bool inconclusive = false;
  std::string reason;

  /// Conclusive, r^2 >= 0.95 and |fit - expected| <= tol |expected| (absolute tol when expected is 0).
  bool matches(double tol = 0.1) const;
};

/// Box sized so that exp(-c |.|^2 / t) is resolved for t in [t_min, t_max] and
/// negligible at the boundary; used as the support of truncated constant data.
GridGeometry smoothing_probe_geometry(double t_min, double t_max, double c);

/// sup over probes of t^{-Q/2} sum exp(-c |s^-1 o eta|^2 / t) |s|^{-gamma} u0(s) dV.
/// c defaults to the fitted c_upper of the kernel bounds when c <= 0.
/// Throws ArgumentError unless 0 <= gamma < Q, NumericalError when all values are below 1e-14.
DecayReport hardy_smoothing_decay(double gamma, const GridField& u0, std::span<const double> times, double c = 0.0);

/// sup over probes of phi e^{t Delta} u0 for t > 1, with phi from w.
/// Throws ArgumentError if u0 exceeds (1 + |eta|)^{-Q} at a node or gamma < 0.
DecayReport henon_weighted_decay(const GridField& u0, const WeightSpec& w, std::span<const double> times);

struct FunctionalSample {
  double s = 0.0;
  double value = 0.0;
};

/// F(s) = s^{(2+gamma)/2} ||e^{s Delta} u0||^{p-1}. Requires 0 <= gamma < Q(p-1) and s > 0.
std::vector<FunctionalSample> fujita_functional(const GridField& u0, std::span<const double> s_values, double p,
                                                double gamma);
/// gamma = 0 form evaluated with the direct kernel quadrature instead of the table.
std::vector<FunctionalSample> fujita_functional_direct(const GridField& u0, std::span<const double> s_values,
                                                       double p);

/// (e^{sigma Delta} |.|^a)(eta) = sigma^{a/2} Psi_a(delta_{1/sqrt(sigma)} eta); Psi_a is tabulated once per a.
double heat_of_power(double a, double sigma, const GPoint& eta);

/// G(s) = sup over probes of [e^{s Delta} u0]^{p-1} int_0^s [e^{(s-t) Delta} |.|^{-gamma/(p-1)}]^{1-p} dt,
/// with (s-t)^{gamma/2} integrated exactly on each subinterval. Requires -2 < gamma < 0.
std::vector<FunctionalSample> hardy_blowup_functional(const GridField& u0, std::span<const double> s_values,
                                                      double p, double gamma);

/// Power-law fit of a functional trajectory.
SlopeFit fit_functional(std::span<const FunctionalSample> samples);

struct MassGrowth {
  std::vector<std::pair<double, double>> samples;  // (t, ball mass)
  LinearFit fit;                                   // mass against ln t
  bool inconclusive = false;
  std::string reason;
};

/// Mass of u(., t+1) over the Koranyi ball of radius sqrt(t+1), with u linearly
/// interpolated in time along the path. Times whose t+1 is past the path end are skipped.
MassGrowth critical_mass_growth(std::span<const std::pair<double, GridField>> path, std::span<const double> t_values);

struct RearrangementResult {
  double argmax = 0.0;  // |x| of the lattice argmax
  std::vector<double> location;
  double margin = 0.0;  // G(0) - max_{x != 0} G(x)
  double g0 = 0.0;
};

/// G(x) = int_{R^dim} exp(-c |x-y|^k / t) (delta + |y|)^m dy on a lattice of x.
/// Throws ArgumentError on m > 0, non-positive c, k or t, dim outside {1, 2}, or delta = 0 with m <= -dim.
RearrangementResult rearrangement_max_at_origin(double m, double c, double k, double delta, double t, int dim);

struct ReverseHolder {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

/// sum w |f g| >= (sum w |f|^{1/p})^p (sum w |g|^{-1/(p-1)})^{-(p-1)}.
ReverseHolder reverse_holder_check(std::span<const double> f, std::span<const double> g,
                                   std::span<const double> weights, double p);

struct ReverseHolderSuite {
  int trials = 0;
  int violations = 0;
  double worst_ratio = 0.0;  // min lhs / rhs
};
ReverseHolderSuite reverse_holder_random(double p, int trials, std::uint64_t seed);

/// (t, t^{Q/2} ||e^{t Delta} U0||) with the sup over probe targets.
std::vector<FunctionalSample> tq2_contradiction_probe(const GridField& u_restart, std::span<const double> t_values);

struct DiagnosticRow {
  std::string functional;
  std::string parameters;
  double fitted = 0.0;
  double expected = 0.0;
  double r_squared = 0.0;
  std::string verdict;
};

void write_diagnostics_csv(std::ostream& os, std::span<const DiagnosticRow> rows);

}  // namespace hhp
