#pragma once

// Heat kernel of the sub-Laplacian on H^N.
//
// For the group law with the factor 2 in the tau component the kernel is
//
//   h_t(x, tau) = (8 pi)^{-1} (4 pi)^{-N}
//                 * Int_R (l / sinh tl)^N exp(-|x|^2 l / (4 tanh tl)) cos(l tau / 4) dl,
//
// where |x| is the modulus of the horizontal 2N-vector. It integrates to one
// and solves (d_t - Delta_H) h = 0 for
//   Delta_H = sum(d_xx + d_yy) + 4(|x|^2 + |y|^2) d_tautau + 4 sum(y d_xtau - x d_ytau).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hhp/hgroup.hpp"

namespace hhp {

enum class QuadratureRule { trapezoid, gauss_legendre_panels };

struct KernelQuadratureSpec {
  double lambda_max = 40.0;
  int n_lambda = 1024;
  QuadratureRule rule = QuadratureRule::trapezoid;

  /// Truncation from the hyperbolic decay (t l / sinh t l)^N <= 1e-16 and a node
  /// count giving at least eight nodes per period of cos(l tau_max / 4).
  static KernelQuadratureSpec automatic(int n, double t, double tau_max,
                                        QuadratureRule rule = QuadratureRule::trapezoid);

  /// Throws ConfigError unless the integrand at lambda_max is below 1e-14 of its
  /// value at lambda = 0 for this (t, |x|^2).
  void validate(int n, double t, double horizontal_sq) const;
};

/// Two-sided Gaussian envelope
///   c_lower t^{-Q/2} exp(-C_lower |eta|^2/t) <= h_t(eta) <= C_upper t^{-Q/2} exp(-c_upper |eta|^2/t).
/// Constants are fitted empirically, not sharp.
struct KernelBounds {
  double c_lower = 0.0;
  double C_lower = 0.0;
  double c_upper = 0.0;
  double C_upper = 0.0;
  int q = 4;

  double upper(double t, double koranyi) const;
  double lower(double t, double koranyi) const;
  /// Mass of the upper envelope outside the Koranyi ball of the given radius.
  double upper_mass_outside(double t, double radius, const GroupParams& g) const;
};

/// Raw quadrature sum for h_t at (|x|^2, tau); no convergence check.
double kernel_quadrature(int n, double t, double horizontal_sq, double tau,
                         const KernelQuadratureSpec& quad);

/// h_t(p) with the given rule; doubles n_lambda once and throws NumericalError
/// if the value moves by more than 1e-8 relative.
double eval_kernel(double t, const GPoint& p, const KernelQuadratureSpec& quad);
/// h_t(p) with KernelQuadratureSpec::automatic.
double eval_kernel(double t, const GPoint& p);

/// h_t(0) = t^{-Q/2} h_1(0); h_1(0) = 1/64 for N = 1.
double kernel_at_origin(int n, double t);

struct KernelLookup {
  double value = 0.0;
  bool extrapolated = false;
};

class KernelTable {
 public:
  KernelTable(double t, int n, std::vector<double> radial_nodes, std::vector<double> tau_nodes,
              std::vector<double> values, KernelQuadratureSpec quad);

  double t() const { return t_; }
  int n() const { return n_; }
  const std::vector<double>& radial_nodes() const { return radial_; }
  const std::vector<double>& tau_nodes() const { return tau_; }
  const std::vector<double>& values() const { return values_; }
  const KernelQuadratureSpec& quad() const { return quad_; }
  double at(std::size_t i_radial, std::size_t i_tau) const { return values_[i_radial * tau_.size() + i_tau]; }

  double radial_max() const { return radial_.back(); }
  double tau_max() const { return tau_.back(); }
  /// True when only tau >= 0 is stored; lookups use |tau|.
  bool half_tau() const { return half_tau_; }

  /// Largest magnitude of a negative quadrature value that was clamped to zero.
  double clamped_magnitude() const { return clamped_; }
  bool monotonicity_violation() const { return monotone_violation_; }

  void set_bounds(const KernelBounds& b) { bounds_ = b; }
  const std::optional<KernelBounds>& bounds() const { return bounds_; }

  /// Bilinear lookup by horizontal modulus and tau, no hull handling.
  /// Caller guarantees r in [r_min, r_max] and tau inside the stored range.
  double lookup_unchecked(double r, double tau) const;

  /// Same table at another time through h_s(r, tau) = (t/s)^{Q/2} h_t(r sqrt(t/s), tau t/s).
  KernelTable rescaled(double s) const;

  void write_text(std::ostream& os) const;

 private:
  friend KernelTable build_table(double, std::span<const double>, std::span<const double>,
                                 const KernelQuadratureSpec&, int);

  double t_ = 1.0;
  int n_ = 1;
  std::vector<double> radial_;
  std::vector<double> tau_;
  std::vector<double> values_;
  KernelQuadratureSpec quad_;
  std::optional<KernelBounds> bounds_;
  bool half_tau_ = true;
  bool radial_uniform_ = false;
  bool tau_uniform_ = false;
  double clamped_ = 0.0;
  bool monotone_violation_ = false;

  void finalize();
};

KernelTable build_table(double t, std::span<const double> radial_nodes, std::span<const double> tau_nodes,
                        const KernelQuadratureSpec& quad, int n = 1);

/// Bilinear interpolation in (|x|, tau); outside the hull returns the upper
/// envelope and sets the extrapolation flag.
KernelLookup interpolate(const KernelTable& table, const GPoint& p);

/// Shared h_1 table on r in [0, 11], tau in [0, 121] with fitted bounds attached.
std::shared_ptr<const KernelTable> master_table(int n = 1);

/// Tabulated h_t by rescaling the master table.
KernelTable table_for_time(double t, int n = 1);

struct KernelSample {
  double t = 1.0;
  GPoint eta;
};

using KernelFunction = std::function<double(double, const GPoint&)>;

/// Deterministic samples with |eta|^2/t spread over [0, rho2_max].
std::vector<KernelSample> make_bound_samples(std::size_t count, std::uint64_t seed, double rho2_max = 20.0,
                                             int n = 1);

KernelBounds fit_bounds(std::span<const KernelSample> samples, const KernelFunction& kernel, int n = 1);
KernelBounds fit_bounds(std::span<const KernelSample> samples, int n = 1);

/// Fitted bounds for the real kernel, computed once per N.
const KernelBounds& default_bounds(int n = 1);

struct NormalizationBox {
  double half_width_xy = 9.0;
  double half_width_tau = 81.0;
};

struct NormalizationResolution {
  int n_xy = 96;
  int n_tau = 480;
};

/// Midpoint Riemann sum of h_t (N = 1) over the box, using the tabulated kernel.
/// Throws ConfigError on a zero resolution or when the upper-envelope mass
/// outside the box exceeds 1e-4.
double check_normalization(double t, const NormalizationBox& box, const NormalizationResolution& res);

/// Box whose size follows the dilation: half widths 9.5 sqrt(t) and 85 t.
NormalizationBox scaled_box(double t);

/// max over samples of |h_t(xi) - t^{-Q/2} h_1(delta_{t^{-1/2}} xi)| / |h_t(xi)|.
double check_scaling(double t, std::span<const GPoint> samples);

struct ResidualSteps {
  double space = 1e-2;
  double tau = 1e-2;
  double time = 1e-3;

  /// Steps at time t: space scales with sqrt(t), tau and time with t.
  static ResidualSteps at_time(double t);
  ResidualSteps halved() const { return {space / 2, tau / 2, time / 2}; }
};

/// d_t h_t(p) - (Delta_H h_t)(p) by central differences of the quadrature.
double heat_equation_residual(double t, const GPoint& p, const ResidualSteps& steps);

}  // namespace hhp
