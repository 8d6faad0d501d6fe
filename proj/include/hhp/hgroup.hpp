#pragma once

// Heisenberg group H^N: points (x, y, tau) in R^N x R^N x R with the law
//   (x,y,tau) o (x',y',tau') = (x+x', y+y', tau+tau' + 2(x.y' - x'.y)).

#include <cmath>
#include <cstddef>
#include <vector>

namespace hhp {

struct GroupParams {
  int n = 1;  // Heisenberg index N
  int q = 4;  // homogeneous dimension, always 2N+2

  static GroupParams for_n(int n);

  /// Volume of the Koranyi unit ball {|eta|_H < 1} in Lebesgue (= Haar) measure.
  double unit_ball_volume() const;
};

struct GPoint {
  std::vector<double> x;
  std::vector<double> y;
  double tau = 0.0;

  GPoint() = default;
  GPoint(std::vector<double> x_, std::vector<double> y_, double tau_);
  /// N = 1 convenience constructor.
  static GPoint h1(double x, double y, double tau);
  static GPoint identity(std::size_t n);

  std::size_t dim() const { return x.size(); }
  /// |x|^2 + |y|^2, the squared modulus of the horizontal 2N-vector.
  double horizontal_sq() const;
  bool is_finite() const;

  bool operator==(const GPoint&) const = default;
};

GPoint compose(const GPoint& a, const GPoint& b);
GPoint inverse(const GPoint& a);
GPoint dilate(double r, const GPoint& a);

double koranyi_norm(const GPoint& a);
/// (|x|^2 + |y|^2 + |tau|)^{1/2}; equivalent to the Koranyi norm.
double simple_norm(const GPoint& a);
/// d(a, b) = |b^{-1} o a|_H
double left_distance(const GPoint& a, const GPoint& b);

/// Koranyi norm from the horizontal squared modulus and tau.
inline double koranyi_from(double horizontal_sq, double tau) {
  const double s = horizontal_sq * horizontal_sq + tau * tau;
  return std::sqrt(std::sqrt(s));
}

}  // namespace hhp
