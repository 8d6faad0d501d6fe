#include "hhp/hgroup.hpp"

#include <numbers>
#include <string>

#include "hhp/errors.hpp"

namespace hhp {

namespace {

void require_same_dim(const GPoint& a, const GPoint& b) {
  if (a.x.size() != b.x.size() || a.y.size() != b.y.size() || a.x.size() != a.y.size() ||
      b.x.size() != b.y.size()) {
    throw ArgumentError("Heisenberg points of different dimension: " + std::to_string(a.x.size()) +
                        " vs " + std::to_string(b.x.size()));
  }
}

}  // namespace

GroupParams GroupParams::for_n(int n) {
  if (n < 1) throw ArgumentError("Heisenberg index must be positive, got " + std::to_string(n));
  return GroupParams{n, 2 * n + 2};
}

double GroupParams::unit_ball_volume() const {
  // |B_1| = pi^N B(N/2, 3/2) / Gamma(N), from integrating 2 sqrt(1 - |z|^4) over R^{2N}.
  const double nn = static_cast<double>(n);
  const double beta = std::exp(std::lgamma(nn / 2.0) + std::lgamma(1.5) - std::lgamma(nn / 2.0 + 1.5));
  return std::pow(std::numbers::pi, nn) * beta / std::tgamma(nn);
}

GPoint::GPoint(std::vector<double> x_, std::vector<double> y_, double tau_)
    : x(std::move(x_)), y(std::move(y_)), tau(tau_) {
  if (x.size() != y.size()) throw ArgumentError("x and y must have the same length");
}

GPoint GPoint::h1(double x, double y, double tau) { return GPoint({x}, {y}, tau); }

GPoint GPoint::identity(std::size_t n) {
  return GPoint(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0);
}

double GPoint::horizontal_sq() const {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i] + y[i] * y[i];
  return s;
}

bool GPoint::is_finite() const {
  if (!std::isfinite(tau)) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) return false;
  }
  return true;
}

GPoint compose(const GPoint& a, const GPoint& b) {
  require_same_dim(a, b);
  const std::size_t n = a.dim();
  GPoint out{std::vector<double>(n), std::vector<double>(n), 0.0};
  double twist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.x[i] = a.x[i] + b.x[i];
    out.y[i] = a.y[i] + b.y[i];
    twist += a.x[i] * b.y[i] - b.x[i] * a.y[i];
  }
  out.tau = a.tau + b.tau + 2.0 * twist;
  return out;
}

GPoint inverse(const GPoint& a) {
  GPoint out = a;
  for (auto& v : out.x) v = -v;
  for (auto& v : out.y) v = -v;
  out.tau = -out.tau;
  return out;
}

GPoint dilate(double r, const GPoint& a) {
  if (!(r > 0.0)) throw ArgumentError("dilation factor must be positive");
  GPoint out = a;
  for (auto& v : out.x) v *= r;
  for (auto& v : out.y) v *= r;
  out.tau *= r * r;
  return out;
}

double koranyi_norm(const GPoint& a) { return koranyi_from(a.horizontal_sq(), a.tau); }

double simple_norm(const GPoint& a) { return std::sqrt(a.horizontal_sq() + std::abs(a.tau)); }

double left_distance(const GPoint& a, const GPoint& b) {
  require_same_dim(a, b);
  return koranyi_norm(compose(inverse(b), a));
}

}  // namespace hhp
