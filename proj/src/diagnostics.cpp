#include "hhp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hhp/errors.hpp"
#include "hhp/kernel.hpp"

namespace hhp {

namespace {

constexpr double kQ = 4.0;  // homogeneous dimension of H^1

GPoint sphere_point(double rho, double theta, double phase) {
  const double r = rho * std::sqrt(std::cos(theta));
  return GPoint::h1(r * std::cos(phase), r * std::sin(phase), rho * rho * std::sin(theta));
}

// Sup over the probe targets of the heat flow of u at time t, via the tabulated kernel.
std::vector<double> heat_at_probes(const GridField& u, double t, const std::vector<GPoint>& targets) {
  const KernelTable table = table_for_time(t);
  return convolve_points(u, table, targets);
}

void require_positive_times(std::span<const double> times, const char* who) {
  if (times.empty()) throw ArgumentError(std::string(who) + ": no sample times");
  for (double t : times) {
    if (!(t > 0.0)) throw ArgumentError(std::string(who) + ": sample times must be positive");
  }
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
}

DecayReport finish_fit(DecayReport rep) {
  const double peak = *std::max_element(rep.values.begin(), rep.values.end());
  if (!(peak > 1e-14)) throw NumericalError("decay fit is degenerate: every sample is below 1e-14");
  rep.fit = fit_power_law(rep.times, rep.values);
  if (!rep.fit.conclusive()) {
    rep.inconclusive = true;
    std::ostringstream msg;
    msg << "r^2 = " << rep.fit.r_squared << " below 0.95";
    rep.reason = msg.str();
  }
  return rep;
}

}  // namespace

std::vector<GPoint> probe_targets(double t) {
  if (!(t > 0.0)) throw ArgumentError("probe targets need t > 0");
  const double s = std::sqrt(t);
  std::vector<GPoint> out{GPoint::h1(0.0, 0.0, 0.0)};
  const double pi = std::numbers::pi;
  for (double rho : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
    for (double theta : {0.0, pi / 6, pi / 3, pi / 2, -pi / 3}) {
      const double phase = theta == pi / 6 ? pi / 4 : 0.0;
      out.push_back(dilate(s, sphere_point(rho, theta, phase)));
    }
  }
  return out;
}

std::vector<double> log_spaced(double t_min, double t_max, int count) {
  if (!(t_min > 0.0) || !(t_max > t_min) || count < 2) throw ArgumentError("log_spaced needs 0 < t_min < t_max, count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log(t_min), b = std::log(t_max);
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
  out.back() = t_max;
  return out;
}

bool DecayReport::matches(double tol) const {
  if (inconclusive || !fit.conclusive()) return false;
  if (expected_exponent == 0.0) return std::abs(fit.exponent) <= tol;
  return std::abs(fit.exponent - expected_exponent) <= tol * std::abs(expected_exponent);
}

// ---------------------------------------------------------------------------
// Smoothing of singular weights

GridGeometry smoothing_probe_geometry(double t_min, double t_max, double c) {
  if (!(t_min > 0.0) || !(t_max > t_min) || !(c > 0.0)) throw ArgumentError("smoothing probe geometry needs 0 < t_min < t_max, c > 0");
  GridGeometry g;
  g.half_width_xy = std::sqrt(8.0 * t_max / c);
  g.half_width_tau = 8.0 * t_max / c;
  const double h = std::sqrt(t_min / c) / 3.0;
  const double h_tau = t_min / c / 3.0;
  auto even = [](double v) { return 2 * static_cast<int>(std::ceil(v / 2.0)); };
  g.n_xy = even(2.0 * g.half_width_xy / h);
  g.n_tau = even(2.0 * g.half_width_tau / h_tau);
  g.offset = true;
  return g;
}

DecayReport hardy_smoothing_decay(double gamma, const GridField& u0, std::span<const double> times, double c) {
  if (!(gamma >= 0.0 && gamma < kQ)) throw ArgumentError("smoothing decay needs 0 <= gamma < Q");
  require_positive_times(times, "hardy_smoothing_decay");
  u0.require_clean("hardy_smoothing_decay");
  if (u0.min_value() < 0.0) throw ArgumentError("hardy_smoothing_decay: u0 must be nonnegative");
  if (!(c > 0.0)) c = default_bounds(1).c_upper;

  const GridGeometry& g = u0.geom();
  struct Source {
    double x, y, tau, value;
  };
  std::vector<Source> src;
  for (int ix = 0; ix < g.n_xy; ++ix) {
    for (int iy = 0; iy < g.n_xy; ++iy) {
      for (int it = 0; it < g.n_tau; ++it) {
        const double v = u0.at(ix, iy, it);
        if (v == 0.0) continue;
        const double x = g.coord_xy(ix), y = g.coord_xy(iy), tau = g.coord_tau(it);
        const double w = gamma == 0.0 ? 1.0 : std::pow(koranyi_from(x * x + y * y, tau), -gamma);
        src.push_back({x, y, tau, v * w});
      }
    }
  }

  DecayReport rep;
  rep.expected_exponent = -gamma / 2.0;
  for (double t : times) {
    const auto targets = probe_targets(t);
    std::vector<double> vals(targets.size());
    parallel_for(targets.size(), [&](std::size_t i) {
      const GPoint& e = targets[i];
      const double x = e.x[0], y = e.y[0];
      double sum = 0.0;
      for (const Source& s : src) {
        const double dx = x - s.x, dy = y - s.y;
        const double r2 = dx * dx + dy * dy;
        const double tau = e.tau - s.tau + 2.0 * (x * s.y - s.x * y);
        sum += s.value * std::exp(-c * std::sqrt(r2 * r2 + tau * tau) / t);
      }
      vals[i] = sum;
    });
    const double sup = *std::max_element(vals.begin(), vals.end());
    rep.times.push_back(t);
    rep.values.push_back(sup * g.cell_volume() * std::pow(t, -kQ / 2.0));
  }
  return finish_fit(std::move(rep));
}

DecayReport henon_weighted_decay(const GridField& u0, const WeightSpec& w, std::span<const double> times) {
  if (w.gamma < 0.0) throw ArgumentError("weighted decay needs gamma >= 0");
  if (!(w.p > 1.0)) throw ArgumentError("weighted decay needs p > 1");
  require_positive_times(times, "henon_weighted_decay");
  u0.require_clean("henon_weighted_decay");
  const auto norms = node_norms(u0.geom());
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const double v = u0.values()[i];
    if (v < 0.0 || v > std::pow(1.0 + norms[i], -kQ) * (1.0 + 1e-12)) {
      throw ArgumentError("henon_weighted_decay: u0 violates 0 <= u0 <= (1+|eta|)^{-Q}");
    }
  }
  const WeightSpec phi{w.gamma, w.p, WeightKind::phi};
  DecayReport rep;
  rep.expected_exponent = -kQ / 2.0 + w.gamma / (2.0 * (w.p - 1.0));
  for (double t : times) {
    if (!(t > 1.0)) throw ArgumentError("henon_weighted_decay: sample times must exceed 1");
    const auto targets = probe_targets(t);
    const auto vals = heat_at_probes(u0, t, targets);
    double sup = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) sup = std::max(sup, phi.at(targets[i]) * vals[i]);
    rep.times.push_back(t);
    rep.values.push_back(sup);
  }
  return finish_fit(std::move(rep));
}

// ---------------------------------------------------------------------------
// Blow-up functionals

std::vector<FunctionalSample> fujita_functional(const GridField& u0, std::span<const double> s_values, double p,
                                                double gamma) {
  if (!(p > 1.0)) throw ConfigError("Fujita functional needs p > 1");
  if (!(gamma >= 0.0 && gamma < kQ * (p - 1.0))) throw ConfigError("Fujita functional needs 0 <= gamma < Q(p-1)");
  require_positive_times(s_values, "fujita_functional");
  u0.require_clean("fujita_functional");
  std::vector<FunctionalSample> out;
  for (double s : s_values) {
    const auto vals = heat_at_probes(u0, s, probe_targets(s));
    const double sup = *std::max_element(vals.begin(), vals.end());
    out.push_back({s, std::pow(s, (2.0 + gamma) / 2.0) * std::pow(sup, p - 1.0)});
  }
  return out;
}

std::vector<FunctionalSample> fujita_functional_direct(const GridField& u0, std::span<const double> s_values,
                                                       double p) {
  require_positive_times(s_values, "fujita_functional_direct");
  u0.require_clean("fujita_functional_direct");
  const GridGeometry& g = u0.geom();
  std::vector<FunctionalSample> out;
  for (double s : s_values) {
    double sup = 0.0;
    for (const GPoint& e : probe_targets(s)) {
      double sum = 0.0;
      for (int ix = 0; ix < g.n_xy; ++ix) {
        for (int iy = 0; iy < g.n_xy; ++iy) {
          for (int it = 0; it < g.n_tau; ++it) {
            const double v = u0.at(ix, iy, it);
            if (v == 0.0) continue;
            sum += v * eval_kernel(s, compose(inverse(g.node(ix, iy, it)), e));
          }
        }
      }
      sup = std::max(sup, sum * g.cell_volume());
    }
    out.push_back({s, s * std::pow(sup, p - 1.0)});
  }
  return out;
}

namespace {

// Nodes and weights of a discrete probability measure approximating h_1 dV.
struct KernelMeasure {
  std::vector<double> x, y, tau, w;
};

const KernelMeasure& kernel_measure() {
  static std::once_flag once;
  static KernelMeasure m;
  std::call_once(once, [] {
    const auto table = master_table(1);
    const int nxy = 44, nt = 120;
    const double lx = 5.5, lt = 30.0;
    const double hx = 2 * lx / nxy, ht = 2 * lt / nt;
    double total = 0.0;
    for (int i = 0; i < nxy; ++i) {
      const double x = -lx + (i + 0.5) * hx;
      for (int j = 0; j < nxy; ++j) {
        const double y = -lx + (j + 0.5) * hx;
        for (int k = 0; k < nt; ++k) {
          const double tau = -lt + (k + 0.5) * ht;
          const double h = table->lookup_unchecked(std::sqrt(x * x + y * y), tau);
          if (h < 1e-14 * 0.015625) continue;
          m.x.push_back(x);
          m.y.push_back(y);
          m.tau.push_back(tau);
          m.w.push_back(h);
          total += h;
        }
      }
    }
    for (double& v : m.w) v /= total;
  });
  return m;
}

struct PsiTable {
  double a = 0.0;
  std::vector<double> rho, theta, scaled;  // Psi / (1 + rho^2)^{a/2}

  double psi_direct(double rho_v, double theta_v) const {
    const KernelMeasure& m = kernel_measure();
    const GPoint xi = sphere_point(rho_v, theta_v, 0.0);
    const double X = xi.x[0], T = xi.tau;
    double sum = 0.0;
    for (std::size_t i = 0; i < m.w.size(); ++i) {
      const double x = X + m.x[i], y = m.y[i];
      const double tau = T + m.tau[i] + 2.0 * X * m.y[i];
      const double r2 = x * x + y * y;
      sum += m.w[i] * std::pow(r2 * r2 + tau * tau, a / 4.0);
    }
    return sum;
  }

  double operator()(double rho_v, double theta_v) const {
    theta_v = std::abs(theta_v);
    const double envelope = std::pow(1.0 + rho_v * rho_v, a / 2.0);
    if (rho_v >= rho.back()) {
      const double edge = (*this)(rho.back() * (1.0 - 1e-12), theta_v) / std::pow(rho.back(), a);
      return edge * std::pow(rho_v, a);
    }
    auto ir = static_cast<std::size_t>(std::upper_bound(rho.begin(), rho.end(), rho_v) - rho.begin());
    ir = std::clamp<std::size_t>(ir, 1, rho.size() - 1);
    auto it = static_cast<std::size_t>(std::upper_bound(theta.begin(), theta.end(), theta_v) - theta.begin());
    it = std::clamp<std::size_t>(it, 1, theta.size() - 1);
    const double fr = (rho_v - rho[ir - 1]) / (rho[ir] - rho[ir - 1]);
    const double ft = (theta_v - theta[it - 1]) / (theta[it] - theta[it - 1]);
    auto at = [&](std::size_t i, std::size_t j) { return scaled[i * theta.size() + j]; };
    const double v = (1 - fr) * ((1 - ft) * at(ir - 1, it - 1) + ft * at(ir - 1, it)) +
                     fr * ((1 - ft) * at(ir, it - 1) + ft * at(ir, it));
    return v * envelope;
  }
};

const PsiTable& psi_table(double a) {
  static std::mutex mu;
  static std::map<double, std::unique_ptr<PsiTable>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[a];
  if (!slot) {
    auto tab = std::make_unique<PsiTable>();
    tab->a = a;
    tab->rho.push_back(0.0);
    for (double r = 0.05; r < 40.0; r *= 1.15) tab->rho.push_back(r);
    tab->rho.push_back(40.0);
    const int nth = 13;
    for (int j = 0; j < nth; ++j) tab->theta.push_back(std::numbers::pi / 2 * j / (nth - 1));
    tab->scaled.resize(tab->rho.size() * tab->theta.size());
    parallel_for(tab->rho.size(), [&](std::size_t i) {
      for (std::size_t j = 0; j < tab->theta.size(); ++j) {
        const double r = tab->rho[i];
        tab->scaled[i * tab->theta.size() + j] = tab->psi_direct(r, tab->theta[j]) / std::pow(1.0 + r * r, a / 2.0);
      }
    });
    slot = std::move(tab);
  }
  return *slot;
}

}  // namespace

double heat_of_power(double a, double sigma, const GPoint& eta) {
  if (!(a >= 0.0)) throw ArgumentError("heat_of_power needs a >= 0");
  if (!(sigma > 0.0)) throw ArgumentError("heat_of_power needs sigma > 0");
  if (eta.dim() != 1) throw ArgumentError("heat_of_power is implemented for N = 1");
  const double h2 = eta.x[0] * eta.x[0] + eta.y[0] * eta.y[0];
  const double rho = koranyi_from(h2, eta.tau) / std::sqrt(sigma);
  const double theta = rho == 0.0 ? 0.0 : std::atan2(std::abs(eta.tau), h2);
  return std::pow(sigma, a / 2.0) * psi_table(a)(rho, theta);
}

std::vector<FunctionalSample> hardy_blowup_functional(const GridField& u0, std::span<const double> s_values,
                                                      double p, double gamma) {
  if (!(gamma > -2.0 && gamma < 0.0)) throw ConfigError("Hardy blow-up functional needs -2 < gamma < 0");
  if (!(p > 1.0)) throw ConfigError("Hardy blow-up functional needs p > 1");
  require_positive_times(s_values, "hardy_blowup_functional");
  u0.require_clean("hardy_blowup_functional");
  const double a = -gamma / (p - 1.0);
  const double e = gamma / 2.0 + 1.0;
  std::vector<FunctionalSample> out;
  for (double s : s_values) {
    std::vector<double> sig{0.0};
    for (double v = s * 1e-6; v < s; v *= 1.1) sig.push_back(v);
    sig.push_back(s);
    const auto targets = probe_targets(s);
    const auto heat = heat_at_probes(u0, s, targets);
    double sup = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (heat[i] <= 0.0) continue;
      double integral = 0.0;
      for (std::size_t k = 0; k + 1 < sig.size(); ++k) {
        const double weight = (std::pow(sig[k + 1], e) - std::pow(sig[k], e)) / e;
        const double sample = sig[k] > 0.0 ? sig[k] : sig[k + 1];
        const double psi = heat_of_power(a, sample, targets[i]) / std::pow(sample, a / 2.0);
        integral += weight * std::pow(psi, 1.0 - p);
      }
      sup = std::max(sup, std::pow(heat[i], p - 1.0) * integral);
    }
    out.push_back({s, sup});
  }
  return out;
}

SlopeFit fit_functional(std::span<const FunctionalSample> samples) {
  std::vector<double> t, v;
  for (const auto& s : samples) {
    t.push_back(s.s);
    v.push_back(s.value);
  }
  return fit_power_law(t, v);
}

// ---------------------------------------------------------------------------
// Critical-case probes

MassGrowth critical_mass_growth(std::span<const std::pair<double, GridField>> path, std::span<const double> t_values) {
  MassGrowth out;
  if (path.empty()) throw ArgumentError("critical_mass_growth: empty path");
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (!(path[k].first > path[k - 1].first)) throw ArgumentError("critical_mass_growth: path times must increase");
  }
  const GridGeometry& g = path.front().second.geom();
  const double inscribed = std::min(g.half_width_xy, std::sqrt(g.half_width_tau));
  const auto norms = node_norms(g);
  for (double t : t_values) {
    if (!(t > 0.0)) throw ArgumentError("critical_mass_growth: t must be positive");
    const double target = t + 1.0;
    const double radius = std::sqrt(target);
    if (radius > inscribed) {
      out.inconclusive = true;
      out.reason = "the Koranyi ball leaves the box";
      continue;
    }
    if (target < path.front().first || target > path.back().first) continue;
    auto hi = std::lower_bound(path.begin(), path.end(), target,
                               [](const auto& node, double v) { return node.first < v; });
    const auto lo = hi == path.begin() ? hi : hi - 1;
    const double span = hi->first - lo->first;
    const double f = span > 0.0 ? (target - lo->first) / span : 0.0;
    // Each cell counts with the fraction of its volume inside the ball (4 x 4 x 8 sub-samples),
    // so the mass varies smoothly with the radius on coarse tau spacings.
    double mass = 0.0;
    const double hx = g.h_xy(), ht = g.h_tau();
    const double reach = std::pow(std::pow(hx * hx, 2) + ht * ht, 0.25);
    for (int ix = 0; ix < g.n_xy; ++ix) {
      for (int iy = 0; iy < g.n_xy; ++iy) {
        for (int it = 0; it < g.n_tau; ++it) {
          const std::size_t i = g.index(ix, iy, it);
          const double u = (1.0 - f) * lo->second.values()[i] + f * hi->second.values()[i];
          if (u == 0.0 || norms[i] > radius + 2.0 * reach) continue;
          int inside = 0;
          for (int a = 0; a < 4; ++a) {
            const double x = g.coord_xy(ix) + hx * ((a + 0.5) / 4.0 - 0.5);
            for (int b = 0; b < 4; ++b) {
              const double y = g.coord_xy(iy) + hx * ((b + 0.5) / 4.0 - 0.5);
              for (int d = 0; d < 8; ++d) {
                const double tau = g.coord_tau(it) + ht * ((d + 0.5) / 8.0 - 0.5);
                if (koranyi_from(x * x + y * y, tau) <= radius) ++inside;
              }
            }
          }
          mass += u * inside / 128.0;
        }
      }
    }
    out.samples.emplace_back(t, mass * g.cell_volume());
  }
  if (out.samples.size() < 3) {
    out.inconclusive = true;
    if (out.reason.empty()) out.reason = "fewer than three samples inside the path";
    return out;
  }
  std::vector<double> lx, ly;
  for (const auto& [t, m] : out.samples) {
    lx.push_back(std::log(t));
    ly.push_back(m);
  }
  const bool flat = std::all_of(ly.begin(), ly.end(), [&](double v) { return v == ly.front(); });
  if (flat) {
    out.fit = {ly.front(), 0.0, 0.0};
  } else {
    out.fit = fit_line(lx, ly);
  }
  return out;
}

std::vector<FunctionalSample> tq2_contradiction_probe(const GridField& u_restart, std::span<const double> t_values) {
  require_positive_times(t_values, "tq2_contradiction_probe");
  u_restart.require_clean("tq2_contradiction_probe");
  std::vector<FunctionalSample> out;
  for (double t : t_values) {
    const auto vals = heat_at_probes(u_restart, t, probe_targets(t));
    out.push_back({t, std::pow(t, kQ / 2.0) * *std::max_element(vals.begin(), vals.end())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracles

namespace {

double smoothed_power_1d(double x, double m, double c, double k, double delta, double t) {
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::tanh_sinh;
  auto f = [&](double y) {
    const double weight = m == 0.0 ? 1.0 : std::pow(delta + std::abs(y), m);
    return std::exp(-c * std::pow(std::abs(x - y), k) / t) * weight;
  };
  std::vector<double> cuts{0.0};
  if (x != 0.0) cuts.push_back(x);
  std::sort(cuts.begin(), cuts.end());
  tanh_sinh<double> ts;
  exp_sinh<double> es;
  const double inf = std::numeric_limits<double>::infinity();
  double total = es.integrate([&](double u) { return f(cuts.back() + u); }, 0.0, inf, 1e-14);
  total += es.integrate([&](double u) { return f(cuts.front() - u); }, 0.0, inf, 1e-14);
  if (cuts.size() == 2) total += ts.integrate(f, cuts[0], cuts[1], 1e-14);
  return total;
}

double smoothed_power_2d(double x1, double x2, double m, double c, double k, double delta, double t) {
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::tanh_sinh;
  const double rx = std::hypot(x1, x2);
  const double phase = rx > 0.0 ? std::atan2(x2, x1) : 0.0;
  tanh_sinh<double> ts;
  exp_sinh<double> es;
  auto ring = [&](double r) {
    if (r == 0.0) return 0.0;
    const double weight = m == 0.0 ? 1.0 : std::pow(delta + r, m);
    auto g = [&](double th) {
      const double d2 = rx * rx + r * r - 2.0 * rx * r * std::cos(th - phase);
      return std::exp(-c * std::pow(std::max(d2, 0.0), k / 2.0) / t);
    };
    return r * weight * ts.integrate(g, phase, phase + 2.0 * std::numbers::pi, 1e-14);
  };
  const double inf = std::numeric_limits<double>::infinity();
  double total = es.integrate([&](double u) { return ring(rx + u); }, 0.0, inf, 1e-13);
  if (rx > 0.0) total += ts.integrate(ring, 0.0, rx, 1e-13);
  return total;
}

}  // namespace

RearrangementResult rearrangement_max_at_origin(double m, double c, double k, double delta, double t, int dim) {
  if (dim != 1 && dim != 2) throw ArgumentError("rearrangement oracle supports dim 1 or 2");
  if (m > 0.0) throw ArgumentError("rearrangement oracle needs m <= 0");
  if (!(c > 0.0) || !(k > 0.0) || !(t > 0.0)) throw ArgumentError("rearrangement oracle needs c, k, t > 0");
  if (delta < 0.0) throw ArgumentError("rearrangement oracle needs delta >= 0");
  if (delta == 0.0 && m <= -dim) throw ArgumentError("(delta + |y|)^m is not locally integrable for delta = 0, m <= -dim");

  RearrangementResult res;
  std::vector<std::vector<double>> lattice;
  if (dim == 1) {
    for (int i = -8; i <= 8; ++i) lattice.push_back({0.25 * i});
  } else {
    for (int i = -3; i <= 3; ++i) {
      for (int j = -3; j <= 3; ++j) lattice.push_back({0.5 * i, 0.5 * j});
    }
  }
  std::vector<double> vals(lattice.size());
  parallel_for(lattice.size(), [&](std::size_t i) {
    const auto& x = lattice[i];
    vals[i] = dim == 1 ? smoothed_power_1d(x[0], m, c, k, delta, t)
                       : smoothed_power_2d(x[0], x[1], m, c, k, delta, t);
  });
  double best_other = -std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const bool origin = std::all_of(lattice[i].begin(), lattice[i].end(), [](double v) { return v == 0.0; });
    if (origin) {
      res.g0 = vals[i];
    } else if (vals[i] > best_other) {
      best_other = vals[i];
      best_idx = i;
    }
  }
  res.margin = res.g0 - best_other;
  if (std::abs(res.margin) <= 1e-12 * res.g0) res.margin = 0.0;
  if (res.margin >= 0.0) {
    res.location.assign(static_cast<std::size_t>(dim), 0.0);
  } else {
    res.location = lattice[best_idx];
  }
  double n2 = 0.0;
  for (double v : res.location) n2 += v * v;
  res.argmax = std::sqrt(n2);
  return res;
}

ReverseHolder reverse_holder_check(std::span<const double> f, std::span<const double> g,
                                   std::span<const double> weights, double p) {
  if (!(p > 1.0)) throw ArgumentError("reverse Hölder needs p > 1");
  if (f.size() != g.size() || f.size() != weights.size() || f.empty()) {
    throw ArgumentError("reverse Hölder needs equally long, non-empty samples");
  }
  double lhs = 0.0, sf = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(weights[i] > 0.0)) throw ArgumentError("reverse Hölder weights must be positive");
    if (g[i] == 0.0) throw ArgumentError("reverse Hölder needs g != 0 at every sample");
    lhs += weights[i] * std::abs(f[i] * g[i]);
    sf += weights[i] * std::pow(std::abs(f[i]), 1.0 / p);
    sg += weights[i] * std::pow(std::abs(g[i]), -1.0 / (p - 1.0));
  }
  ReverseHolder r;
  r.lhs = lhs;
  r.rhs = std::pow(sf, p) * std::pow(sg, -(p - 1.0));
  r.holds = r.lhs >= r.rhs * (1.0 - 1e-12);
  return r;
}

ReverseHolderSuite reverse_holder_random(double p, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 64);
  std::lognormal_distribution<double> value(0.0, 1.5);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  std::bernoulli_distribution zero_f(0.1);
  ReverseHolderSuite suite;
  suite.worst_ratio = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    const int n = size(rng);
    std::vector<double> f(n), g(n), w(n);
    for (int i = 0; i < n; ++i) {
      f[i] = zero_f(rng) ? 0.0 : value(rng);
      g[i] = value(rng);
      w[i] = weight(rng);
    }
    const auto r = reverse_holder_check(f, g, w, p);
    ++suite.trials;
    if (!r.holds) ++suite.violations;
    if (r.rhs > 0.0) suite.worst_ratio = std::min(suite.worst_ratio, r.lhs / r.rhs);
  }
  return suite;
}

void write_diagnostics_csv(std::ostream& os, std::span<const DiagnosticRow> rows) {
  const auto old = os.precision(10);
  os << "functional,parameters,fitted_exponent,expected_exponent,r_squared,verdict\n";
  for (const auto& r : rows) {
    os << r.functional << ',' << r.parameters << ',' << r.fitted << ',' << r.expected << ',' << r.r_squared << ','
       << r.verdict << '\n';
  }
  os.precision(old);
}

}  // namespace hhp
