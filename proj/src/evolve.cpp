#include "hhp/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hhp/errors.hpp"

namespace hhp {

namespace {

int homogeneous_dimension(int n_heis) { return 2 * n_heis + 2; }

bool finite_field(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Time grids

TimeGrid TimeGrid::uniform(double dt, double t_end) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ArgumentError("uniform time grid needs dt > 0 and t_end > 0");
  TimeGrid g;
  g.scheme = Scheme::uniform;
  const auto steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
  for (long k = 1; k < steps; ++k) g.t_nodes.push_back(static_cast<double>(k) * dt);
  g.t_nodes.push_back(t_end);
  return g;
}

TimeGrid TimeGrid::geometric(double first, double ratio, double dt, double t_end) {
  if (!(first > 0.0) || !(ratio > 1.0) || !(dt > 0.0) || !(t_end > 0.0)) {
    throw ArgumentError("geometric time grid needs first > 0, ratio > 1, dt > 0, t_end > 0");
  }
  TimeGrid g;
  g.scheme = Scheme::geometric;
  double t = std::min(first, t_end);
  g.t_nodes.push_back(t);
  while (t < t_end) {
    const double step = std::min((ratio - 1.0) * t, dt);
    t = (t_end - (t + step) < 1e-9 * t_end) ? t_end : t + step;
    g.t_nodes.push_back(t);
  }
  return g;
}

void TimeGrid::validate() const {
  if (t_nodes.empty()) throw ArgumentError("time grid is empty");
  if (!(t_nodes.front() > 0.0)) throw ArgumentError("time grid must start after 0");
  for (std::size_t k = 1; k < t_nodes.size(); ++k) {
    if (!(t_nodes[k] > t_nodes[k - 1])) throw ArgumentError("time grid must be strictly increasing");
  }
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::running: return "running";
    case Verdict::blowup_detected: return "blowup_detected";
    case Verdict::horizon_reached: return "horizon_reached";
    case Verdict::contraction_failed: return "contraction_failed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Configuration

void EvolveConfig::validate() const {
  WeightSpec{gamma, p, WeightKind::hardy_henon}.validate();
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(t_horizon > 0.0, "t_horizon must be positive");
  need(dt > 0.0, "dt must be positive");
  need(window > 0.0, "window must be positive");
  need(blowup_threshold > 0.0, "blowup_threshold must be positive");
  need(picard_tol > 0.0, "picard_tol must be positive");
  need(picard_max >= 1, "picard_max must be at least 1");
  need(min_window > 0.0 && min_window < window, "min_window must lie in (0, window)");
  need(first_step > 0.0, "first_step must be positive");
  need(geometric_ratio > 1.0, "geometric_ratio must exceed 1");
  need(monotone_depth >= 1, "monotone_depth must be at least 1");
  need(max_leakage > 0.0, "max_leakage must be positive");
  need(threads >= 1, "threads must be at least 1");
}

WeightSpec EvolveConfig::norm_weight() const {
  if (gamma >= 0.0) return {gamma, p, WeightKind::phi};
  return {0.0, p, WeightKind::phi};
}

TimeGrid EvolveConfig::time_grid() const {
  if (gamma < 0.0) return TimeGrid::geometric(first_step, geometric_ratio, dt, t_horizon);
  return TimeGrid::uniform(dt, t_horizon);
}

double EvolutionState::max_norm() const {
  double m = 0.0;
  for (const auto& s : history) m = std::max(m, s.norm);
  return m;
}

// ---------------------------------------------------------------------------
// Propagator

Propagator::Propagator(const GridGeometry& geom, const EvolveConfig& cfg)
    : cfg_(cfg), cache_(geom, cfg.mode, cfg.threads) {
  cfg_.validate();
  if (cfg_.gamma < 0.0 && geom.has_origin_node()) {
    throw ConfigError("a singular weight needs a grid without a node at the origin");
  }
  const auto norms = node_norms(geom);
  const WeightSpec r = cfg_.reaction_weight();
  const WeightSpec n = cfg_.norm_weight();
  reaction_weight_.resize(norms.size());
  norm_weight_.resize(norms.size());
  for (std::size_t i = 0; i < norms.size(); ++i) {
    reaction_weight_[i] = r.at_norm(norms[i]);
    norm_weight_[i] = n.at_norm(norms[i]);
  }
}

void Propagator::reaction(std::span<const double> u, std::span<double> out) const {
  if (cfg_.linear_only) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double p = cfg_.p;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = u[i];
    if (v < 0.0) throw DomainError("reaction term needs a nonnegative field");
    out[i] = v == 0.0 ? 0.0 : reaction_weight_[i] * std::pow(v, p);
  }
}

GridField Propagator::step(const GridField& u, double d, double* mass_in, double* mass_out) {
  GridField work(u.geom());
  reaction(u.values(), work.values());
  for (std::size_t i = 0; i < work.values().size(); ++i) work.values()[i] = u.values()[i] + d * work.values()[i];
  if (!finite_field(work.values())) throw NumericalError("non-finite value in the Duhamel step");
  GridField out(u.geom());
  cache_.get(d).apply_into(work.values(), out.values());
  if (mass_in) *mass_in = work.mass();
  if (mass_out) *mass_out = out.mass();
  return out;
}

double Propagator::norm(std::span<const double> u) const {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = std::abs(norm_weight_[i] * u[i]);
    if (!(v <= m)) m = v;  // propagates NaN
  }
  return m;
}

double Propagator::norm(const GridField& u) const { return norm(std::span<const double>(u.values())); }

// ---------------------------------------------------------------------------
// Single steps and Picard windows

EvolutionState volterra_step(const EvolutionState& state, double next_t, Propagator& prop) {
  if (state.verdict != Verdict::running) throw ArgumentError("volterra_step: the run has already finished");
  if (!(next_t > state.t)) throw ArgumentError("volterra_step: next_t must exceed the current time");
  state.u.require_clean("volterra_step");
  EvolutionState out = state;
  double in = 0.0, after = 0.0;
  out.u = prop.step(state.u, next_t - state.t, &in, &after);
  out.t = next_t;
  const double n = prop.norm(out.u);
  out.history.push_back({next_t, n});
  if (!std::isfinite(n) || n > prop.config().blowup_threshold) out.verdict = Verdict::blowup_detected;
  return out;
}

PicardResult picard_local(const GridField& u0, double t0, std::span<const double> nodes, Propagator& prop) {
  if (nodes.empty()) throw ArgumentError("picard_local: no window nodes");
  u0.require_clean("picard_local");
  const EvolveConfig& cfg = prop.config();
  const std::size_t m = nodes.size();
  std::vector<double> steps(m);
  for (std::size_t k = 0; k < m; ++k) {
    steps[k] = nodes[k] - (k == 0 ? t0 : nodes[k - 1]);
    if (!(steps[k] > 0.0)) throw ArgumentError("picard_local: window nodes must increase");
  }

  PicardResult res;
  res.t_nodes.assign(nodes.begin(), nodes.end());
  // Linear path as the starting iterate.
  std::vector<GridField> cur;
  cur.reserve(m);
  {
    GridField v = u0;
    for (std::size_t k = 0; k < m; ++k) {
      v = prop.op(steps[k]).apply(v);
      cur.push_back(v);
    }
  }
  auto node_at = [&](const std::vector<GridField>& path, std::size_t k) -> const GridField& {
    return k == 0 ? u0 : path[k - 1];
  };

  double prev_diff = -1.0;
  std::vector<double> f(u0.values().size());
  for (int it = 1; it <= cfg.picard_max; ++it) {
    res.iterations = it;
    // Nodes up to index it-1 are already exact (each iteration fixes one more node).
    const std::size_t start = std::min<std::size_t>(static_cast<std::size_t>(it - 1), m);
    std::vector<GridField> next = cur;
    double diff = 0.0, scale = prop.norm(u0);
    bool finite = true;
    for (std::size_t k = start; k < m; ++k) {
      const GridField& base = node_at(next, k);
      const GridField& src = node_at(cur, k);
      prop.reaction(src.values(), f);
      GridField work(u0.geom());
      for (std::size_t i = 0; i < f.size(); ++i) work.values()[i] = base.values()[i] + steps[k] * f[i];
      if (!finite_field(work.values())) {
        finite = false;
        break;
      }
      GridField out(u0.geom());
      prop.op(steps[k]).apply_into(work.values(), out.values());
      std::vector<double> delta(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) delta[i] = out.values()[i] - cur[k].values()[i];
      diff = std::max(diff, prop.norm(delta));
      scale = std::max(scale, prop.norm(out));
      next[k] = std::move(out);
    }
    if (!finite || !std::isfinite(diff) || scale > cfg.blowup_threshold * 1e6) {
      res.contraction_failed = true;
      res.last_difference = std::numeric_limits<double>::infinity();
      return res;
    }
    cur = std::move(next);
    res.last_difference = diff;
    if (diff <= cfg.picard_tol * std::max(1.0, scale)) {
      res.converged = true;
      res.path = std::move(cur);
      return res;
    }
    if (prev_diff > 0.0 && diff > 2.0 * prev_diff) {
      res.contraction_failed = true;
      return res;
    }
    prev_diff = diff;
  }
  return res;
}

PicardResult picard_local(const GridField& u0, double T, Propagator& prop) {
  if (!(T > 0.0)) throw ArgumentError("picard_local: T must be positive");
  const double d = std::min(prop.config().dt, T / 4.0);
  std::vector<double> nodes;
  const auto n = static_cast<long>(std::ceil(T / d - 1e-9));
  for (long k = 1; k < n; ++k) nodes.push_back(static_cast<double>(k) * d);
  nodes.push_back(T);
  return picard_local(u0, 0.0, nodes, prop);
}

EvolutionState extend_maximal(const GridField& u0, Propagator& prop) {
  u0.require_clean("extend_maximal");
  const EvolveConfig& cfg = prop.config();
  const TimeGrid grid = cfg.time_grid();
  constexpr std::size_t kMaxWindowNodes = 8;

  EvolutionState st;
  st.u = u0;
  st.t = 0.0;
  if (cfg.keep_path) st.path.emplace_back(0.0, u0);

  double window = cfg.window;
  int small_failures = 0;
  double injected = u0.mass();
  double lost = 0.0;
  std::size_t next_grid = 0;

  while (st.verdict == Verdict::running) {
    if (st.t >= cfg.t_horizon * (1.0 - 1e-12)) {
      st.verdict = Verdict::horizon_reached;
      break;
    }
    while (next_grid < grid.size() && grid.t_nodes[next_grid] <= st.t * (1.0 + 1e-12)) ++next_grid;

    std::vector<double> nodes;
    for (std::size_t k = next_grid; k < grid.size() && nodes.size() < kMaxWindowNodes; ++k) {
      if (grid.t_nodes[k] - st.t > window * (1.0 + 1e-12)) break;
      nodes.push_back(grid.t_nodes[k]);
    }
    if (nodes.empty()) nodes.push_back(std::min(st.t + window, cfg.t_horizon));

    PicardResult r = picard_local(st.u, st.t, nodes, prop);
    st.windows += 1;
    st.picard_iterations += r.iterations;
    if (!r.converged) {
      st.halvings += 1;
      window *= 0.5;
      if (window < cfg.min_window) {
        ++small_failures;
        const bool growing = st.history.size() < 2 ||
                             st.history.back().norm > st.history[st.history.size() - 2].norm;
        if (small_failures >= 2) {
          st.verdict = growing ? Verdict::blowup_detected : Verdict::contraction_failed;
          st.note = growing ? "window fell below min_window with growing norm"
                            : "window fell below min_window without norm growth";
        }
      }
      continue;
    }
    small_failures = 0;
    // Accept the window and account for boundary losses step by step.
    double prev_t = st.t;
    GridField keep_prev = st.u;
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      const double d = r.t_nodes[k] - prev_t;
      std::vector<double> f(keep_prev.values().size());
      prop.reaction(keep_prev.values(), f);
      double fm = 0.0, in = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        fm += f[i];
        in += keep_prev.values()[i] + d * f[i];
      }
      const double cell = keep_prev.geom().cell_volume();
      injected += d * fm * cell;
      lost += std::max(0.0, in * cell - r.path[k].mass());
      const double n = prop.norm(r.path[k]);
      st.history.push_back({r.t_nodes[k], n});
      if (cfg.keep_path) st.path.emplace_back(r.t_nodes[k], r.path[k]);
      keep_prev = r.path[k];
      prev_t = r.t_nodes[k];
      if (!std::isfinite(n) || n > cfg.blowup_threshold) {
        st.verdict = Verdict::blowup_detected;
        st.note = "weighted norm exceeded the blow-up threshold";
        break;
      }
    }
    st.t = prev_t;
    st.u = std::move(keep_prev);
    st.leakage = injected > 0.0 ? lost / injected : 0.0;
    window = std::min(cfg.window, 2.0 * window);
  }
  if (st.leakage > cfg.max_leakage) {
    std::ostringstream msg;
    msg << (st.note.empty() ? "" : "; ") << "boundary leakage " << st.leakage << " exceeds " << cfg.max_leakage;
    st.note += msg.str();
  }
  return st;
}

// ---------------------------------------------------------------------------
// Global constructions

double henon_budget_exponent(double p, double gamma, int n_heis) {
  const double q = homogeneous_dimension(n_heis);
  return -q * (p - 1.0) / 2.0 + gamma / 2.0;
}

double hardy_budget_exponent(double p, double gamma, double q, int n_heis) {
  const double Q = homogeneous_dimension(n_heis);
  return -Q * (p - 1.0) / (2.0 * q) + gamma / 2.0 + 1.0;
}

namespace {

void check_profile(const GridField& w0, const char* who) {
  w0.require_clean(who);
  if (w0.min_value() < 0.0) throw ArgumentError(std::string(who) + ": w0 must be nonnegative");
  if (!(w0.max_value() > 0.0)) throw ArgumentError(std::string(who) + ": w0 is identically zero");
}

// Fields P(k<-0) w at t = 0 and every grid node.
std::vector<GridField> linear_path(const GridField& w, Propagator& prop, const TimeGrid& grid) {
  std::vector<GridField> out;
  out.reserve(grid.size() + 1);
  out.push_back(w);
  for (std::size_t k = 0; k < grid.size(); ++k) out.push_back(prop.op(grid.step(k)).apply(out.back()));
  return out;
}

std::vector<double> path_times(const TimeGrid& grid) {
  std::vector<double> t{0.0};
  t.insert(t.end(), grid.t_nodes.begin(), grid.t_nodes.end());
  return t;
}

}  // namespace

GlobalConstructionParams henon_lambda_budget(const GridField& w0, Propagator& prop, const TimeGrid& grid) {
  const EvolveConfig& cfg = prop.config();
  if (cfg.gamma < 0.0) throw ConfigError("the weighted construction needs gamma >= 0");
  check_profile(w0, "henon_lambda_budget");
  grid.validate();
  const double p = cfg.p;
  const int n_heis = 1;
  const double e_th = henon_budget_exponent(p, cfg.gamma, n_heis);
  if (e_th >= -1.0) {
    std::ostringstream msg;
    msg << "budget integral diverges: decay exponent of the integrand " << e_th << " >= -1";
    throw InfeasibleBudget(msg.str());
  }

  const auto path = linear_path(w0, prop, grid);
  const auto t = path_times(grid);
  std::vector<double> g(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) g[k] = std::pow(prop.norm(path[k]), p - 1.0);

  GlobalConstructionParams out;
  // Left-endpoint sum matches the discrete Duhamel recursion exactly.
  for (std::size_t j = 0; j + 1 < path.size(); ++j) out.lambda_on_grid += (t[j + 1] - t[j]) * g[j];

  // Tail beyond the last node from a power law anchored at the last sample.
  const double t_end = t.back();
  std::vector<double> ft, fg;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (t[k] >= 0.5 * t_end) {
      ft.push_back(t[k]);
      fg.push_back(g[k]);
    }
  }
  out.theoretical_exponent = e_th;
  double e_used = e_th;
  try {
    const SlopeFit fit = fit_power_law(ft, fg);
    out.fitted_exponent = fit.exponent;
    out.fit_r_squared = fit.r_squared;
    if (std::abs(fit.exponent - e_th) > 0.1 * std::abs(e_th) || !fit.conclusive()) {
      out.verified = false;
      out.note = "fitted tail rate differs from the theoretical rate by more than 10%";
    }
    if (fit.exponent > e_th && fit.exponent < -1.0) e_used = fit.exponent;
  } catch (const NumericalError& e) {
    out.verified = false;
    out.note = std::string("tail fit failed: ") + e.what();
  }
  const double anchor = g.back() / std::pow(t_end, e_used);
  out.lambda_tail = (t.back() - t[t.size() - 2]) * g.back() + anchor * std::pow(t_end, e_used + 1.0) / (-e_used - 1.0);
  out.capital_lambda = out.lambda_on_grid + out.lambda_tail;
  out.lambda_scale = std::pow(1.0 + out.capital_lambda, -p / (p - 1.0));
  return out;
}

GlobalConstructionParams hardy_lambda_budget(const GridField& w0, double q, Propagator& prop, const TimeGrid& grid) {
  const EvolveConfig& cfg = prop.config();
  const double gamma = cfg.gamma;
  const double p = cfg.p;
  const double Q = homogeneous_dimension(1);
  if (!(gamma > -2.0 && gamma < 0.0)) throw ConfigError("the Hardy construction needs -2 < gamma < 0");
  if (!(q > 1.0) || !(1.0 / q < 1.0 + gamma / Q)) {
    throw ConfigError("the Hardy construction needs q > 1 with 1/q < 1 + gamma/Q");
  }
  check_profile(w0, "hardy_lambda_budget");
  grid.validate();
  const double e_th = hardy_budget_exponent(p, gamma, q);
  if (e_th >= 0.0) {
    std::ostringstream msg;
    msg << "budget is unbounded in t: growth exponent " << e_th << " >= 0 (needs p >= 1 + q(2+gamma)/Q)";
    throw InfeasibleBudget(msg.str());
  }
  const double qp = q / (q - 1.0);

  // Norm curve on a doubled horizon for the flat-sup cross-check.
  TimeGrid doubled = grid;
  {
    const double T = grid.t_nodes.back();
    const std::size_t n = grid.size();
    for (std::size_t k = 0; k < n; ++k) doubled.t_nodes.push_back(T + grid.t_nodes[k]);
  }
  const auto path = linear_path(w0, prop, doubled);
  const auto t = path_times(doubled);
  std::vector<double> g(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) g[k] = std::pow(sup_norm(path[k]), (p - 1.0) / q);

  const double a = gamma / 2.0 + 1.0;  // antiderivative exponent of (t - s)^{gamma/2}
  auto budget_at = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double w = (std::pow(t[k] - t[j], a) - std::pow(t[k] - t[j + 1], a)) / a;
      s += w * g[j];
    }
    return s;
  };
  const std::size_t k_end = grid.size();
  double sup_t = 0.0, sup_2t = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double b = budget_at(k);
    if (k <= k_end) sup_t = std::max(sup_t, b);
    sup_2t = std::max(sup_2t, b);
  }

  // C0: sup over node pairs of |P(k<-j)|.|^{gamma q'}| / (t_k - t_j)^{gamma q'/2}.
  const auto norms = node_norms(w0.geom());
  GridField weight(w0.geom());
  for (std::size_t i = 0; i < norms.size(); ++i) weight.values()[i] = std::pow(norms[i], gamma * qp);
  const auto tg = path_times(grid);
  std::vector<double> steps(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) steps[k] = grid.step(k);
  double c0 = 0.0;
  std::vector<std::size_t> chain_starts;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    bool covered = false;
    for (std::size_t s : chain_starts) {
      bool same = true;
      for (std::size_t m = 0; j + m < steps.size() && same; ++m) {
        same = std::abs(steps[j + m] - steps[s + m]) <= 1e-12 * steps[s + m];
      }
      if (same) {
        covered = true;
        break;
      }
    }
    if (covered) continue;
    chain_starts.push_back(j);
    GridField v = weight;
    for (std::size_t k = j; k < grid.size(); ++k) {
      v = prop.op(steps[k]).apply(v);
      const double lag = tg[k + 1] - tg[j];
      c0 = std::max(c0, sup_norm(v) / std::pow(lag, gamma * qp / 2.0));
    }
  }
  c0 *= 1.1;

  GlobalConstructionParams out;
  out.q_exponent = q;
  out.c0 = c0;
  out.capital_lambda = std::max(sup_t, sup_2t);
  out.lambda_on_grid = sup_t;
  out.lambda_tail = sup_2t - sup_t;
  out.theoretical_exponent = e_th;
  if (sup_2t > sup_t * (1.0 + 1e-6)) {
    out.verified = false;
    out.note = "the budget sup is still rising at the horizon";
  }
  const double lam1 = std::pow(c0, -q / (qp * (p - 1.0))) * std::pow(1.0 + out.capital_lambda, -p * q / (p - 1.0));
  const double lam2 = 1.0 / w0.max_value();
  out.lambda_scale = 0.99 * std::min(lam1, lam2);
  return out;
}

MonotoneResult monotone_global(const GridField& u0_scaled, const GlobalConstructionParams& params, Propagator& prop,
                               const TimeGrid& grid) {
  u0_scaled.require_clean("monotone_global");
  if (u0_scaled.min_value() < 0.0) throw ArgumentError("monotone_global: initial data must be nonnegative");
  grid.validate();
  const EvolveConfig& cfg = prop.config();
  const bool hardy = params.q_exponent.has_value();
  const double q = hardy ? *params.q_exponent : 1.0;
  const double bound = 1.0 + params.capital_lambda;
  constexpr double kSlack = 1e-8;

  const auto linear = linear_path(u0_scaled, prop, grid);
  const auto t = path_times(grid);
  std::vector<std::vector<double>> barrier(linear.size());
  for (std::size_t k = 0; k < linear.size(); ++k) {
    barrier[k].resize(linear[k].values().size());
    for (std::size_t i = 0; i < barrier[k].size(); ++i) {
      const double w = linear[k].values()[i];
      barrier[k][i] = bound * (hardy ? std::pow(w, 1.0 / q) : w);
    }
  }

  MonotoneResult res;
  std::vector<GridField> prev = linear;
  std::vector<double> f(u0_scaled.values().size());
  auto note_violation = [&](int n, std::size_t k, std::size_t i, const char* kind) {
    if (res.violation_iterate >= 0) return;
    res.violation_iterate = n;
    res.violation_t = t[k];
    res.violation_node = i;
    res.violation_kind = kind;
  };
  auto check_barrier = [&](int n, const std::vector<GridField>& path) {
    for (std::size_t k = 0; k < path.size(); ++k) {
      const auto& v = path[k].values();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (barrier[k][i] > 0.0) res.max_barrier_ratio = std::max(res.max_barrier_ratio, v[i] / barrier[k][i]);
        if (v[i] > barrier[k][i] + kSlack) {
          res.barrier_holds = false;
          note_violation(n, k, i, "barrier");
        }
      }
    }
  };
  check_barrier(0, prev);

  for (int n = 1; n <= cfg.monotone_depth; ++n) {
    std::vector<GridField> cur;
    cur.reserve(prev.size());
    cur.push_back(u0_scaled);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      prop.reaction(prev[k].values(), f);
      GridField work(u0_scaled.geom());
      const double d = grid.step(k);
      for (std::size_t i = 0; i < f.size(); ++i) work.values()[i] = cur.back().values()[i] + d * f[i];
      if (!finite_field(work.values())) throw NumericalError("monotone_global: non-finite iterate");
      GridField out(u0_scaled.geom());
      prop.op(d).apply_into(work.values(), out.values());
      cur.push_back(std::move(out));
    }
    double dist = 0.0;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const auto& a = cur[k].values();
      const auto& b = prev[k].values();
      for (std::size_t i = 0; i < a.size(); ++i) {
        dist = std::max(dist, std::abs(a[i] - b[i]));
        if (a[i] < b[i]) {
          res.monotone = false;
          note_violation(n, k, i, "monotonicity");
        }
      }
    }
    res.successive_distance.push_back(dist);
    check_barrier(n, cur);
    prev = std::move(cur);
    res.depth = n;
  }
  res.last_path = std::move(prev);
  res.certified = res.monotone && res.barrier_holds;
  return res;
}

}  // namespace hhp
