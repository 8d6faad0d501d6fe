#include "doctest.h"

#include <cmath>

#include "hhp/errors.hpp"
#include "hhp/evolve.hpp"

using namespace hhp;

namespace {

GridGeometry small_grid() { return GridGeometry::scaled(3.0, 12, 12); }

GridField bump(const GridGeometry& g, double amplitude, double radius) {
  return sample(
      [&](const GPoint& e) {
        const double r = koranyi_norm(e);
        return r < radius ? amplitude * std::pow(1.0 - r * r / (radius * radius), 2) : 0.0;
      },
      g);
}

GridField profile(const GridGeometry& g) {
  return sample(
      [](const GPoint& e) {
        const double r = koranyi_norm(e);
        return r < 2.5 ? std::pow(1.0 + r, -4.0) : 0.0;
      },
      g);
}

GridField hardy_profile(const GridGeometry& g) {
  return sample(
      [](const GPoint& e) {
        const double x = e.x[0], y = e.y[0];
        return 1.0 / ((1.0 + x * x) * (1.0 + y * y) * std::sqrt(1.0 + e.tau * e.tau));
      },
      g);
}

EvolveConfig config(double gamma, double p, double horizon) {
  EvolveConfig c;
  c.gamma = gamma;
  c.p = p;
  c.t_horizon = horizon;
  return c;
}

double max_abs_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

TEST_CASE("time grids") {
  const auto u = TimeGrid::uniform(0.25, 1.0);
  REQUIRE(u.size() == 4);
  CHECK(u.t_nodes.back() == 1.0);
  CHECK(u.step(0) == doctest::Approx(0.25));
  const auto odd = TimeGrid::uniform(0.3, 1.0);
  CHECK(odd.t_nodes.back() == 1.0);
  CHECK(odd.size() == 4);

  const auto g = TimeGrid::geometric(1e-3, 1.2, 0.25, 8.0);
  g.validate();
  CHECK(g.t_nodes.front() == 1e-3);
  CHECK(g.t_nodes.back() == 8.0);
  CHECK(g.t_nodes[1] == doctest::Approx(1.2e-3));
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g.step(k) <= 0.25 + 1e-12);

  TimeGrid bad;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad.t_nodes = {0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad.t_nodes = {0.0, 0.5};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  CHECK_THROWS_AS(TimeGrid::uniform(0.0, 1.0), ArgumentError);
}

TEST_CASE("configuration checks") {
  EvolveConfig c;
  c.gamma = -2.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EvolveConfig{};
  c.p = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EvolveConfig{};
  c.min_window = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EvolveConfig{};
  c.gamma = -0.5;
  GridGeometry odd = GridGeometry::scaled(3.0, 13, 13, false);
  CHECK_THROWS_AS(Propagator(odd, c), ConfigError);
  CHECK(config(-0.5, 2.0, 1.0).time_grid().scheme == TimeGrid::Scheme::geometric);
  CHECK(config(0.5, 2.0, 1.0).time_grid().scheme == TimeGrid::Scheme::uniform);
}

TEST_CASE("zero data stays zero") {
  const auto g = small_grid();
  Propagator prop(g, config(0.0, 2.0, 1.0));
  const auto st = extend_maximal(GridField(g), prop);
  CHECK(st.verdict == Verdict::horizon_reached);
  CHECK(st.t == doctest::Approx(1.0));
  REQUIRE(!st.history.empty());
  for (const auto& h : st.history) CHECK(h.norm == 0.0);
  CHECK(st.u.max_value() == 0.0);

  const auto pic = picard_local(GridField(g), 0.1, prop);
  CHECK(pic.converged);
  CHECK(pic.iterations == 1);
}

TEST_CASE("volterra_step errors and nonnegativity") {
  const auto g = small_grid();
  Propagator prop(g, config(0.0, 2.0, 1.0));
  EvolutionState st;
  st.u = bump(g, 1.0, 2.0);
  CHECK_THROWS_AS(volterra_step(st, 0.0, prop), ArgumentError);
  const auto next = volterra_step(st, 0.1, prop);
  CHECK(next.t == 0.1);
  CHECK(next.history.size() == 1);
  CHECK(next.u.min_value() >= 0.0);

  EvolutionState poisoned = st;
  poisoned.u.values()[5] = std::nan("");
  CHECK_THROWS_AS(volterra_step(poisoned, 0.1, prop), NumericalError);

  EvolutionState done = st;
  done.verdict = Verdict::horizon_reached;
  CHECK_THROWS_AS(volterra_step(done, 0.2, prop), ArgumentError);

  EvolutionState negative = st;
  negative.u.values()[0] = -1.0;
  CHECK_THROWS_AS(volterra_step(negative, 0.1, prop), DomainError);
}

TEST_CASE("step comparison principle") {
  const auto g = small_grid();
  Propagator prop(g, config(0.5, 2.0, 1.0));
  EvolutionState lo, hi;
  lo.u = bump(g, 1.0, 2.0);
  hi.u = bump(g, 1.3, 2.2);
  const auto a = volterra_step(lo, 0.25, prop);
  const auto b = volterra_step(hi, 0.25, prop);
  for (std::size_t i = 0; i < a.u.values().size(); ++i) REQUIRE(a.u.values()[i] <= b.u.values()[i]);
}

TEST_CASE("linear runs reproduce the semigroup") {
  const auto g = GridGeometry::scaled(3.0, 24, 24);
  auto c = config(0.0, 2.0, 0.5);
  c.linear_only = true;
  Propagator prop(g, c);
  const auto u0 = bump(g, 1.0, 1.5);
  const auto st = extend_maximal(u0, prop);
  REQUIRE(st.verdict == Verdict::horizon_reached);
  const auto direct = semigroup_apply(u0, 0.5);
  CHECK(max_abs_diff(st.u, direct) < 1e-2 * direct.max_value());

  // Against the same two-step product the result is exact.
  const auto two = prop.op(0.25).apply(prop.op(0.25).apply(u0));
  CHECK(max_abs_diff(st.u, two) <= 1e-14 * two.max_value());
}

TEST_CASE("one step is first-order consistent under step halving") {
  const auto g = small_grid();
  Propagator prop(g, config(0.0, 2.0, 1.0));
  const auto u0 = bump(g, 1.0, 2.0);
  EvolveConfig lin_cfg = config(0.0, 2.0, 1.0);
  lin_cfg.linear_only = true;
  Propagator lin(g, lin_cfg);
  // Nonlinear splitting error of one step against two half steps, with the
  // linear composition defect removed.
  auto defect = [&](double d) {
    const auto one = prop.step(u0, d);
    const auto two = prop.step(prop.step(u0, d / 2), d / 2);
    const auto lone = lin.step(u0, d);
    const auto ltwo = lin.step(lin.step(u0, d / 2), d / 2);
    double m = 0.0;
    for (std::size_t i = 0; i < one.values().size(); ++i) {
      m = std::max(m, std::abs((one.values()[i] - two.values()[i]) - (lone.values()[i] - ltwo.values()[i])));
    }
    return m;
  };
  const double e1 = defect(0.02);
  const double e2 = defect(0.01);
  REQUIRE(e2 > 0.0);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("picard on small data converges and is a fixed point") {
  const auto g = small_grid();
  Propagator prop(g, config(0.0, 2.0, 1.0));
  const auto u0 = bump(g, 1e-3, 2.0);
  const auto r = picard_local(u0, 0.1, prop);
  REQUIRE(r.converged);
  CHECK(r.iterations <= 20);
  // One more application of the map along the converged path.
  GridField v = u0;
  double prev = 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < r.path.size(); ++k) {
    const double d = r.t_nodes[k] - prev;
    v = prop.step(k == 0 ? u0 : r.path[k - 1], d);
    worst = std::max(worst, std::abs(prop.norm(v) - prop.norm(r.path[k])));
    prev = r.t_nodes[k];
  }
  CHECK(worst < 2.0 * prop.config().picard_tol);
}

TEST_CASE("picard on huge data does not converge quietly") {
  const auto g = small_grid();
  Propagator prop(g, config(0.0, 2.0, 1.0));
  const auto u0 = bump(g, 1e6, 2.0);
  const auto r = picard_local(u0, 0.1, prop);
  const bool failed = r.contraction_failed || !r.converged;
  const bool blew = r.converged && prop.norm(r.path.back()) > prop.config().blowup_threshold;
  CHECK((failed || blew));

  const auto st = extend_maximal(u0, prop);
  CHECK(st.verdict != Verdict::horizon_reached);
}

TEST_CASE("subcritical bump data blows up on the default grid") {
  GridGeometry g;
  auto c = config(0.0, 1.3, 8.0);
  c.threads = 2;
  Propagator prop(g, c);
  const auto st = extend_maximal(bump(g, 100.0, 2.0), prop);
  CHECK(st.verdict == Verdict::blowup_detected);
  CHECK(st.t < 8.0);
  CHECK(st.history.back().norm > c.blowup_threshold);
  for (std::size_t k = 1; k < st.history.size(); ++k) CHECK(st.history[k].t > st.history[k - 1].t);
}

TEST_CASE("weighted budget") {
  const auto g = small_grid();
  auto c = config(0.0, 2.0, 2.0);
  Propagator prop(g, c);
  const auto grid = TimeGrid::uniform(c.dt, c.t_horizon);
  const auto par = henon_lambda_budget(profile(g), prop, grid);
  CHECK(par.capital_lambda > 0.0);
  CHECK(std::isfinite(par.capital_lambda));
  CHECK(par.lambda_scale == doctest::Approx(std::pow(1.0 + par.capital_lambda, -2.0)));
  CHECK(par.lambda_on_grid + par.lambda_tail == doctest::Approx(par.capital_lambda));
  CHECK_FALSE(par.q_exponent.has_value());

  CHECK_THROWS_AS(henon_lambda_budget(GridField(g), prop, grid), ArgumentError);
  Propagator sub(g, config(0.0, 1.4, 2.0));
  CHECK_THROWS_AS(henon_lambda_budget(profile(g), sub, grid), InfeasibleBudget);
  CHECK(henon_budget_exponent(1.4, 0.0) == doctest::Approx(-0.8));
  Propagator neg(g, config(-0.5, 2.0, 2.0));
  CHECK_THROWS_AS(henon_lambda_budget(profile(g), neg, grid), ConfigError);
}

TEST_CASE("weighted construction is monotone and under the barrier") {
  const auto g = small_grid();
  auto c = config(0.0, 2.0, 2.0);
  Propagator prop(g, c);
  const auto grid = TimeGrid::uniform(c.dt, c.t_horizon);
  const auto w0 = profile(g);
  const auto par = henon_lambda_budget(w0, prop, grid);
  GridField u0 = w0;
  for (auto& v : u0.values()) v *= par.lambda_scale;
  const auto res = monotone_global(u0, par, prop, grid);
  CHECK(res.certified);
  CHECK(res.depth == c.monotone_depth);
  CHECK(res.max_barrier_ratio <= 1.0);
  REQUIRE(res.successive_distance.size() == 5);
  for (std::size_t n = 1; n < 5; ++n) CHECK(res.successive_distance[n] < 0.5 * res.successive_distance[n - 1]);

  const auto zero = monotone_global(GridField(g), par, prop, grid);
  CHECK(zero.certified);
  for (const auto& f : zero.last_path) CHECK(f.max_value() == 0.0);

  // Data far above the budget breaks the barrier and reports where.
  GridField big = w0;
  for (auto& v : big.values()) v *= 40.0;
  const auto bad = monotone_global(big, par, prop, grid);
  CHECK_FALSE(bad.certified);
  CHECK(bad.violation_kind == "barrier");
  CHECK(bad.violation_iterate >= 1);
}

TEST_CASE("Hardy budget and construction") {
  const auto g = small_grid();
  auto c = config(-0.5, 2.5, 2.0);
  Propagator prop(g, c);
  const auto grid = TimeGrid::uniform(c.dt, c.t_horizon);
  const auto w0 = hardy_profile(g);
  const auto par = hardy_lambda_budget(w0, 1.2, prop, grid);
  REQUIRE(par.q_exponent.has_value());
  REQUIRE(par.c0.has_value());
  const double q = 1.2, qp = q / (q - 1.0), p = 2.5;
  const double limit = std::min(std::pow(*par.c0, -q / (qp * (p - 1.0))) *
                                    std::pow(1.0 + par.capital_lambda, -p * q / (p - 1.0)),
                                1.0 / w0.max_value());
  CHECK(par.lambda_scale < limit);
  CHECK(par.capital_lambda > 0.0);

  GridField u0 = w0;
  for (auto& v : u0.values()) v *= par.lambda_scale;
  const auto res = monotone_global(u0, par, prop, grid);
  CHECK(res.certified);

  CHECK(hardy_budget_exponent(1.45, -0.5, 1.2) == doctest::Approx(0.0).epsilon(1e-12));
  Propagator low(g, config(-0.5, 1.2, 2.0));
  CHECK_THROWS_AS(hardy_lambda_budget(w0, 1.2, low, grid), InfeasibleBudget);
  CHECK_THROWS_AS(hardy_lambda_budget(w0, 1.1, prop, grid), ConfigError);
  Propagator pos(g, config(0.5, 2.5, 2.0));
  CHECK_THROWS_AS(hardy_lambda_budget(w0, 1.2, pos, grid), ConfigError);
}
