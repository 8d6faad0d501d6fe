#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hhp/errors.hpp"
#include "hhp/field.hpp"

using namespace hhp;

namespace {

double bump(const GPoint& p) {
  const double k = koranyi_norm(p);
  return k < 2.0 ? std::pow(1.0 - k * k / 4.0, 2) : 0.0;
}

GridGeometry small_geometry(int n) { return GridGeometry{3.0, 9.0, n, n, true}; }

}  // namespace

TEST_CASE("geometry") {
  const GridGeometry g;
  CHECK_NOTHROW(g.validate());
  CHECK_FALSE(g.has_origin_node());
  CHECK(g.h_xy() == doctest::Approx(0.375));
  CHECK(g.coord_xy(0) == doctest::Approx(-6.0 + 0.1875));
  CHECK(g.coord_xy(16) == doctest::Approx(0.1875));
  CHECK(GridGeometry::scaled(5.0, 10, 10).half_width_tau == 25.0);

  GridGeometry odd{6.0, 36.0, 33, 33, true};
  CHECK(odd.has_origin_node());
  CHECK_THROWS_AS(odd.validate(), ConfigError);
  GridGeometry zero{6.0, 36.0, 0, 8, true};
  CHECK_THROWS_AS(zero.validate(), ConfigError);
  GridGeometry ends{2.0, 4.0, 5, 5, false};
  CHECK(ends.coord_xy(0) == -2.0);
  CHECK(ends.coord_xy(4) == 2.0);
  CHECK(ends.coord_xy(2) == 0.0);
}

TEST_CASE("sample and norms") {
  const GridGeometry g{2.0, 4.0, 8, 8, true};
  const GridField ones = sample([](const GPoint&) { return 1.0; }, g);
  CHECK(ones.min_value() == 1.0);
  CHECK(ones.max_value() == 1.0);
  CHECK(ones.mass() == doctest::Approx(4.0 * 4.0 * 8.0));

  const GridField decay = sample([](const GPoint& p) { return std::pow(1.0 + koranyi_norm(p), -4.0); }, g);
  const double k0 = koranyi_norm(g.node(4, 4, 4));
  CHECK(decay.at(4, 4, 4) == std::pow(1.0 + k0, -4.0));
  CHECK(decay.at(4, 4, 4) == decay.max_value());

  CHECK_THROWS_AS(sample([](const GPoint& p) { return p.tau > 1.0 ? std::nan("") : 0.0; }, g), NumericalError);

  CHECK(weighted_sup_norm(ones, WeightSpec{0.0, 2.0, WeightKind::phi}) == 1.0);
  CHECK(weighted_sup_norm(GridField(g), WeightSpec{1.0, 2.0, WeightKind::phi}) == 0.0);
  const WeightSpec phi{1.5, 2.5, WeightKind::phi};
  const GridField cancel = sample([&](const GPoint& p) { return 1.0 / phi.at(p); }, g);
  CHECK(weighted_sup_norm(cancel, phi) == doctest::Approx(1.0).epsilon(1e-14));

  GridField bad = ones;
  bad.values()[3] = INFINITY;
  CHECK(bad.poisoned());
  CHECK_THROWS_AS(sup_norm(bad), NumericalError);
  CHECK_THROWS_AS(weighted_sup_norm(bad, phi), NumericalError);
}

TEST_CASE("apply_weight") {
  const GridGeometry g{2.0, 4.0, 8, 8, true};
  const GridField u = sample([](const GPoint& p) { return 0.5 + 0.1 * p.tau * p.tau; }, g);
  const GridField plain = apply_weight(u, WeightSpec{0.0, 3.0, WeightKind::hardy_henon});
  for (std::size_t i = 0; i < u.values().size(); ++i) CHECK(plain.values()[i] == std::pow(u.values()[i], 3.0));

  const GridGeometry ends{4.0, 16.0, 5, 5, false};
  const GridField ones(ends, 1.0);
  const GridField henon = apply_weight(ones, WeightSpec{2.0, 2.0, WeightKind::hardy_henon});
  CHECK(koranyi_norm(ends.node(3, 2, 2)) == 2.0);
  CHECK(henon.at(3, 2, 2) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK_THROWS_AS(apply_weight(ones, WeightSpec{-1.0, 2.0, WeightKind::hardy_henon}), ConfigError);

  const GridField hardy = apply_weight(GridField(g, 1.0), WeightSpec{-1.0, 2.0, WeightKind::hardy_henon});
  CHECK(hardy.at(4, 3, 5) == doctest::Approx(1.0 / koranyi_norm(g.node(4, 3, 4 + 1))).epsilon(1e-15));

  GridField negative(g, 1.0);
  negative.values()[0] = -0.1;
  CHECK_THROWS_AS(apply_weight(negative, WeightSpec{0.0, 1.5, WeightKind::hardy_henon}), DomainError);
  CHECK_NOTHROW(apply_weight(negative, WeightSpec{0.0, 2.0, WeightKind::hardy_henon}));
}

TEST_CASE("convolution hull drops less than 1e-6 of the kernel mass") {
  CHECK(ConvolutionHull{}.tail_mass() < 1e-6);
  CHECK(ConvolutionHull{7.5, 18.0}.tail_mass() > 1e-4);
}

TEST_CASE("semigroup operator on the default grid") {
  const GridGeometry g;
  const SemigroupOperator op(g, 0.25);
  CHECK(op.max_row_sum() <= 1.0 + 1e-12);
  CHECK(op.min_row_sum() > 0.0);

  CHECK(op.apply(GridField(g)).max_value() == 0.0);
  CHECK(op.apply(GridField(g)).min_value() == 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GridField a(g), b(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    a.values()[i] = unit(rng);
    b.values()[i] = a.values()[i] + unit(rng);
  }
  const GridField sa = op.apply(a), sb = op.apply(b);
  CHECK(sa.min_value() >= 0.0);
  bool ordered = true;
  for (std::size_t i = 0; i < g.size(); ++i) ordered = ordered && sa.values()[i] <= sb.values()[i];
  CHECK(ordered);
  CHECK(sup_norm(sa) <= sup_norm(a) * (1.0 + 5e-3));

  GridField nan_field(g);
  nan_field.values()[17] = std::nan("");
  CHECK_THROWS_AS(op.apply(nan_field), NumericalError);
  CHECK_THROWS_AS(op.apply(GridField(small_geometry(8))), ArgumentError);

  // The operator tends to the identity as the step shrinks.
  const GridField u = sample(bump, g);
  const GridField tiny = SemigroupOperator(g, 1e-4).apply(u);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(tiny.values()[i] == doctest::Approx(u.values()[i]).epsilon(1e-9));

  SemigroupOperator threaded(g, 0.25);
  threaded.set_threads(3);
  CHECK(threaded.apply(a).values() == sa.values());
}

TEST_CASE("raw weights reproduce the normalization on a resolved grid") {
  const GridGeometry g{2.0, 4.0, 16, 40, true};
  const GridField ones(g, 1.0);
  const double t = 0.05;
  const GridField out = SemigroupOperator(g, t, ApplyMode::raw).apply(ones);
  for (int ix = 0; ix < g.n_xy; ++ix) {
    for (int iy = 0; iy < g.n_xy; ++iy) {
      for (int it = 0; it < g.n_tau; ++it) {
        if (std::abs(g.coord_xy(ix)) > 0.5 || std::abs(g.coord_xy(iy)) > 0.5 || std::abs(g.coord_tau(it)) > 1.0) continue;
        CHECK(out.at(ix, iy, it) == doctest::Approx(1.0).epsilon(5e-3));
      }
    }
  }
}

TEST_CASE("a point mass spreads into the kernel") {
  const GridGeometry g{2.0, 4.0, 16, 40, true};
  const double t = 0.2;
  GridField delta(g);
  const int cx = 8, cy = 7, ct = 20;
  delta.at(cx, cy, ct) = 1.0 / g.cell_volume();
  const GridField out = SemigroupOperator(g, t, ApplyMode::raw).apply(delta);
  const GPoint source = g.node(cx, cy, ct);
  const double peak = kernel_at_origin(1, t);
  for (int ix = 4; ix < 12; ++ix) {
    for (int it = 10; it < 30; ++it) {
      const double exact = eval_kernel(t, compose(inverse(source), g.node(ix, 9, it)));
      if (exact < 1e-3 * peak) continue;
      CHECK(out.at(ix, 9, it) == doctest::Approx(exact).epsilon(1e-3));
    }
  }
}

TEST_CASE("semigroup composition") {
  const GridField coarse = sample(bump, small_geometry(12));
  CHECK(semigroup_compose_check(coarse, 0.5, 0.5) < 1e-2);
  CHECK(semigroup_compose_check(GridField(small_geometry(12)), 0.5, 0.5) == 0.0);

  const double dev_n = semigroup_compose_check(coarse, 0.25, 0.25);
  const double dev_2n = semigroup_compose_check(sample(bump, small_geometry(24)), 0.25, 0.25);
  CHECK(dev_2n < 0.5 * dev_n);
}

TEST_CASE("left translation covariance") {
  const GridGeometry g;
  const GridField u = sample([](const GPoint& p) { return bump(p); }, g);
  // Central translation by whole tau cells is exact on the lattice.
  const int shift = 3;
  GridField shifted(g);
  for (int ix = 0; ix < g.n_xy; ++ix)
    for (int iy = 0; iy < g.n_xy; ++iy)
      for (int it = shift; it < g.n_tau; ++it) shifted.at(ix, iy, it) = u.at(ix, iy, it - shift);
  const SemigroupOperator op(g, 0.25);
  const GridField a = op.apply(u), b = op.apply(shifted);
  for (int ix = 0; ix < g.n_xy; ++ix)
    for (int iy = 0; iy < g.n_xy; ++iy)
      for (int it = shift; it < g.n_tau; ++it) CHECK(b.at(ix, iy, it) == doctest::Approx(a.at(ix, iy, it - shift)).epsilon(1e-12));

  // A horizontal translation moves tau by 2(a y); compare through the point evaluator.
  const GridGeometry fine{2.5, 6.25, 24, 48, true};
  const GPoint shift_g = GPoint::h1(0.3, -0.2, 0.1);
  const auto f = [](const GPoint& p) { return std::exp(-2.0 * koranyi_norm(p) * koranyi_norm(p)); };
  const GridField u1 = sample(f, fine);
  const GridField u2 = sample([&](const GPoint& p) { return f(compose(shift_g, p)); }, fine);
  const KernelTable table = table_for_time(0.3, 1);
  std::vector<GPoint> targets, moved;
  for (const auto& p : {GPoint::h1(0.1, 0.2, 0.3), GPoint::h1(-0.4, 0.1, -0.5), GPoint::h1(0.0, -0.3, 0.8)}) {
    targets.push_back(p);
    moved.push_back(compose(shift_g, p));
  }
  const auto lhs = convolve_points(u2, table, targets);
  const auto rhs = convolve_points(u1, table, moved);
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(2e-2));
}

TEST_CASE("point evaluator agrees with the raw operator at nodes") {
  const GridGeometry g = small_geometry(12);
  const GridField u = sample(bump, g);
  const KernelTable table = table_for_time(0.5, 1);
  const GridField grid = SemigroupOperator(g, table, ApplyMode::raw).apply(u);
  std::vector<GPoint> targets{g.node(6, 6, 6), g.node(3, 8, 5), g.node(7, 5, 9)};
  const auto direct = convolve_points(u, table, targets);
  CHECK(direct[0] == doctest::Approx(grid.at(6, 6, 6)).epsilon(1e-6));
  CHECK(direct[1] == doctest::Approx(grid.at(3, 8, 5)).epsilon(1e-6));
  CHECK(direct[2] == doctest::Approx(grid.at(7, 5, 9)).epsilon(1e-6));
}

TEST_CASE("snapshot round trip") {
  const GridGeometry g{2.0, 4.0, 4, 6, true};
  const GridField u = sample([](const GPoint& p) { return std::sin(p.x[0]) + p.tau / 3.0; }, g);
  std::stringstream ss;
  write_snapshot(ss, u, SnapshotMeta{1.25, -0.5, 2.5});
  SnapshotMeta meta;
  const GridField back = read_snapshot(ss, &meta);
  CHECK(back.geom() == g);
  CHECK(back.values() == u.values());
  CHECK(meta.t == 1.25);
  CHECK(meta.gamma == -0.5);
  CHECK(meta.p == 2.5);

  std::stringstream broken("# hhp field snapshot\ni_x,i_y,i_tau,value\n");
  CHECK_THROWS_AS(read_snapshot(broken), ConfigError);
}
