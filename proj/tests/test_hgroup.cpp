#include <cmath>
#include <random>

#include "doctest.h"
#include "hhp/errors.hpp"
#include "hhp/hgroup.hpp"

using hhp::GPoint;

namespace {

GPoint random_point(std::mt19937_64& rng, std::size_t n, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  GPoint p{std::vector<double>(n), std::vector<double>(n), u(rng)};
  for (std::size_t i = 0; i < n; ++i) {
    p.x[i] = u(rng);
    p.y[i] = u(rng);
  }
  return p;
}

void check_close(const GPoint& a, const GPoint& b, double rel) {
  REQUIRE(a.dim() == b.dim());
  auto near = [rel](double u, double v) { return std::abs(u - v) <= rel * std::max(1.0, std::abs(u) + std::abs(v)); };
  for (std::size_t i = 0; i < a.dim(); ++i) {
    CHECK(near(a.x[i], b.x[i]));
    CHECK(near(a.y[i], b.y[i]));
  }
  CHECK(near(a.tau, b.tau));
}

}  // namespace

TEST_CASE("group params") {
  CHECK(hhp::GroupParams::for_n(1).q == 4);
  CHECK(hhp::GroupParams::for_n(3).q == 8);
  CHECK_THROWS_AS(hhp::GroupParams::for_n(0), hhp::ArgumentError);
  // Koranyi unit ball for N = 1 has volume pi^2 / 2.
  CHECK(hhp::GroupParams::for_n(1).unit_ball_volume() == doctest::Approx(M_PI * M_PI / 2).epsilon(1e-13));
}

TEST_CASE("unit ball volume against Monte Carlo for N = 2") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int trials = 400000;
  int inside = 0;
  for (int k = 0; k < trials; ++k) {
    GPoint p({u(rng), u(rng)}, {u(rng), u(rng)}, u(rng));
    if (hhp::koranyi_norm(p) < 1.0) ++inside;
  }
  const double mc = 32.0 * inside / trials;
  CHECK(mc == doctest::Approx(hhp::GroupParams::for_n(2).unit_ball_volume()).epsilon(0.02));
}

TEST_CASE("composition") {
  const GPoint e = GPoint::identity(1);
  const GPoint a = GPoint::h1(1.5, -2.0, 0.25);
  CHECK(hhp::compose(e, a) == a);
  CHECK(hhp::compose(GPoint::h1(1, 0, 0), GPoint::h1(0, 1, 0)) == GPoint::h1(1, 1, 2));
  CHECK(hhp::compose(GPoint::h1(0, 1, 0), GPoint::h1(1, 0, 0)) == GPoint::h1(1, 1, -2));
  CHECK_THROWS_AS(hhp::compose(GPoint::identity(1), GPoint::identity(2)), hhp::ArgumentError);
  CHECK_THROWS_AS(GPoint({1.0}, {1.0, 2.0}, 0.0), hhp::ArgumentError);
}

TEST_CASE("inverse") {
  CHECK(hhp::inverse(GPoint::identity(1)) == GPoint::identity(1));
  CHECK(hhp::inverse(GPoint::h1(1, 2, 3)) == GPoint::h1(-1, -2, -3));
  CHECK(hhp::compose(hhp::inverse(GPoint::h1(1, 0, 5)), GPoint::h1(1, 0, 5)) == GPoint::identity(1));
}

TEST_CASE("dilation") {
  CHECK(hhp::dilate(2.0, GPoint::h1(1, 1, 1)) == GPoint::h1(2, 2, 4));
  const GPoint a = GPoint::h1(0.3, -0.7, 1.9);
  CHECK(hhp::dilate(1.0, a) == a);
  CHECK_THROWS_AS(hhp::dilate(0.0, a), hhp::ArgumentError);
  CHECK_THROWS_AS(hhp::dilate(-1.0, a), hhp::ArgumentError);
  check_close(hhp::dilate(1.0 / 3.0, hhp::dilate(3.0, a)), a, 1e-14);
}

TEST_CASE("norms") {
  CHECK(hhp::koranyi_norm(GPoint::identity(1)) == 0.0);
  CHECK(hhp::koranyi_norm(GPoint::h1(1, 0, 0)) == 1.0);
  CHECK(hhp::koranyi_norm(GPoint::h1(0, 0, 4)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(hhp::simple_norm(GPoint::identity(1)) == 0.0);
  CHECK(hhp::simple_norm(GPoint::h1(0, 0, 4)) == 2.0);

  const GPoint a = GPoint::h1(0.4, 1.2, -0.8);
  CHECK(hhp::left_distance(a, a) == 0.0);
  CHECK(hhp::left_distance(a, GPoint::identity(1)) == hhp::koranyi_norm(a));
}

TEST_CASE("koranyi and simple norms are equivalent on samples") {
  // (s^4 + tau^2)^{1/4} / (s^2 + |tau|)^{1/2} lies in [2^{-1/4}, 1] exactly.
  std::mt19937_64 rng(11);
  double lo = 1e9, hi = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const GPoint p = random_point(rng, 1, 5.0);
    const double r = hhp::koranyi_norm(p) / hhp::simple_norm(p);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(lo >= std::pow(2.0, -0.25) - 1e-12);
  CHECK(hi <= 1.0 + 1e-12);
  CHECK(lo > 0.0);
}

TEST_CASE("group properties on random samples") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 2u, 3u}) {
    for (int k = 0; k < 500; ++k) {
      const GPoint a = random_point(rng, n), b = random_point(rng, n), c = random_point(rng, n);
      check_close(hhp::compose(hhp::compose(a, b), c), hhp::compose(a, hhp::compose(b, c)), 1e-12);
      const double r = std::exp(std::uniform_real_distribution<double>(-2, 2)(rng));
      check_close(hhp::dilate(r, hhp::compose(a, b)), hhp::compose(hhp::dilate(r, a), hhp::dilate(r, b)), 1e-12);
      CHECK(hhp::koranyi_norm(hhp::inverse(a)) == hhp::koranyi_norm(a));
      CHECK(hhp::koranyi_norm(hhp::dilate(r, a)) == doctest::Approx(r * hhp::koranyi_norm(a)).epsilon(1e-12));
      CHECK(hhp::simple_norm(hhp::dilate(r, a)) == doctest::Approx(r * hhp::simple_norm(a)).epsilon(1e-12));
      const double lhs = hhp::left_distance(a, c);
      const double rhs = hhp::left_distance(a, b) + hhp::left_distance(b, c);
      CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("Haar measure scales with Q") {
  const auto g = hhp::GroupParams::for_n(1);
  const double sides[3] = {0.5, 1.25, 3.0};
  const double r = 1.7;
  const double dilated = (r * sides[0]) * (r * sides[1]) * (r * r * sides[2]);
  CHECK(dilated == doctest::Approx(std::pow(r, g.q) * sides[0] * sides[1] * sides[2]).epsilon(1e-14));
}
