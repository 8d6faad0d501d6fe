#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "hhp/cli.hpp"
#include "hhp/kernel.hpp"

namespace hhp {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

DiagnosticRow decay_row(const std::string& name, const std::string& params, const DecayReport& rep) {
  std::string verdict = rep.inconclusive ? "inconclusive" : (rep.matches() ? "pass" : "fail");
  return {name, params, rep.fit.exponent, rep.expected_exponent, rep.fit.r_squared, verdict};
}

DiagnosticRow functional_row(const std::string& name, const std::string& params,
                             const std::vector<FunctionalSample>& samples, double expected) {
  const SlopeFit fit = fit_functional(samples);
  const bool ok = fit.conclusive() && std::abs(fit.exponent - expected) <= 0.1 * std::abs(expected);
  return {name, params, fit.exponent, expected, fit.r_squared, !fit.conclusive() ? "inconclusive" : (ok ? "pass" : "fail")};
}

}  // namespace

std::vector<CheckRow> kernel_check_suite(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  for (double t : {0.25, 1.0, 4.0}) {
    const double mass = check_normalization(t, scaled_box(t), NormalizationResolution{});
    rows.push_back({"normalization", "t=" + num(t), std::abs(mass - 1.0), 2e-3, std::abs(mass - 1.0) < 2e-3});
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<GPoint> pts;
  for (int k = 0; k < 100; ++k) pts.push_back(GPoint::h1(2.0 * unit(rng), 2.0 * unit(rng), 4.0 * unit(rng)));
  for (double t : {0.25, 4.0}) {
    const double err = check_scaling(t, pts);
    rows.push_back({"scaling", "t=" + num(t) + ";points=100", err, 1e-6, err < 1e-6});
  }

  const KernelBounds& b = default_bounds(1);
  const auto fresh = make_bound_samples(500, seed + 7919);
  int violations = 0;
  for (const auto& s : fresh) {
    const double h = eval_kernel(s.t, s.eta);
    const double k = koranyi_norm(s.eta);
    if (h > b.upper(s.t, k) || h < b.lower(s.t, k)) ++violations;
  }
  rows.push_back({"gaussian_envelope", "fresh samples=500", static_cast<double>(violations), 0.0, violations == 0});

  std::uniform_real_distribution<double> tdist(0.5, 2.0);
  double worst = 4.0;
  int bad = 0;
  for (int k = 0; k < 20; ++k) {
    const double t = tdist(rng);
    const double s = std::sqrt(t);
    const GPoint p = GPoint::h1(s * unit(rng), s * unit(rng), 1.5 * t * unit(rng));
    const auto steps = ResidualSteps::at_time(t);
    const double ratio = heat_equation_residual(t, p, steps) / heat_equation_residual(t, p, steps.halved());
    if (!(ratio >= 3.5 && ratio <= 4.5)) ++bad;
    if (std::abs(ratio - 4.0) > std::abs(worst - 4.0) || !std::isfinite(ratio)) worst = ratio;
  }
  rows.push_back({"residual_order", "20 points;worst ratio, target [3.5,4.5]", worst, 0.5, bad == 0});
  return rows;
}

std::vector<CheckRow> oracle_suite(std::uint64_t seed, int reverse_holder_trials) {
  std::vector<CheckRow> rows;
  int tuples = 0, failures = 0;
  double worst = 1.0;
  for (double m : {0.0, -0.25, -0.5})
    for (double k : {1.0, 2.0, 4.0})
      for (double delta : {0.0, 0.3})
        for (double t : {0.5, 2.0})
          for (int dim : {1, 2}) {
            const auto r = rearrangement_max_at_origin(m, 1.0, k, delta, t, dim);
            const double rel = r.margin / r.g0;
            worst = std::min(worst, rel);
            ++tuples;
            if (rel < -1e-9) ++failures;
          }
  rows.push_back({"rearrangement", "tuples=" + std::to_string(tuples) + ";min margin/G(0)", worst, -1e-9, failures == 0});
  for (double p : {1.5, 2.0, 3.0}) {
    const auto s = reverse_holder_random(p, reverse_holder_trials, seed);
    rows.push_back({"reverse_holder", "p=" + num(p) + ";trials=" + std::to_string(s.trials),
                    static_cast<double>(s.violations), 0.0, s.violations == 0});
  }
  return rows;
}

std::vector<DiagnosticRow> diagnose_suite() {
  std::vector<DiagnosticRow> rows;
  const double c = default_bounds(1).c_upper;
  const GridField one(smoothing_probe_geometry(10.0, 100.0, c), 1.0);
  const auto smooth_times = log_spaced(10.0, 100.0, 10);
  for (double g : {0.5, 1.0})
    rows.push_back(decay_row("hardy_smoothing_decay", "gamma=" + num(g), hardy_smoothing_decay(g, one, smooth_times)));

  RunConfig cfg;
  const GridField profile = initial_field(cfg, InitialData::profile_Q_decay);
  const auto long_times = log_spaced(10.0, 1000.0, 12);
  for (double g : {0.0, 1.0}) {
    const auto rep = henon_weighted_decay(profile, WeightSpec{g, 2.0, WeightKind::phi}, long_times);
    rows.push_back(decay_row("henon_weighted_decay", "gamma=" + num(g) + ";p=2", rep));
  }

  const GridField bump = initial_field(cfg, InitialData::bump);
  rows.push_back(functional_row("fujita_functional", "gamma=0;p=1.3", fujita_functional(bump, long_times, 1.3, 0.0), 0.4));
  rows.push_back(functional_row("hardy_blowup_functional", "gamma=-0.5;p=1.2",
                                hardy_blowup_functional(bump, long_times, 1.2, -0.5), 0.35));
  return rows;
}

void write_check_csv(std::ostream& os, const std::vector<CheckRow>& rows) {
  os << "check,detail,value,limit,verdict\n";
  for (const auto& r : rows)
    os << r.name << ",\"" << r.detail << "\"," << num(r.value) << ',' << num(r.limit) << ',' << (r.pass ? "pass" : "fail")
       << '\n';
}

}  // namespace hhp
