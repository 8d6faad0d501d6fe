#pragma once

// Run configuration, single runs, phase-diagram sweeps and their outputs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hhp/diagnostics.hpp"
#include "hhp/evolve.hpp"

namespace hhp {

enum class InitialData { automatic, bump, profile_Q_decay, product_hardy, custom_file };

struct RunConfig {
  int n_heis = 1;
  double gamma = 0.0;
  double p = 2.0;
  InitialData initial_data = InitialData::automatic;
  std::string custom_file;
  double bump_amplitude = 100.0;
  double bump_radius = 2.0;
  /// Empty means auto: the global-existence budget in the global regime, 1 elsewhere.
  std::optional<double> lambda_scale;
  double hardy_q = 1.2;
  GridGeometry geom;
  double dt = 0.25;
  double window = 1.0;
  double first_step = 1e-3;
  double geometric_ratio = 1.2;
  double t_horizon = 8.0;
  double blowup_threshold = 1e6;
  double picard_tol = 1e-10;
  int picard_max = 50;
  double min_window = 1e-5;
  int monotone_depth = 5;
  double max_leakage = 0.01;
  ApplyMode apply_mode = ApplyMode::normalized;
  int threads = 1;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times;
  // Sweep settings.
  std::vector<double> p_values;
  std::vector<double> gamma_values;
  int workers = 1;

  /// Throws ConfigError with the offending key.
  void validate() const;
  /// Sets one key from its text form; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its canonical value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> key_values() const;
  /// FNV-1a of the canonical key=value text, as 16 hex digits.
  std::string hash() const;
  EvolveConfig evolve_config() const;

  static const std::vector<std::string>& keys();
};

/// Parses "key = value" lines ('#' starts a comment) on top of the defaults.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& file);

std::string to_string(InitialData d);

/// 1 + (2 + gamma)/Q and 1 + (2 + gamma)/(Q + gamma).
double fujita_exponent(double gamma, int n_heis = 1);
double hardy_threshold(double gamma, int n_heis = 1);

enum class PhaseVerdict { blowup, global_certified, global_uncertified, inconclusive, open_gap };
std::string to_string(PhaseVerdict v);
int verdict_code(PhaseVerdict v);

enum class Regime { subcritical, global, gap };
std::string to_string(Regime r);
/// Regime by interval arithmetic on the thresholds.
Regime classify(double p, double gamma, int n_heis = 1);

struct PhaseCell {
  double p = 0.0;
  double gamma = 0.0;
  PhaseVerdict verdict = PhaseVerdict::inconclusive;
  Regime regime = Regime::subcritical;
  double t_final = 0.0;
  double max_norm = 0.0;
  double final_norm = 0.0;
  double leakage = 0.0;
  double lambda_used = 1.0;
  InitialData data_used = InitialData::bump;
  std::string evolution_verdict;
  std::optional<GlobalConstructionParams> budget;
  std::optional<MonotoneResult> certification;
  std::vector<NormSample> history;
  std::string note;
};

/// Builds u0 (before scaling by lambda) for the data kind on the configured grid.
GridField initial_field(const RunConfig& cfg, InitialData kind);

/// Executes one cell. Writes manifest.json (and snapshots) under out_dir when given.
PhaseCell run_single(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Manifest text for a finished cell; deterministic for identical inputs.
std::string manifest_json(const RunConfig& cfg, const PhaseCell& cell);

/// One cell per (gamma, p) in row-major order over cfg.gamma_values x cfg.p_values,
/// run by cfg.workers threads. Per-cell failures become inconclusive cells.
std::vector<PhaseCell> run_sweep(const RunConfig& cfg);

void write_sweep_csv(std::ostream& os, const std::vector<PhaseCell>& cells, int n_heis = 1);
/// Whitespace-separated columns with a documented header; throws ArgumentError when empty.
void emit_plotdata(std::ostream& data, std::ostream& summary, const std::vector<PhaseCell>& cells, int n_heis = 1);

/// One named check with its measured value and the limit it is held to.
struct CheckRow {
  std::string name;
  std::string detail;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
};

/// Normalization, scaling identity, envelope violations and residual convergence order of the kernel.
std::vector<CheckRow> kernel_check_suite(std::uint64_t seed);
/// Rearrangement argmax over the parameter matrix and randomized reverse Hoelder trials.
std::vector<CheckRow> oracle_suite(std::uint64_t seed, int reverse_holder_trials = 10000);
/// Decay-rate fits and blow-up functional growth rates on the default grid.
std::vector<DiagnosticRow> diagnose_suite();

void write_check_csv(std::ostream& os, const std::vector<CheckRow>& rows);

/// "<yyyymmdd-hhmmss>-<first 8 hash digits>" under root.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const RunConfig& cfg);

}  // namespace hhp
