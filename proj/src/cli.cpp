#include "hhp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "hhp/errors.hpp"
#include "hhp/hgroup.hpp"

namespace hhp {

namespace {

using Json = nlohmann::ordered_json;

double homogeneous_dimension(int n_heis) { return GroupParams::for_n(n_heis).q; }

constexpr double kThresholdEps = 1e-12;
// The weighted profile is cut off here so its linear flow stays inside the box.
constexpr double kProfileCutoff = 3.0;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': '" + text + "' is not a finite number");
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config key '" + key + "': '" + text + "' is not a boolean");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(key, item));
  }
  return out;
}

InitialData parse_initial_data(const std::string& text) {
  const std::string t = trim(text);
  if (t == "auto") return InitialData::automatic;
  if (t == "bump") return InitialData::bump;
  if (t == "profile_Q_decay") return InitialData::profile_Q_decay;
  if (t == "product_hardy") return InitialData::product_hardy;
  if (t == "custom_file") return InitialData::custom_file;
  throw ConfigError("config key 'initial_data': unknown kind '" + text + "'");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Json budget_json(const GlobalConstructionParams& b) {
  Json j;
  j["lambda_scale"] = b.lambda_scale;
  j["capital_lambda"] = b.capital_lambda;
  j["q"] = b.q_exponent ? Json(*b.q_exponent) : Json(nullptr);
  j["c0"] = b.c0 ? Json(*b.c0) : Json(nullptr);
  j["lambda_on_grid"] = b.lambda_on_grid;
  j["lambda_tail"] = b.lambda_tail;
  j["fitted_exponent"] = b.fitted_exponent;
  j["theoretical_exponent"] = b.theoretical_exponent;
  j["fit_r_squared"] = b.fit_r_squared;
  j["verified"] = b.verified;
  j["note"] = b.note;
  return j;
}

Json certification_json(const MonotoneResult& m) {
  Json j;
  j["certified"] = m.certified;
  j["monotone"] = m.monotone;
  j["barrier_holds"] = m.barrier_holds;
  j["depth"] = m.depth;
  j["successive_distance"] = m.successive_distance;
  j["max_barrier_ratio"] = m.max_barrier_ratio;
  if (m.violation_iterate >= 0) {
    j["violation"] = Json{{"kind", m.violation_kind},
                          {"iterate", m.violation_iterate},
                          {"t", m.violation_t},
                          {"node", m.violation_node}};
  } else {
    j["violation"] = nullptr;
  }
  return j;
}

// Picks the Hardy exponent q: the configured one when feasible, else the midpoint
// of the feasible interval (Q/(Q+gamma), Q(p-1)/(2+gamma)).
std::optional<double> choose_hardy_q(double configured, double p, double gamma, int n_heis) {
  const double Q = homogeneous_dimension(n_heis);
  const double lo = std::max(1.0, Q / (Q + gamma));
  const double hi = Q * (p - 1.0) / (2.0 + gamma);
  if (configured > lo && configured < hi) return configured;
  if (hi <= lo) return std::nullopt;
  return 0.5 * (lo + hi);
}

void write_snapshots(const RunConfig& cfg, const EvolutionState& st, const std::filesystem::path& dir) {
  for (std::size_t i = 0; i < cfg.snapshot_times.size(); ++i) {
    const double want = cfg.snapshot_times[i];
    const std::pair<double, GridField>* best = nullptr;
    for (const auto& node : st.path) {
      if (node.first > want + 1e-12) break;
      best = &node;
    }
    if (!best) continue;
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%02zu.txt", i);
    std::ofstream os(dir / name);
    write_snapshot(os, best->second, {best->first, cfg.gamma, cfg.p});
  }
}

}  // namespace

std::string to_string(InitialData d) {
  switch (d) {
    case InitialData::automatic: return "auto";
    case InitialData::bump: return "bump";
    case InitialData::profile_Q_decay: return "profile_Q_decay";
    case InitialData::product_hardy: return "product_hardy";
    case InitialData::custom_file: return "custom_file";
  }
  return "unknown";
}

std::string to_string(PhaseVerdict v) {
  switch (v) {
    case PhaseVerdict::blowup: return "blowup";
    case PhaseVerdict::global_certified: return "global_certified";
    case PhaseVerdict::global_uncertified: return "global_uncertified";
    case PhaseVerdict::inconclusive: return "inconclusive";
    case PhaseVerdict::open_gap: return "open_gap";
  }
  return "unknown";
}

int verdict_code(PhaseVerdict v) { return static_cast<int>(v); }

std::string to_string(Regime r) {
  switch (r) {
    case Regime::subcritical: return "subcritical";
    case Regime::global: return "global";
    case Regime::gap: return "gap";
  }
  return "unknown";
}

double fujita_exponent(double gamma, int n_heis) {
  return 1.0 + (2.0 + gamma) / homogeneous_dimension(n_heis);
}

double hardy_threshold(double gamma, int n_heis) {
  const double Q = homogeneous_dimension(n_heis);
  return 1.0 + (2.0 + gamma) / (Q + gamma);
}

Regime classify(double p, double gamma, int n_heis) {
  const double pc = fujita_exponent(gamma, n_heis);
  if (p <= pc + kThresholdEps) return Regime::subcritical;
  if (gamma >= 0.0) return Regime::global;
  return p > hardy_threshold(gamma, n_heis) + kThresholdEps ? Regime::global : Regime::gap;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "n_heis",         "gamma",          "p",               "initial_data",   "custom_file",
      "bump_amplitude", "bump_radius",    "lambda_scale",    "hardy_q",        "half_width_xy",
      "half_width_tau", "n_xy",           "n_tau",           "offset",         "dt",
      "window",         "first_step",     "geometric_ratio", "t_horizon",      "blowup_threshold",
      "picard_tol",     "picard_max",     "min_window",      "monotone_depth", "max_leakage",
      "apply_mode",     "threads",        "seed",            "snapshot_times", "p_values",
      "gamma_values",   "workers"};
  return k;
}

void RunConfig::set(const std::string& key_in, const std::string& value) {
  const std::string key = trim(key_in);
  const auto d = [&] { return parse_double(key, value); };
  const auto i = [&] {
    const long long v = parse_int(key, value);
    if (v < INT32_MIN || v > INT32_MAX) throw ConfigError("config key '" + key + "': value out of range");
    return static_cast<int>(v);
  };
  if (key == "n_heis") n_heis = i();
  else if (key == "gamma") gamma = d();
  else if (key == "p") p = d();
  else if (key == "initial_data") initial_data = parse_initial_data(value);
  else if (key == "custom_file") custom_file = trim(value);
  else if (key == "bump_amplitude") bump_amplitude = d();
  else if (key == "bump_radius") bump_radius = d();
  else if (key == "lambda_scale") {
    if (trim(value) == "auto") lambda_scale.reset();
    else lambda_scale = d();
  } else if (key == "hardy_q") hardy_q = d();
  else if (key == "half_width_xy") geom.half_width_xy = d();
  else if (key == "half_width_tau") geom.half_width_tau = d();
  else if (key == "n_xy") geom.n_xy = i();
  else if (key == "n_tau") geom.n_tau = i();
  else if (key == "offset") geom.offset = parse_bool(key, value);
  else if (key == "dt") dt = d();
  else if (key == "window") window = d();
  else if (key == "first_step") first_step = d();
  else if (key == "geometric_ratio") geometric_ratio = d();
  else if (key == "t_horizon") t_horizon = d();
  else if (key == "blowup_threshold") blowup_threshold = d();
  else if (key == "picard_tol") picard_tol = d();
  else if (key == "picard_max") picard_max = i();
  else if (key == "min_window") min_window = d();
  else if (key == "monotone_depth") monotone_depth = i();
  else if (key == "max_leakage") max_leakage = d();
  else if (key == "apply_mode") {
    const std::string v = trim(value);
    if (v == "normalized") apply_mode = ApplyMode::normalized;
    else if (v == "raw") apply_mode = ApplyMode::raw;
    else throw ConfigError("config key 'apply_mode': expected raw or normalized, got '" + value + "'");
  } else if (key == "threads") threads = i();
  else if (key == "seed") {
    const long long v = parse_int(key, value);
    if (v < 0) throw ConfigError("config key 'seed' must be nonnegative");
    seed = static_cast<std::uint64_t>(v);
  } else if (key == "snapshot_times") snapshot_times = parse_list(key, value);
  else if (key == "p_values") p_values = parse_list(key, value);
  else if (key == "gamma_values") gamma_values = parse_list(key, value);
  else if (key == "workers") workers = i();
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::key_values() const {
  return {{"n_heis", std::to_string(n_heis)},
          {"gamma", fmt(gamma)},
          {"p", fmt(p)},
          {"initial_data", to_string(initial_data)},
          {"custom_file", custom_file},
          {"bump_amplitude", fmt(bump_amplitude)},
          {"bump_radius", fmt(bump_radius)},
          {"lambda_scale", lambda_scale ? fmt(*lambda_scale) : "auto"},
          {"hardy_q", fmt(hardy_q)},
          {"half_width_xy", fmt(geom.half_width_xy)},
          {"half_width_tau", fmt(geom.half_width_tau)},
          {"n_xy", std::to_string(geom.n_xy)},
          {"n_tau", std::to_string(geom.n_tau)},
          {"offset", geom.offset ? "true" : "false"},
          {"dt", fmt(dt)},
          {"window", fmt(window)},
          {"first_step", fmt(first_step)},
          {"geometric_ratio", fmt(geometric_ratio)},
          {"t_horizon", fmt(t_horizon)},
          {"blowup_threshold", fmt(blowup_threshold)},
          {"picard_tol", fmt(picard_tol)},
          {"picard_max", std::to_string(picard_max)},
          {"min_window", fmt(min_window)},
          {"monotone_depth", std::to_string(monotone_depth)},
          {"max_leakage", fmt(max_leakage)},
          {"apply_mode", apply_mode == ApplyMode::raw ? "raw" : "normalized"},
          {"threads", std::to_string(threads)},
          {"seed", std::to_string(seed)},
          {"snapshot_times", fmt_list(snapshot_times)},
          {"p_values", fmt_list(p_values)},
          {"gamma_values", fmt_list(gamma_values)},
          {"workers", std::to_string(workers)}};
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : key_values()) text += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

EvolveConfig RunConfig::evolve_config() const {
  EvolveConfig c;
  c.gamma = gamma;
  c.p = p;
  c.t_horizon = t_horizon;
  c.dt = dt;
  c.window = window;
  c.blowup_threshold = blowup_threshold;
  c.picard_tol = picard_tol;
  c.picard_max = picard_max;
  c.min_window = min_window;
  c.first_step = first_step;
  c.geometric_ratio = geometric_ratio;
  c.monotone_depth = monotone_depth;
  c.max_leakage = max_leakage;
  c.mode = apply_mode;
  c.threads = threads;
  c.keep_path = !snapshot_times.empty();
  return c;
}

void RunConfig::validate() const {
  if (n_heis != 1)
    throw ConfigError("n_heis = " + std::to_string(n_heis) + ": only the first Heisenberg group is implemented");
  const auto check_pair = [](double g, double pp) {
    if (!(g > -2.0)) throw ConfigError("gamma = " + fmt(g) + " must exceed -2");
    if (!(pp > 1.0)) throw ConfigError("p = " + fmt(pp) + " must exceed 1");
  };
  check_pair(gamma, p);
  for (double g : gamma_values)
    if (!(g > -2.0)) throw ConfigError("gamma_values entry " + fmt(g) + " must exceed -2");
  for (double pp : p_values)
    if (!(pp > 1.0)) throw ConfigError("p_values entry " + fmt(pp) + " must exceed 1");
  if (!(bump_amplitude > 0.0)) throw ConfigError("bump_amplitude must be positive");
  if (!(bump_radius > 0.0)) throw ConfigError("bump_radius must be positive");
  if (lambda_scale && !(*lambda_scale > 0.0)) throw ConfigError("lambda_scale must be positive or auto");
  if (!(hardy_q > 1.0)) throw ConfigError("hardy_q must exceed 1");
  if (initial_data == InitialData::custom_file && custom_file.empty())
    throw ConfigError("initial_data = custom_file needs the custom_file key");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  geom.validate();
  const double g_min = gamma_values.empty() ? gamma : std::min(gamma, *std::min_element(gamma_values.begin(), gamma_values.end()));
  if (g_min < 0.0 && geom.has_origin_node())
    throw ConfigError("gamma < 0 needs a grid without a node at the origin (use offset nodes with an even count)");
  evolve_config().validate();
  for (double t : snapshot_times)
    if (!(t > 0.0 && t <= t_horizon)) throw ConfigError("snapshot_times entry " + fmt(t) + " is outside (0, t_horizon]");
}

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file " + file.string());
  return parse_config(is);
}

GridField initial_field(const RunConfig& cfg, InitialData kind) {
  const double Q = homogeneous_dimension(cfg.n_heis);
  switch (kind) {
    case InitialData::bump: {
      const double a = cfg.bump_amplitude, r2 = cfg.bump_radius * cfg.bump_radius;
      return sample(
          [&](const GPoint& e) {
            const double n = koranyi_norm(e);
            const double s = 1.0 - n * n / r2;
            return s > 0.0 ? a * s * s : 0.0;
          },
          cfg.geom);
    }
    case InitialData::profile_Q_decay:
      return sample(
          [&](const GPoint& e) {
            const double n = koranyi_norm(e);
            return n < kProfileCutoff ? std::pow(1.0 + n, -Q) : 0.0;
          },
          cfg.geom);
    case InitialData::product_hardy:
      return sample(
          [](const GPoint& e) {
            const double x = e.x[0], y = e.y[0];
            return 1.0 / ((1.0 + x * x) * (1.0 + y * y) * std::sqrt(1.0 + e.tau * e.tau));
          },
          cfg.geom);
    case InitialData::custom_file: {
      std::ifstream is(cfg.custom_file);
      if (!is) throw ConfigError("cannot open custom_file " + cfg.custom_file);
      GridField u = read_snapshot(is);
      if (!(u.geom() == cfg.geom)) throw ConfigError("custom_file grid does not match the configured geometry");
      return u;
    }
    case InitialData::automatic: break;
  }
  throw ArgumentError("initial_field: resolve 'auto' before building data");
}

PhaseCell run_single(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  PhaseCell cell;
  cell.p = cfg.p;
  cell.gamma = cfg.gamma;
  cell.regime = classify(cfg.p, cfg.gamma, cfg.n_heis);

  InitialData kind = cfg.initial_data;
  if (kind == InitialData::automatic) {
    if (cell.regime == Regime::global)
      kind = cfg.gamma >= 0.0 ? InitialData::profile_Q_decay : InitialData::product_hardy;
    else
      kind = InitialData::bump;
  }
  cell.data_used = kind;
  const GridField w0 = initial_field(cfg, kind);

  const EvolveConfig ecfg = cfg.evolve_config();
  Propagator prop(cfg.geom, ecfg);
  const TimeGrid uniform = TimeGrid::uniform(cfg.dt, cfg.t_horizon);
  std::vector<std::string> notes;

  if (cell.regime == Regime::global) {
    try {
      if (cfg.gamma >= 0.0) {
        cell.budget = henon_lambda_budget(w0, prop, uniform);
      } else if (auto q = choose_hardy_q(cfg.hardy_q, cfg.p, cfg.gamma, cfg.n_heis)) {
        cell.budget = hardy_lambda_budget(w0, *q, prop, uniform);
        if (*q != cfg.hardy_q) notes.push_back("hardy_q " + fmt(cfg.hardy_q) + " infeasible, used " + fmt(*q));
      } else {
        notes.push_back("no feasible Hardy exponent q");
      }
    } catch (const InfeasibleBudget& e) {
      notes.push_back(std::string("budget infeasible: ") + e.what());
    }
  }
  cell.lambda_used = cfg.lambda_scale ? *cfg.lambda_scale : (cell.budget ? cell.budget->lambda_scale : 1.0);
  if (cell.budget && cfg.lambda_scale) cell.budget->lambda_scale = *cfg.lambda_scale;

  GridField u0 = w0;
  for (double& v : u0.values()) v *= cell.lambda_used;
  EvolutionState st = extend_maximal(u0, prop);
  cell.t_final = st.t;
  cell.max_norm = st.max_norm();
  cell.final_norm = st.history.empty() ? 0.0 : st.history.back().norm;
  cell.leakage = st.leakage;
  cell.evolution_verdict = to_string(st.verdict);
  cell.history = st.history;
  if (!st.note.empty()) notes.push_back(st.note);

  switch (st.verdict) {
    case Verdict::blowup_detected: cell.verdict = PhaseVerdict::blowup; break;
    case Verdict::horizon_reached:
      cell.verdict = PhaseVerdict::global_uncertified;
      if (cell.regime == Regime::global && cell.budget) {
        cell.certification = monotone_global(u0, *cell.budget, prop, uniform);
        if (cell.certification->certified) cell.verdict = PhaseVerdict::global_certified;
      }
      break;
    default: cell.verdict = PhaseVerdict::inconclusive; break;
  }
  if (cell.regime == Regime::gap) cell.verdict = PhaseVerdict::open_gap;

  for (std::size_t i = 0; i < notes.size(); ++i) cell.note += (i ? "; " : "") + notes[i];

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream(*out_dir / "manifest.json") << manifest_json(cfg, cell);
    if (!st.path.empty()) write_snapshots(cfg, st, *out_dir);
  }
  return cell;
}

std::string manifest_json(const RunConfig& cfg, const PhaseCell& cell) {
  Json j;
  Json config;
  for (const auto& [k, v] : cfg.key_values()) config[k] = v;
  j["config"] = config;
  j["config_hash"] = cfg.hash();
  j["p_c"] = fujita_exponent(cell.gamma, cfg.n_heis);
  j["hardy_threshold"] = cell.gamma <= 0.0 ? Json(hardy_threshold(cell.gamma, cfg.n_heis)) : Json(nullptr);
  j["regime"] = to_string(cell.regime);
  j["initial_data"] = to_string(cell.data_used);
  j["lambda_scale"] = cell.lambda_used;
  j["verdict"] = to_string(cell.verdict);
  j["evolution_verdict"] = cell.evolution_verdict;
  j["t_final"] = cell.t_final;
  j["max_norm"] = cell.max_norm;
  j["final_norm"] = cell.final_norm;
  j["leakage"] = cell.leakage;
  Json hist = Json::array();
  for (const auto& s : cell.history) hist.push_back(Json::array({s.t, s.norm}));
  j["norm_history"] = hist;
  j["budget"] = cell.budget ? budget_json(*cell.budget) : Json(nullptr);
  j["certification"] = cell.certification ? certification_json(*cell.certification) : Json(nullptr);
  j["note"] = cell.note;
  return j.dump(2) + "\n";
}

std::vector<PhaseCell> run_sweep(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.p_values.empty() || cfg.gamma_values.empty())
    throw ConfigError("a sweep needs non-empty p_values and gamma_values");
  std::vector<std::pair<double, double>> grid;
  for (double g : cfg.gamma_values)
    for (double p : cfg.p_values) grid.emplace_back(g, p);

  std::vector<PhaseCell> cells(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      RunConfig c = cfg;
      c.gamma = grid[i].first;
      c.p = grid[i].second;
      c.snapshot_times.clear();
      PhaseCell cell;
      try {
        cell = run_single(c);
      } catch (const std::exception& e) {
        cell = PhaseCell{};
        cell.gamma = c.gamma;
        cell.p = c.p;
        cell.regime = classify(c.p, c.gamma, c.n_heis);
        cell.verdict = cell.regime == Regime::gap ? PhaseVerdict::open_gap : PhaseVerdict::inconclusive;
        cell.note = std::string("cell failed: ") + e.what();
      }
      cells[i] = std::move(cell);
    }
  };
  const int n = std::min<int>(cfg.workers, static_cast<int>(grid.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  return cells;
}

void write_sweep_csv(std::ostream& os, const std::vector<PhaseCell>& cells, int n_heis) {
  os << "p,gamma,p_c,hardy_threshold,verdict,t_final,max_norm\n";
  for (const auto& c : cells) {
    os << fmt(c.p) << ',' << fmt(c.gamma) << ',' << fmt(fujita_exponent(c.gamma, n_heis)) << ','
       << (c.gamma <= 0.0 ? fmt(hardy_threshold(c.gamma, n_heis)) : "") << ',' << to_string(c.verdict) << ','
       << fmt(c.t_final) << ',' << fmt(c.max_norm) << '\n';
  }
}

void emit_plotdata(std::ostream& data, std::ostream& summary, const std::vector<PhaseCell>& cells, int n_heis) {
  if (cells.empty()) throw ArgumentError("emit_plotdata: no cells");
  data << "# p gamma p_c verdict_code t_final max_norm\n"
       << "# verdict codes: 0 blowup, 1 global_certified, 2 global_uncertified, 3 inconclusive, 4 open_gap\n";
  std::map<std::string, int> counts;
  for (const auto& c : cells) {
    data << fmt(c.p) << ' ' << fmt(c.gamma) << ' ' << fmt(fujita_exponent(c.gamma, n_heis)) << ' '
         << verdict_code(c.verdict) << ' ' << fmt(c.t_final) << ' ' << fmt(c.max_norm) << '\n';
    ++counts[to_string(c.verdict)];
  }
  Json j;
  j["cells"] = cells.size();
  j["columns"] = {"p", "gamma", "p_c", "verdict_code", "t_final", "max_norm"};
  Json codes;
  for (auto v : {PhaseVerdict::blowup, PhaseVerdict::global_certified, PhaseVerdict::global_uncertified,
                 PhaseVerdict::inconclusive, PhaseVerdict::open_gap})
    codes[to_string(v)] = verdict_code(v);
  j["verdict_codes"] = codes;
  j["counts"] = counts;
  summary << j.dump(2) << "\n";
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, const RunConfig& cfg) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  std::filesystem::path dir = root / (std::string(stamp) + "-" + cfg.hash().substr(0, 8));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hhp
