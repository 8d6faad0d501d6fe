#pragma once

// Time integration of the mild formulation on a fixed grid.
//
// One step of length d maps u to S_d(u + d |eta|^gamma u^p). Because grid
// propagators compose exactly, unrolling the recursion gives the discrete
// Duhamel sum u(t_k) = P(k<-0) u0 + sum_{j<k} d_j P(k<-j) f(u(t_j)) with
// P(k<-j) = S_{d_{k-1}} ... S_{d_j}. The global constructions below are
// stated for this discrete sum, so their barrier checks are exact.

#include <optional>
#include <string>
#include <vector>

#include "hhp/field.hpp"
#include "hhp/slope.hpp"

namespace hhp {

struct TimeGrid {
  enum class Scheme { uniform, geometric };

  std::vector<double> t_nodes;
  Scheme scheme = Scheme::uniform;

  /// dt, 2 dt, ... up to t_end; the last node is t_end exactly.
  static TimeGrid uniform(double dt, double t_end);
  /// first, first*ratio, ... while the geometric increment stays below dt, then uniform steps of dt.
  static TimeGrid geometric(double first, double ratio, double dt, double t_end);

  /// Throws ArgumentError unless nodes are strictly increasing and positive.
  void validate() const;
  std::size_t size() const { return t_nodes.size(); }
  /// Step ending at node k; the step into node 0 starts at t = 0.
  double step(std::size_t k) const { return k == 0 ? t_nodes[0] : t_nodes[k] - t_nodes[k - 1]; }
};

enum class Verdict { running, blowup_detected, horizon_reached, contraction_failed };
std::string to_string(Verdict v);

struct EvolveConfig {
  double gamma = 0.0;
  double p = 2.0;
  double t_horizon = 8.0;
  double dt = 0.25;
  /// Initial Picard window length.
  double window = 1.0;
  double blowup_threshold = 1e6;
  double picard_tol = 1e-10;
  int picard_max = 50;
  double min_window = 1e-5;
  /// Geometric start used when gamma < 0.
  double first_step = 1e-3;
  double geometric_ratio = 1.2;
  int monotone_depth = 5;
  /// Cumulative fraction of mass lost through the box boundary above which a run is flagged.
  double max_leakage = 0.01;
  /// Drop the reaction term (linear sanity runs).
  bool linear_only = false;
  /// Keep every accepted node's field in EvolutionState::path.
  bool keep_path = false;
  ApplyMode mode = ApplyMode::normalized;
  int threads = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// phi = (1+|eta|)^{gamma/(p-1)} for gamma >= 0, the constant 1 for gamma < 0.
  WeightSpec norm_weight() const;
  WeightSpec reaction_weight() const { return {gamma, p, WeightKind::hardy_henon}; }
  /// Grid used for the run: geometric near 0 when gamma < 0, uniform otherwise.
  TimeGrid time_grid() const;
};

struct NormSample {
  double t = 0.0;
  double norm = 0.0;
};

struct EvolutionState {
  double t = 0.0;
  GridField u;
  std::vector<NormSample> history;
  Verdict verdict = Verdict::running;
  /// Mass lost through the box boundary divided by total mass injected.
  double leakage = 0.0;
  int windows = 0;
  int halvings = 0;
  int picard_iterations = 0;
  std::vector<std::pair<double, GridField>> path;
  std::string note;

  double max_norm() const;
};

/// Operators, weights and bookkeeping shared by one run. Not thread safe; use one per run.
class Propagator {
 public:
  Propagator(const GridGeometry& geom, const EvolveConfig& cfg);

  const EvolveConfig& config() const { return cfg_; }
  const GridGeometry& geom() const { return cache_.geom(); }
  const SemigroupOperator& op(double d) { return cache_.get(d); }

  /// |eta|^gamma u^p node-wise (zero when linear_only).
  void reaction(std::span<const double> u, std::span<double> out) const;
  /// S_d(u + d f(u)); optionally reports the mass before and after the convolution.
  GridField step(const GridField& u, double d, double* mass_in = nullptr, double* mass_out = nullptr);
  double norm(const GridField& u) const;
  double norm(std::span<const double> u) const;

 private:
  EvolveConfig cfg_;
  SemigroupCache cache_;
  std::vector<double> reaction_weight_;
  std::vector<double> norm_weight_;
};

/// Advances by one step to next_t. Throws ArgumentError if next_t <= state.t or the state is finished.
EvolutionState volterra_step(const EvolutionState& state, double next_t, Propagator& prop);

struct PicardResult {
  bool converged = false;
  bool contraction_failed = false;
  int iterations = 0;
  /// Fields at the window nodes (excluding the start).
  std::vector<GridField> path;
  std::vector<double> t_nodes;
  /// Sup over nodes of the governing-norm change in the last iteration.
  double last_difference = 0.0;
};

/// Picard iteration of the discrete map on (t0, t0 + nodes), started from the linear path.
PicardResult picard_local(const GridField& u0, double t0, std::span<const double> nodes, Propagator& prop);
/// Convenience form: uniform nodes of step min(dt, T/4) on (0, T].
PicardResult picard_local(const GridField& u0, double T, Propagator& prop);

/// Runs windows of Picard iteration up to the horizon or a blow-up verdict.
EvolutionState extend_maximal(const GridField& u0, Propagator& prop);

struct GlobalConstructionParams {
  double lambda_scale = 1.0;
  double capital_lambda = 0.0;
  /// Hardy case only.
  std::optional<double> q_exponent;
  std::optional<double> c0;
  /// Part of Lambda accumulated on the grid and the analytic tail beyond it.
  double lambda_on_grid = 0.0;
  double lambda_tail = 0.0;
  double fitted_exponent = 0.0;
  double theoretical_exponent = 0.0;
  double fit_r_squared = 0.0;
  /// False when the fitted rate disagrees with theory by more than 10% or the sup is not flat.
  bool verified = true;
  std::string note;
};

/// Theoretical exponents whose sign decides feasibility.
double henon_budget_exponent(double p, double gamma, int n_heis = 1);
double hardy_budget_exponent(double p, double gamma, double q, int n_heis = 1);

/// Lambda and lambda for the weighted construction (gamma >= 0).
/// Throws InfeasibleBudget when -Q(p-1)/2 + gamma/2 >= -1, ArgumentError for w0 == 0 or w0 < 0.
GlobalConstructionParams henon_lambda_budget(const GridField& w0, Propagator& prop, const TimeGrid& grid);

/// Lambda, C0 and lambda for the Hardy construction (-2 < gamma < 0).
/// Throws InfeasibleBudget when -Q(p-1)/(2q) + gamma/2 + 1 >= 0, ConfigError when 1/q >= 1 + gamma/Q.
GlobalConstructionParams hardy_lambda_budget(const GridField& w0, double q, Propagator& prop, const TimeGrid& grid);

struct MonotoneResult {
  bool certified = false;
  bool monotone = true;
  bool barrier_holds = true;
  int depth = 0;
  /// Sup over nodes and times of |u_{n+1} - u_n| for n = 0 .. depth-1.
  std::vector<double> successive_distance;
  /// Largest u_n / ((1+Lambda) w) seen where w > 0.
  double max_barrier_ratio = 0.0;
  /// First violation, if any.
  int violation_iterate = -1;
  double violation_t = 0.0;
  std::size_t violation_node = 0;
  std::string violation_kind;
  /// Final iterate at every grid node.
  std::vector<GridField> last_path;
};

/// Runs u_{n+1}(t_k) = P(k<-0) u0 + sum_{j<k} d_j P(k<-j) f(u_n(t_j)) from u_0(t) = P(t<-0) u0
/// and checks monotonicity in n and the barrier u_n <= (1+Lambda) w + 1e-8.
MonotoneResult monotone_global(const GridField& u0_scaled, const GlobalConstructionParams& params, Propagator& prop,
                               const TimeGrid& grid);

}  // namespace hhp
