#pragma once

// Scalar functions on a box grid over H^1 and the heat semigroup acting on them.

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hhp/hgroup.hpp"
#include "hhp/kernel.hpp"

namespace hhp {

struct GridGeometry {
  double half_width_xy = 6.0;
  double half_width_tau = 36.0;
  int n_xy = 32;
  int n_tau = 32;
  /// Cell-centred nodes x_i = -L + (i + 1/2) 2L/n; otherwise nodes include both ends.
  bool offset = true;

  /// Box with L_tau = L^2.
  static GridGeometry scaled(double half_width_xy, int n_xy, int n_tau, bool offset = true);

  /// Throws ConfigError on non-positive widths or counts, or an offset grid
  /// that still has a node at the origin (all counts odd).
  void validate() const;

  double h_xy() const;
  double h_tau() const;
  double cell_volume() const { return h_xy() * h_xy() * h_tau(); }
  double coord_xy(int i) const;
  double coord_tau(int k) const;
  std::size_t size() const { return static_cast<std::size_t>(n_xy) * n_xy * n_tau; }
  std::size_t index(int ix, int iy, int it) const {
    return (static_cast<std::size_t>(ix) * n_xy + iy) * n_tau + it;
  }
  GPoint node(int ix, int iy, int it) const { return GPoint::h1(coord_xy(ix), coord_xy(iy), coord_tau(it)); }
  bool has_origin_node() const;

  bool operator==(const GridGeometry&) const = default;
};

class GridField {
 public:
  GridField() = default;
  explicit GridField(const GridGeometry& geom, double fill = 0.0);
  GridField(const GridGeometry& geom, std::vector<double> values);

  const GridGeometry& geom() const { return geom_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double at(int ix, int iy, int it) const { return values_[geom_.index(ix, iy, it)]; }
  double& at(int ix, int iy, int it) { return values_[geom_.index(ix, iy, it)]; }

  /// True when any value is NaN or infinite.
  bool poisoned() const;
  /// Throws NumericalError naming the operation if the field is poisoned.
  void require_clean(const char* operation) const;

  double max_value() const;
  double min_value() const;
  /// Riemann-sum integral over the box.
  double mass() const;

 private:
  GridGeometry geom_;
  std::vector<double> values_;
};

enum class WeightKind { hardy_henon, phi };

struct WeightSpec {
  double gamma = 0.0;
  double p = 2.0;
  WeightKind kind = WeightKind::phi;

  /// Throws ConfigError unless gamma > -2 and p > 1.
  void validate() const;
  /// |eta|^gamma or (1 + |eta|)^{gamma/(p-1)} from the Koranyi norm.
  double at_norm(double koranyi) const;
  double at(const GPoint& p) const { return at_norm(koranyi_norm(p)); }
};

/// Koranyi norm of every node, in field order.
std::vector<double> node_norms(const GridGeometry& geom);

GridField sample(const std::function<double(const GPoint&)>& f, const GridGeometry& geom);

double sup_norm(const GridField& u);
double weighted_sup_norm(const GridField& u, const WeightSpec& w);

/// |eta|^gamma u^p node-wise.
GridField apply_weight(const GridField& u, const WeightSpec& w);

/// How grid weights are formed from the kernel.
///   raw:        h_t(s^-1 o eta) dV, the plain Riemann sum.
///   normalized: the same weights divided by their sum over the infinite lattice
///               extension, so row sums are at most one on grids that do not
///               resolve the kernel in tau.
enum class ApplyMode { raw, normalized };

/// Cylinder |x| <= radial sqrt(t), |tau| <= tau t outside which the kernel is dropped.
struct ConvolutionHull {
  double radial = 9.0;
  double tau = 45.0;

  /// Mass of h_1 (N = 1) outside the cylinder, integrated from the master table.
  double tail_mass() const;
};

/// Discrete e^{t Delta_H} on a fixed grid. Immutable once built; apply is thread safe.
class SemigroupOperator {
 public:
  SemigroupOperator(const GridGeometry& geom, double t, ApplyMode mode = ApplyMode::normalized,
                    const ConvolutionHull& hull = {});
  SemigroupOperator(const GridGeometry& geom, const KernelTable& table, ApplyMode mode = ApplyMode::normalized,
                    const ConvolutionHull& hull = {});
  ~SemigroupOperator();
  SemigroupOperator(SemigroupOperator&&) noexcept;
  SemigroupOperator& operator=(SemigroupOperator&&) noexcept;

  double t() const;
  ApplyMode mode() const;
  const GridGeometry& geom() const;
  /// Largest and smallest sum of weights over in-box sources, across output nodes.
  double max_row_sum() const;
  double min_row_sum() const;

  GridField apply(const GridField& u) const;
  void apply_into(std::span<const double> in, std::span<double> out) const;

  /// Worker threads used inside apply (default 1).
  void set_threads(int threads);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;

  static std::unique_ptr<Impl> make(const GridGeometry& geom, std::shared_ptr<const KernelTable> table,
                                    ApplyMode mode, const ConvolutionHull& hull);
};

/// Builds and caches operators for a geometry keyed by step length.
class SemigroupCache {
 public:
  explicit SemigroupCache(GridGeometry geom, ApplyMode mode = ApplyMode::normalized, int threads = 1);
  const SemigroupOperator& get(double t);
  const GridGeometry& geom() const { return geom_; }
  ApplyMode mode() const { return mode_; }

 private:
  GridGeometry geom_;
  ApplyMode mode_;
  int threads_;
  std::vector<std::pair<double, std::unique_ptr<SemigroupOperator>>> ops_;
};

GridField semigroup_apply(const GridField& u, double t, ApplyMode mode = ApplyMode::normalized);
GridField semigroup_apply(const GridField& u, const KernelTable& table, ApplyMode mode = ApplyMode::normalized);

/// Max relative deviation between S_t S_s u and S_{s+t} u over interior nodes
/// (inner half of the box, values above 1e-3 of the peak).
double semigroup_compose_check(const GridField& u, double s, double t, ApplyMode mode = ApplyMode::normalized);

/// Direct sum (u * h_t)(eta) = sum_s u(s) h_t(s^-1 o eta) dV at arbitrary targets.
std::vector<double> convolve_points(const GridField& u, const KernelTable& table, std::span<const GPoint> targets);

struct SnapshotMeta {
  double t = 0.0;
  double gamma = 0.0;
  double p = 0.0;
};

void write_snapshot(std::ostream& os, const GridField& u, const SnapshotMeta& meta);
GridField read_snapshot(std::istream& is, SnapshotMeta* meta = nullptr);

}  // namespace hhp
