#include "hhp/field.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "hhp/errors.hpp"

namespace hhp {

// ---------------------------------------------------------------------------
// Geometry and fields

GridGeometry GridGeometry::scaled(double half_width_xy, int n_xy, int n_tau, bool offset) {
  GridGeometry g;
  g.half_width_xy = half_width_xy;
  g.half_width_tau = half_width_xy * half_width_xy;
  g.n_xy = n_xy;
  g.n_tau = n_tau;
  g.offset = offset;
  return g;
}

void GridGeometry::validate() const {
  if (!(half_width_xy > 0.0) || !(half_width_tau > 0.0)) throw ConfigError("grid half widths must be positive");
  const int min_nodes = offset ? 1 : 2;
  if (n_xy < min_nodes || n_tau < min_nodes) {
    throw ConfigError("grid needs at least " + std::to_string(min_nodes) + " nodes per axis");
  }
  if (offset && has_origin_node()) {
    throw ConfigError("offset grid with odd n_xy and n_tau still has a node at the origin; use an even count");
  }
}

double GridGeometry::h_xy() const {
  return offset ? 2.0 * half_width_xy / n_xy : 2.0 * half_width_xy / (n_xy - 1);
}

double GridGeometry::h_tau() const {
  return offset ? 2.0 * half_width_tau / n_tau : 2.0 * half_width_tau / (n_tau - 1);
}

double GridGeometry::coord_xy(int i) const {
  return -half_width_xy + (offset ? (i + 0.5) : static_cast<double>(i)) * h_xy();
}

double GridGeometry::coord_tau(int k) const {
  return -half_width_tau + (offset ? (k + 0.5) : static_cast<double>(k)) * h_tau();
}

bool GridGeometry::has_origin_node() const {
  // A symmetric lattice hits zero exactly when its node count is odd.
  return (n_xy % 2 == 1) && (n_tau % 2 == 1);
}

GridField::GridField(const GridGeometry& geom, double fill) : geom_(geom), values_(geom.size(), fill) {}

GridField::GridField(const GridGeometry& geom, std::vector<double> values) : geom_(geom), values_(std::move(values)) {
  if (values_.size() != geom_.size()) {
    throw ArgumentError("field has " + std::to_string(values_.size()) + " values but the geometry needs " +
                        std::to_string(geom_.size()));
  }
}

bool GridField::poisoned() const {
  return std::any_of(values_.begin(), values_.end(), [](double v) { return !std::isfinite(v); });
}

void GridField::require_clean(const char* operation) const {
  if (poisoned()) throw NumericalError(std::string(operation) + ": field contains NaN or infinite values");
}

double GridField::max_value() const { return *std::max_element(values_.begin(), values_.end()); }
double GridField::min_value() const { return *std::min_element(values_.begin(), values_.end()); }

double GridField::mass() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * geom_.cell_volume();
}

void WeightSpec::validate() const {
  if (!(gamma > -2.0)) throw ConfigError("gamma must exceed -2");
  if (!(p > 1.0)) throw ConfigError("p must exceed 1");
}

double WeightSpec::at_norm(double koranyi) const {
  if (kind == WeightKind::phi) return std::pow(1.0 + koranyi, gamma / (p - 1.0));
  if (gamma == 0.0) return 1.0;
  return std::pow(koranyi, gamma);
}

std::vector<double> node_norms(const GridGeometry& geom) {
  std::vector<double> out(geom.size());
  for (int ix = 0; ix < geom.n_xy; ++ix) {
    const double x = geom.coord_xy(ix);
    for (int iy = 0; iy < geom.n_xy; ++iy) {
      const double y = geom.coord_xy(iy);
      for (int it = 0; it < geom.n_tau; ++it) out[geom.index(ix, iy, it)] = koranyi_from(x * x + y * y, geom.coord_tau(it));
    }
  }
  return out;
}

GridField sample(const std::function<double(const GPoint&)>& f, const GridGeometry& geom) {
  geom.validate();
  GridField u(geom);
  for (int ix = 0; ix < geom.n_xy; ++ix) {
    for (int iy = 0; iy < geom.n_xy; ++iy) {
      for (int it = 0; it < geom.n_tau; ++it) {
        const double v = f(geom.node(ix, iy, it));
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << "sample: non-finite value at node (" << ix << ", " << iy << ", " << it << ")";
          throw NumericalError(msg.str());
        }
        u.at(ix, iy, it) = v;
      }
    }
  }
  return u;
}

double sup_norm(const GridField& u) {
  u.require_clean("sup_norm");
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

double weighted_sup_norm(const GridField& u, const WeightSpec& w) {
  u.require_clean("weighted_sup_norm");
  if (w.kind == WeightKind::phi && w.gamma == 0.0) return sup_norm(u);
  const auto norms = node_norms(u.geom());
  double m = 0.0;
  for (std::size_t i = 0; i < norms.size(); ++i) m = std::max(m, std::abs(w.at_norm(norms[i]) * u.values()[i]));
  return m;
}

GridField apply_weight(const GridField& u, const WeightSpec& w) {
  u.require_clean("apply_weight");
  if (w.gamma < 0.0 && u.geom().has_origin_node()) {
    throw ConfigError("a singular weight needs a grid without a node at the origin");
  }
  const bool integer_p = std::floor(w.p) == w.p;
  const auto norms = node_norms(u.geom());
  GridField out(u.geom());
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const double v = u.values()[i];
    if (v < 0.0 && !integer_p) throw DomainError("fractional power of a negative field value");
    const double weight = w.gamma == 0.0 ? 1.0 : std::pow(norms[i], w.gamma);
    out.values()[i] = weight * std::pow(v, w.p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution hull

double ConvolutionHull::tail_mass() const {
  const auto table = master_table(1);
  const auto& r = table->radial_nodes();
  const auto& tau = table->tau_nodes();
  const double dr = r[1] - r[0];
  const double dt = tau[1] - tau[0];
  auto weight = [](std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; };
  // Trapezoid over the outside part of the stored quadrant, times 2 pi r and 2 for -tau.
  double outside = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const bool radial_out = r[i] >= radial - 1e-12;
    for (std::size_t j = 0; j < tau.size(); ++j) {
      const bool tau_out = tau[j] >= this->tau - 1e-12;
      if (!radial_out && !tau_out) continue;
      double w = 1.0;
      // Trapezoid end weights at the region boundaries and the table edge.
      if (radial_out && std::abs(r[i] - radial) < 1e-12) w *= 0.5;
      else w *= weight(i, r.size());
      if (!radial_out && std::abs(tau[j] - this->tau) < 1e-12) w *= 0.5;
      else w *= weight(j, tau.size());
      outside += w * table->at(i, j) * 2.0 * std::numbers::pi * r[i];
    }
  }
  outside *= 2.0 * dr * dt;
  // Beyond the stored table only the envelope is available.
  const double beyond = default_bounds(1).upper_mass_outside(1.0, std::min(table->radial_max(), std::sqrt(table->tau_max())),
                                                              GroupParams::for_n(1));
  return outside + beyond;
}

// ---------------------------------------------------------------------------
// Semigroup operator

namespace {

constexpr std::size_t kCacheLimit = 24u << 20;  // doubles kept for precomputed weights

struct Offset {
  int di;
  int dj;
  double r;
};

}  // namespace

struct SemigroupOperator::Impl {
  GridGeometry geom;
  double t = 0.0;
  ApplyMode mode = ApplyMode::normalized;
  int threads = 1;
  std::shared_ptr<const KernelTable> table;
  double radial_cut = 0.0;
  double tau_cut = 0.0;
  std::vector<Offset> offsets;   // all lattice offsets inside the hull
  std::vector<double> scale;     // dV / Z or dV, per output column
  bool cached = false;
  // Cached weights: for each output column, entries over in-box offsets.
  struct Entry {
    int src;     // source column index
    int m_lo;    // first tau lag
    int count;   // number of lags
    std::size_t at;  // position in weights
  };
  std::vector<std::size_t> entry_begin;
  std::vector<Entry> entries;
  std::vector<double> weights;
  double max_row = 0.0;
  double min_row = 0.0;

  // Kernel values h(r, m h_tau - s) for one (output column, offset); returns m_lo.
  int kernel_vector(int ix, int iy, const Offset& o, std::vector<double>& out) const {
    const double h = geom.h_xy();
    const double ht = geom.h_tau();
    const double x = geom.coord_xy(ix), y = geom.coord_xy(iy);
    const double dx = o.di * h, dy = o.dj * h;
    const double s = 2.0 * (x * dy - y * dx);
    const int m_lo = static_cast<int>(std::ceil((s - tau_cut) / ht));
    const int m_hi = static_cast<int>(std::floor((s + tau_cut) / ht));
    out.clear();
    for (int m = m_lo; m <= m_hi; ++m) out.push_back(table->lookup_unchecked(o.r, m * ht - s));
    return m_lo;
  }

  void build() {
    geom.validate();
    const double h = geom.h_xy();
    const int reach = static_cast<int>(std::floor(radial_cut / h));
    for (int di = -reach; di <= reach; ++di) {
      for (int dj = -reach; dj <= reach; ++dj) {
        const double r = h * std::sqrt(static_cast<double>(di * di + dj * dj));
        if (r <= radial_cut) offsets.push_back({di, dj, r});
      }
    }
    const int n = geom.n_xy;
    const std::size_t columns = static_cast<std::size_t>(n) * n;
    scale.assign(columns, geom.cell_volume());

    std::vector<double> kv;
    std::size_t needed = 0;
    for (int ix = 0; ix < n; ++ix) {
      for (int iy = 0; iy < n; ++iy) {
        double z = 0.0;
        for (const auto& o : offsets) {
          const int sx = ix - o.di, sy = iy - o.dj;
          const bool in_box = sx >= 0 && sx < n && sy >= 0 && sy < n;
          if (mode == ApplyMode::raw && !in_box) continue;
          kernel_vector(ix, iy, o, kv);
          if (in_box) needed += kv.size();
          for (double v : kv) z += v;
        }
        if (mode == ApplyMode::normalized) {
          if (!(z > 0.0)) throw NumericalError("semigroup normalization vanished");
          scale[static_cast<std::size_t>(ix) * n + iy] = 1.0 / z;
        }
      }
    }

    cached = needed <= kCacheLimit;
    if (cached) {
      entry_begin.assign(columns + 1, 0);
      weights.reserve(needed);
      for (int ix = 0; ix < n; ++ix) {
        for (int iy = 0; iy < n; ++iy) {
          const std::size_t col = static_cast<std::size_t>(ix) * n + iy;
          entry_begin[col] = entries.size();
          for (const auto& o : offsets) {
            const int sx = ix - o.di, sy = iy - o.dj;
            if (sx < 0 || sx >= n || sy < 0 || sy >= n) continue;
            const int m_lo = kernel_vector(ix, iy, o, kv);
            if (kv.empty()) continue;
            entries.push_back({sx * n + sy, m_lo, static_cast<int>(kv.size()), weights.size()});
            for (double v : kv) weights.push_back(v * scale[col]);
          }
        }
      }
      entry_begin[columns] = entries.size();
    }

    std::vector<double> ones(geom.size(), 1.0), sums(geom.size());
    apply(ones, sums);
    max_row = *std::max_element(sums.begin(), sums.end());
    min_row = *std::min_element(sums.begin(), sums.end());
  }

  static void correlate(const double* w, int m_lo, int count, const double* src, double* dst, int nt) {
    for (int c = 0; c < count; ++c) {
      const int m = m_lo + c;
      const double wm = w[c];
      const int k_begin = std::max(0, m);
      const int k_end = std::min(nt, nt + m);
      for (int k = k_begin; k < k_end; ++k) dst[k] += wm * src[k - m];
    }
  }

  void apply_columns(std::span<const double> in, std::span<double> out, int col_begin, int col_end) const {
    const int n = geom.n_xy;
    const int nt = geom.n_tau;
    std::vector<double> kv;
    for (int col = col_begin; col < col_end; ++col) {
      double* dst = out.data() + static_cast<std::size_t>(col) * nt;
      std::fill(dst, dst + nt, 0.0);
      if (cached) {
        for (std::size_t e = entry_begin[col]; e < entry_begin[col + 1]; ++e) {
          const Entry& en = entries[e];
          correlate(weights.data() + en.at, en.m_lo, en.count, in.data() + static_cast<std::size_t>(en.src) * nt, dst,
                    nt);
        }
      } else {
        const int ix = col / n, iy = col % n;
        for (const auto& o : offsets) {
          const int sx = ix - o.di, sy = iy - o.dj;
          if (sx < 0 || sx >= n || sy < 0 || sy >= n) continue;
          const int m_lo = kernel_vector(ix, iy, o, kv);
          for (double& v : kv) v *= scale[col];
          correlate(kv.data(), m_lo, static_cast<int>(kv.size()), in.data() + (static_cast<std::size_t>(sx) * n + sy) * nt,
                    dst, nt);
        }
      }
    }
  }

  void apply(std::span<const double> in, std::span<double> out) const {
    const int columns = geom.n_xy * geom.n_xy;
    if (threads <= 1) {
      apply_columns(in, out, 0, columns);
      return;
    }
    std::vector<std::jthread> pool;
    const int chunk = (columns + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const int b = w * chunk, e = std::min(columns, b + chunk);
      if (b >= e) break;
      pool.emplace_back([this, in, out, b, e] { apply_columns(in, out, b, e); });
    }
  }
};

std::unique_ptr<SemigroupOperator::Impl> SemigroupOperator::make(const GridGeometry& geom,
                                                                std::shared_ptr<const KernelTable> table,
                                                                ApplyMode mode, const ConvolutionHull& hull) {
  if (table->n() != 1) throw ArgumentError("grid convolution is implemented for N = 1");
  auto impl = std::make_unique<SemigroupOperator::Impl>();
  impl->geom = geom;
  impl->t = table->t();
  impl->mode = mode;
  impl->radial_cut = std::min(hull.radial * std::sqrt(impl->t), table->radial_max());
  impl->tau_cut = std::min(hull.tau * impl->t, table->tau_max());
  impl->table = std::move(table);
  impl->build();
  return impl;
}

SemigroupOperator::SemigroupOperator(const GridGeometry& geom, double t, ApplyMode mode, const ConvolutionHull& hull) {
  if (!(t > 0.0)) throw ArgumentError("semigroup time must be positive");
  impl_ = make(geom, std::make_shared<KernelTable>(table_for_time(t, 1)), mode, hull);
}

SemigroupOperator::SemigroupOperator(const GridGeometry& geom, const KernelTable& table, ApplyMode mode,
                                     const ConvolutionHull& hull) {
  impl_ = make(geom, std::make_shared<KernelTable>(table), mode, hull);
}

SemigroupOperator::~SemigroupOperator() = default;
SemigroupOperator::SemigroupOperator(SemigroupOperator&&) noexcept = default;
SemigroupOperator& SemigroupOperator::operator=(SemigroupOperator&&) noexcept = default;

double SemigroupOperator::t() const { return impl_->t; }
ApplyMode SemigroupOperator::mode() const { return impl_->mode; }
const GridGeometry& SemigroupOperator::geom() const { return impl_->geom; }
double SemigroupOperator::max_row_sum() const { return impl_->max_row; }
double SemigroupOperator::min_row_sum() const { return impl_->min_row; }
void SemigroupOperator::set_threads(int threads) { impl_->threads = std::max(1, threads); }

void SemigroupOperator::apply_into(std::span<const double> in, std::span<double> out) const {
  if (in.size() != impl_->geom.size() || out.size() != impl_->geom.size()) {
    throw ArgumentError("semigroup apply: buffer size does not match the geometry");
  }
  impl_->apply(in, out);
}

GridField SemigroupOperator::apply(const GridField& u) const {
  if (!(u.geom() == impl_->geom)) throw ArgumentError("semigroup apply: field geometry differs from the operator");
  u.require_clean("semigroup_apply");
  GridField out(u.geom());
  impl_->apply(u.values(), out.values());
  if (impl_->mode == ApplyMode::normalized) {
    const double in_sup = sup_norm(u);
    const double out_sup = sup_norm(out);
    if (out_sup > in_sup * (1.0 + 5e-3)) {
      std::ostringstream msg;
      msg << "semigroup apply increased the sup norm from " << in_sup << " to " << out_sup;
      throw NumericalError(msg.str());
    }
  }
  return out;
}

SemigroupCache::SemigroupCache(GridGeometry geom, ApplyMode mode, int threads)
    : geom_(geom), mode_(mode), threads_(threads) {
  geom_.validate();
}

const SemigroupOperator& SemigroupCache::get(double t) {
  for (auto& [key, op] : ops_) {
    if (std::abs(key - t) <= 1e-12 * t) return *op;
  }
  auto op = std::make_unique<SemigroupOperator>(geom_, t, mode_);
  op->set_threads(threads_);
  ops_.emplace_back(t, std::move(op));
  return *ops_.back().second;
}

GridField semigroup_apply(const GridField& u, double t, ApplyMode mode) {
  return SemigroupOperator(u.geom(), t, mode).apply(u);
}

GridField semigroup_apply(const GridField& u, const KernelTable& table, ApplyMode mode) {
  return SemigroupOperator(u.geom(), table, mode).apply(u);
}

double semigroup_compose_check(const GridField& u, double s, double t, ApplyMode mode) {
  if (!(s > 0.0) || !(t > 0.0)) throw ArgumentError("semigroup times must be positive");
  const GridGeometry& g = u.geom();
  const GridField two_step = semigroup_apply(semigroup_apply(u, s, mode), t, mode);
  const GridField one_step = semigroup_apply(u, s + t, mode);
  const double peak = sup_norm(one_step);
  if (peak == 0.0) return 0.0;
  double worst = 0.0;
  for (int ix = 0; ix < g.n_xy; ++ix) {
    for (int iy = 0; iy < g.n_xy; ++iy) {
      for (int it = 0; it < g.n_tau; ++it) {
        if (std::abs(g.coord_xy(ix)) > 0.5 * g.half_width_xy || std::abs(g.coord_xy(iy)) > 0.5 * g.half_width_xy ||
            std::abs(g.coord_tau(it)) > 0.5 * g.half_width_tau) {
          continue;
        }
        const double ref = one_step.at(ix, iy, it);
        if (std::abs(ref) < 1e-3 * peak) continue;
        worst = std::max(worst, std::abs(two_step.at(ix, iy, it) - ref) / std::abs(ref));
      }
    }
  }
  return worst;
}

std::vector<double> convolve_points(const GridField& u, const KernelTable& table, std::span<const GPoint> targets) {
  u.require_clean("convolve_points");
  if (table.n() != 1) throw ArgumentError("grid convolution is implemented for N = 1");
  const GridGeometry& g = u.geom();
  const KernelBounds& bounds = table.bounds() ? *table.bounds() : default_bounds(1);
  const double r_max = table.radial_max();
  const double tau_max = table.tau_max();
  const double t = table.t();

  struct Source {
    double x, y, tau, value;
  };
  std::vector<Source> sources;
  for (int ix = 0; ix < g.n_xy; ++ix) {
    for (int iy = 0; iy < g.n_xy; ++iy) {
      for (int it = 0; it < g.n_tau; ++it) {
        const double v = u.at(ix, iy, it);
        if (v != 0.0) sources.push_back({g.coord_xy(ix), g.coord_xy(iy), g.coord_tau(it), v});
      }
    }
  }
  std::vector<double> out;
  out.reserve(targets.size());
  for (const GPoint& eta : targets) {
    if (eta.dim() != 1) throw ArgumentError("convolve_points targets must lie in H^1");
    const double x = eta.x[0], y = eta.y[0];
    double sum = 0.0;
    for (const Source& s : sources) {
      const double dx = x - s.x, dy = y - s.y;
      const double r2 = dx * dx + dy * dy;
      const double tau = eta.tau - s.tau + 2.0 * (x * s.y - s.x * y);
      const double r = std::sqrt(r2);
      const double h = (r <= r_max && std::abs(tau) <= tau_max) ? table.lookup_unchecked(r, tau)
                                                                 : bounds.upper(t, koranyi_from(r2, tau));
      sum += s.value * h;
    }
    out.push_back(sum * g.cell_volume());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshots

void write_snapshot(std::ostream& os, const GridField& u, const SnapshotMeta& meta) {
  const GridGeometry& g = u.geom();
  const auto old_precision = os.precision(17);
  os << "# hhp field snapshot\n";
  os << "# geometry " << g.half_width_xy << ' ' << g.half_width_tau << ' ' << g.n_xy << ' ' << g.n_tau << ' '
     << (g.offset ? 1 : 0) << '\n';
  os << "# t " << meta.t << " gamma " << meta.gamma << " p " << meta.p << '\n';
  os << "i_x,i_y,i_tau,value\n";
  for (int ix = 0; ix < g.n_xy; ++ix) {
    for (int iy = 0; iy < g.n_xy; ++iy) {
      for (int it = 0; it < g.n_tau; ++it) os << ix << ',' << iy << ',' << it << ',' << u.at(ix, iy, it) << '\n';
    }
  }
  os.precision(old_precision);
}

GridField read_snapshot(std::istream& is, SnapshotMeta* meta) {
  std::string line;
  GridGeometry g;
  SnapshotMeta m;
  bool have_geometry = false;
  while (std::getline(is, line)) {
    if (line.rfind("# geometry ", 0) == 0) {
      std::istringstream ss(line.substr(11));
      int off = 1;
      ss >> g.half_width_xy >> g.half_width_tau >> g.n_xy >> g.n_tau >> off;
      if (!ss) throw ConfigError("snapshot: malformed geometry line");
      g.offset = off != 0;
      have_geometry = true;
    } else if (line.rfind("# t ", 0) == 0) {
      std::istringstream ss(line.substr(2));
      std::string key;
      while (ss >> key) {
        double v = 0.0;
        ss >> v;
        if (key == "t") m.t = v;
        if (key == "gamma") m.gamma = v;
        if (key == "p") m.p = v;
      }
    } else if (line.rfind("i_x", 0) == 0) {
      break;
    }
  }
  if (!have_geometry) throw ConfigError("snapshot: missing geometry header");
  g.validate();
  GridField u(g, std::numeric_limits<double>::quiet_NaN());
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    int ix, iy, it;
    double v;
    char c1, c2, c3;
    std::istringstream ss(line);
    if (!(ss >> ix >> c1 >> iy >> c2 >> it >> c3 >> v) || ix < 0 || ix >= g.n_xy || iy < 0 || iy >= g.n_xy ||
        it < 0 || it >= g.n_tau) {
      throw ConfigError("snapshot: malformed row '" + line + "'");
    }
    u.at(ix, iy, it) = v;
    ++rows;
  }
  if (rows != g.size()) throw ConfigError("snapshot: expected " + std::to_string(g.size()) + " rows");
  if (meta) *meta = m;
  return u;
}

}  // namespace hhp
