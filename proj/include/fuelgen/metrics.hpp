#pragma once

// Summary metrics of a binary mosaic, computed either from a disk
// representation or from an occupancy raster.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disk_index.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "model.hpp"
#include "random.hpp"
#include "union_find.hpp"

namespace fuelgen {

enum class Metric : std::size_t {
  Area,
  Perimeter,
  Ncc,
  Holes,
  MoranI,
  GearyC,
  SubareaSum,
  NFullCells,
  NEmptyCells,
  SubareaVariance,
  LambdaHat,
  MuHat,
  SigmaHat,
};

inline constexpr std::size_t kMetricCount = 13;

inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "area",         "perimeter",     "ncc",           "holes",           "moran_i",
    "geary_c",      "subarea_sum",   "n_full_cells",  "n_empty_cells",   "subarea_variance",
    "lambda_hat",   "mu_hat",        "sigma_hat"};

inline std::optional<Metric> metric_from_name(std::string_view name) {
  for (std::size_t k = 0; k < kMetricCount; ++k)
    if (kMetricNames[k] == name) return static_cast<Metric>(k);
  return std::nullopt;
}

/// Fixed-order metric vector. A set flag bit marks an entry that is undefined
/// (or absent for the input kind); its value is imputed as 0.
struct MetricsVector {
  std::array<double, kMetricCount> values{};
  std::uint32_t flags = 0;

  double& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  double operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
  bool flagged(Metric m) const { return (flags >> static_cast<std::size_t>(m)) & 1u; }
  void flag(Metric m) {
    flags |= 1u << static_cast<std::size_t>(m);
    (*this)[m] = 0.0;
  }
};

enum class Adjacency { Rook, Queen };

struct GridSpec {
  double cell_size = 1.0;
  Adjacency adjacency = Adjacency::Rook;
  bool row_standardize = false;
};

/// Resolution settings for the disk path. The defaults are sized for use
/// inside the calibration loop, where thousands of vectors are computed.
struct MetricsConfig {
  std::size_t area_samples = 2000;
  int perimeter_points = 64;
  double hole_pixel = 0.1;
  int cell_samples = 16;
  GridSpec grid;

  void validate() const {
    if (area_samples < 1000) throw ParameterError("area_samples must be at least 1000");
    if (perimeter_points < 64) throw ParameterError("perimeter_points must be at least 64");
    if (!(hole_pixel > 0.0)) throw ParameterError("hole_pixel must be positive");
    if (cell_samples < 1) throw ParameterError("cell_samples must be positive");
    if (!(grid.cell_size > 0.0)) throw ParameterError("grid cell size must be positive");
  }
};

// ---------------------------------------------------------------------------
// Disk-based metrics

/// Fraction of uniform samples on the domain covered by the union of disks.
inline double disk_area_mc(const DiskSet& set, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw ParameterError("area estimate needs at least one sample");
  if (set.empty()) return 0.0;
  const DiskIndex index(set);
  const Domain& dom = set.domain;
  Engine rng = make_engine(seed);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Point p{dom.x_min + uniform01(rng) * dom.width(), dom.y_min + uniform01(rng) * dom.height()};
    hits += index.covered(p);
  }
  return static_cast<double>(hits) / static_cast<double>(n_samples);
}

namespace detail {

using DiskPairs = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

inline std::size_t ncc_from_pairs(std::size_t n, const DiskPairs& pairs) {
  if (n == 0) return 0;
  UnionFind uf(n);
  for (const auto& [i, j] : pairs) uf.unite(i, j);
  return uf.sets();
}

inline double perimeter_from_pairs(const DiskSet& set, const DiskPairs& pairs, int points_per_disk) {
  const auto& disks = set.disks;
  const std::size_t n = disks.size();
  if (n == 0) return 0.0;
  const std::size_t P = static_cast<std::size_t>(points_per_disk);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> cosv(P), sinv(P);
  for (std::size_t k = 0; k < P; ++k) {
    const double t = two_pi * static_cast<double>(k) / static_cast<double>(P);
    cosv[k] = std::cos(t);
    sinv[k] = std::sin(t);
  }
  // CSR adjacency over the overlap graph
  std::vector<std::uint32_t> start(n + 1, 0), adj(2 * pairs.size());
  for (const auto& [i, j] : pairs) {
    ++start[i + 1];
    ++start[j + 1];
  }
  for (std::size_t i = 1; i <= n; ++i) start[i] += start[i - 1];
  {
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (const auto& [i, j] : pairs) {
      adj[fill[i]++] = j;
      adj[fill[j]++] = i;
    }
  }

  const Domain& dom = set.domain;
  std::vector<std::uint8_t> hidden(P);
  std::size_t retained = 0;
  double total_perimeter = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Disk& a = disks[i];
    total_perimeter += two_pi * a.radius;
    std::fill(hidden.begin(), hidden.end(), std::uint8_t{0});
    bool all_hidden = false;
    for (std::uint32_t e = start[i]; e < start[i + 1] && !all_hidden; ++e) {
      const Disk& b = disks[adj[e]];
      const double ox = a.center.x - b.center.x, oy = a.center.y - b.center.y;
      const double dist = std::sqrt(ox * ox + oy * oy);
      if (dist >= a.radius + b.radius || dist + b.radius <= a.radius) continue;
      if (dist + a.radius < b.radius) {
        all_hidden = true;
        break;
      }
      const double ra = a.radius, rb2 = b.radius * b.radius;
      std::uint8_t* h = hidden.data();
      for (std::size_t k = 0; k < P; ++k) {
        const double px = ox + ra * cosv[k], py = oy + ra * sinv[k];
        h[k] |= static_cast<std::uint8_t>(px * px + py * py < rb2);
      }
    }
    if (all_hidden) continue;
    const bool inside_domain = a.center.x - a.radius >= dom.x_min && a.center.x + a.radius <= dom.x_max &&
                               a.center.y - a.radius >= dom.y_min && a.center.y + a.radius <= dom.y_max;
    if (!inside_domain) {
      for (std::size_t k = 0; k < P; ++k)
        if (!dom.contains({a.center.x + a.radius * cosv[k], a.center.y + a.radius * sinv[k]})) hidden[k] = 1;
    }
    std::size_t hid = 0;
    for (std::uint8_t v : hidden) hid += v;
    retained += P - hid;
  }
  return static_cast<double>(retained) / static_cast<double>(P * n) * total_perimeter;
}

}  // namespace detail

/// Places `points_per_disk` equally spaced points on each circle, discards
/// points strictly inside another disk or outside the domain, and scales the
/// total analytic perimeter by the retained fraction.
inline double disk_perimeter(const DiskSet& set, int points_per_disk) {
  if (points_per_disk < 1) throw ParameterError("points_per_disk must be positive");
  if (set.empty()) return 0.0;
  return detail::perimeter_from_pairs(set, overlapping_pairs(set.disks), points_per_disk);
}

/// Connected components of the graph with an edge wherever |s_i - s_j| <= r_i + r_j.
inline std::size_t disk_ncc(const DiskSet& set) {
  if (set.empty()) return 0;
  return detail::ncc_from_pairs(set.size(), overlapping_pairs(set.disks));
}

// ---------------------------------------------------------------------------
// Raster metrics

struct RasterMetrics {
  double area = 0.0;       ///< occupied fraction
  double perimeter = 0.0;  ///< meters
  std::size_t ncc = 0;
  std::size_t holes = 0;
};

namespace detail {

/// Labels components of pixels whose occupancy equals `value` by merging
/// row runs. Returns the component count and, optionally, how many touch the
/// raster border.
inline std::size_t label_components(const BinaryRaster& r, bool value, bool eight_connected,
                                    std::size_t* touching_border = nullptr) {
  struct Run {
    int x0, x1;
  };
  const int nx = r.nx, ny = r.ny;
  const std::uint8_t want = value ? 1 : 0;
  std::vector<Run> runs;
  std::vector<std::size_t> row_start(static_cast<std::size_t>(ny) + 1, 0);
  for (int y = 0; y < ny; ++y) {
    row_start[y] = runs.size();
    const std::uint8_t* row = r.bits.data() + static_cast<std::size_t>(y) * nx;
    int x = 0;
    while (x < nx) {
      while (x < nx && (row[x] != 0) != (want != 0)) ++x;
      if (x >= nx) break;
      const int x0 = x;
      while (x < nx && (row[x] != 0) == (want != 0)) ++x;
      runs.push_back({x0, x - 1});
    }
  }
  row_start[ny] = runs.size();
  if (runs.empty()) {
    if (touching_border) *touching_border = 0;
    return 0;
  }
  UnionFind uf(runs.size());
  const int slack = eight_connected ? 1 : 0;
  for (int y = 1; y < ny; ++y) {
    std::size_t a = row_start[y - 1];
    const std::size_t a_end = row_start[y];
    std::size_t b = row_start[y];
    const std::size_t b_end = row_start[y + 1];
    while (a < a_end && b < b_end) {
      const Run& ra = runs[a];
      const Run& rb = runs[b];
      if (ra.x1 + slack >= rb.x0 && rb.x1 + slack >= ra.x0)
        uf.unite(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
      if (ra.x1 < rb.x1) ++a;
      else ++b;
    }
  }
  if (touching_border) {
    std::vector<std::uint8_t> border(runs.size(), 0);
    for (int y = 0; y < ny; ++y)
      for (std::size_t k = row_start[y]; k < row_start[y + 1]; ++k)
        if (y == 0 || y == ny - 1 || runs[k].x0 == 0 || runs[k].x1 == nx - 1)
          border[uf.find(static_cast<std::uint32_t>(k))] = 1;
    std::size_t count = 0;
    for (std::size_t k = 0; k < runs.size(); ++k)
      if (uf.find(static_cast<std::uint32_t>(k)) == k) count += border[k];
    *touching_border = count;
  }
  return uf.sets();
}

}  // namespace detail

/// Perimeter: occupied pixels with an edge-adjacent unoccupied neighbor count
/// one pixel length; those exposed only diagonally count sqrt(2). Pixels
/// outside the raster are not treated as unoccupied.
inline double raster_perimeter(const BinaryRaster& r) {
  const int nx = r.nx, ny = r.ny;
  auto empty_at = [&](int x, int y) { return x >= 0 && y >= 0 && x < nx && y < ny && !r.at(x, y); };
  double units = 0.0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      if (!r.at(x, y)) continue;
      if (empty_at(x - 1, y) || empty_at(x + 1, y) || empty_at(x, y - 1) || empty_at(x, y + 1)) {
        units += 1.0;
      } else if (empty_at(x - 1, y - 1) || empty_at(x + 1, y - 1) || empty_at(x - 1, y + 1) ||
                 empty_at(x + 1, y + 1)) {
        units += std::numbers::sqrt2;
      }
    }
  return units * r.pixel_size;
}

/// Holes: 4-connected components of unoccupied pixels that do not touch the border.
inline std::size_t raster_holes(const BinaryRaster& r) {
  std::size_t border = 0;
  const std::size_t total = detail::label_components(r, false, false, &border);
  return total - border;
}

inline RasterMetrics raster_metrics(const BinaryRaster& r) {
  if (r.nx <= 0 || r.ny <= 0 || r.bits.empty()) throw InputError("raster has zero size");
  RasterMetrics m;
  m.area = static_cast<double>(r.occupied()) / static_cast<double>(r.bits.size());
  m.perimeter = raster_perimeter(r);
  m.ncc = detail::label_components(r, true, true);
  m.holes = raster_holes(r);
  return m;
}

/// True when pixel_size <= min radius / 4, the resolution at which raster
/// hole counts are trusted.
inline bool hole_resolution_ok(const DiskSet& set, double pixel_size) {
  for (const Disk& d : set.disks)
    if (pixel_size > d.radius / 4.0) return false;
  return true;
}

inline std::size_t disk_holes(const DiskSet& set, double pixel_size) {
  if (set.empty()) return 0;
  return raster_holes(rasterize(set, pixel_size));
}

// ---------------------------------------------------------------------------
// Grid (sub-domain) metrics

struct Autocorrelation {
  double moran_i = 0.0;
  double geary_c = 0.0;
  bool defined = false;  ///< false when all cell values are identical
};

/// Moran's I and Geary's C of cell values laid out row-major (nx columns).
inline Autocorrelation autocorrelation(const std::vector<double>& values, int nx, int ny,
                                       const GridSpec& spec = {}) {
  const std::size_t n = values.size();
  if (n != static_cast<std::size_t>(nx) * ny) throw InputError("cell value count does not match grid");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  Autocorrelation out;
  if (!(ss > 1e-24 * static_cast<double>(n)) || n < 2) return out;

  double s0 = 0.0, cross = 0.0, diff2 = 0.0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * nx + x;
      int degree = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (spec.adjacency == Adjacency::Rook && dx != 0 && dy != 0) continue;
          const int xx = x + dx, yy = y + dy;
          if (xx >= 0 && yy >= 0 && xx < nx && yy < ny) ++degree;
        }
      if (degree == 0) continue;
      const double w = spec.row_standardize ? 1.0 / degree : 1.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (spec.adjacency == Adjacency::Rook && dx != 0 && dy != 0) continue;
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= nx || yy >= ny) continue;
          const std::size_t j = static_cast<std::size_t>(yy) * nx + xx;
          s0 += w;
          cross += w * (values[i] - mean) * (values[j] - mean);
          diff2 += w * (values[i] - values[j]) * (values[i] - values[j]);
        }
    }
  if (s0 == 0.0) return out;
  const double nd = static_cast<double>(n);
  out.moran_i = nd / s0 * cross / ss;
  out.geary_c = (nd - 1.0) * diff2 / (2.0 * s0 * ss);
  out.defined = true;
  return out;
}

struct GridMetrics {
  double moran_i = 0.0;
  double geary_c = 0.0;
  double subarea_sum = 0.0;  ///< sum of covered cell areas / domain area
  std::size_t n_full = 0;
  std::size_t n_empty = 0;
  double subarea_variance = 0.0;
  bool autocorrelation_defined = false;
  std::size_t cells = 0;
};

struct CellLayout {
  int nx = 0, ny = 0;
  double cell = 1.0;
};

/// Cells of the given size tiling the domain; the last row/column is clipped.
inline CellLayout cell_layout(const Domain& dom, double cell_size) {
  if (!(cell_size > 0.0)) throw ParameterError("cell size must be positive");
  CellLayout c;
  c.cell = cell_size;
  c.nx = std::max(1, static_cast<int>(std::ceil(dom.width() / cell_size - 1e-9)));
  c.ny = std::max(1, static_cast<int>(std::ceil(dom.height() / cell_size - 1e-9)));
  return c;
}

/// Summaries of per-cell covered proportions. `proportions` is row-major;
/// `full_threshold` is the proportion at or above which a cell counts as full.
inline GridMetrics summarize_cells(const Domain& dom, const CellLayout& layout, const std::vector<double>& proportions,
                                   double full_threshold, const GridSpec& spec) {
  GridMetrics g;
  g.cells = proportions.size();
  double covered = 0.0, mean = 0.0;
  for (int cy = 0; cy < layout.ny; ++cy)
    for (int cx = 0; cx < layout.nx; ++cx) {
      const double w = std::min(layout.cell, dom.width() - cx * layout.cell);
      const double h = std::min(layout.cell, dom.height() - cy * layout.cell);
      const double p = proportions[static_cast<std::size_t>(cy) * layout.nx + cx];
      covered += p * w * h;
      mean += p;
      if (p >= full_threshold - 1e-12) ++g.n_full;
      if (p == 0.0) ++g.n_empty;
    }
  g.subarea_sum = covered / dom.area();
  const double n = static_cast<double>(g.cells);
  mean /= n;
  double ss = 0.0;
  for (double p : proportions) ss += (p - mean) * (p - mean);
  g.subarea_variance = g.cells > 1 ? ss / (n - 1.0) : 0.0;
  const Autocorrelation ac = autocorrelation(proportions, layout.nx, layout.ny, spec);
  g.moran_i = ac.moran_i;
  g.geary_c = ac.geary_c;
  g.autocorrelation_defined = ac.defined;
  return g;
}

/// Per-cell covered proportion by Monte Carlo, then the grid summaries.
/// A cell is full when its proportion is >= 1 - 1/samples_per_cell.
inline GridMetrics grid_metrics(const DiskSet& set, const GridSpec& spec, int samples_per_cell, std::uint64_t seed) {
  if (samples_per_cell < 1) throw ParameterError("samples_per_cell must be positive");
  const Domain& dom = set.domain;
  const CellLayout layout = cell_layout(dom, spec.cell_size);
  std::vector<double> prop(static_cast<std::size_t>(layout.nx) * layout.ny, 0.0);
  if (!set.empty()) {
    const DiskIndex index(set);
    Engine rng = make_engine(seed);
    for (int cy = 0; cy < layout.ny; ++cy)
      for (int cx = 0; cx < layout.nx; ++cx) {
        const double x0 = dom.x_min + cx * layout.cell, y0 = dom.y_min + cy * layout.cell;
        const double w = std::min(layout.cell, dom.x_max - x0), h = std::min(layout.cell, dom.y_max - y0);
        int hits = 0;
        for (int s = 0; s < samples_per_cell; ++s) {
          const Point p{x0 + uniform01(rng) * w, y0 + uniform01(rng) * h};
          hits += index.covered(p);
        }
        prop[static_cast<std::size_t>(cy) * layout.nx + cx] = static_cast<double>(hits) / samples_per_cell;
      }
  }
  return summarize_cells(dom, layout, prop, 1.0 - 1.0 / samples_per_cell, spec);
}

/// Grid summaries of a raster: cell proportions are occupied-pixel fractions
/// over the pixels whose centers fall in the cell.
inline GridMetrics grid_metrics(const BinaryRaster& r, const GridSpec& spec) {
  const Domain& dom = r.domain;
  const CellLayout layout = cell_layout(dom, spec.cell_size);
  const std::size_t ncell = static_cast<std::size_t>(layout.nx) * layout.ny;
  std::vector<double> occ(ncell, 0.0), tot(ncell, 0.0);
  for (int iy = 0; iy < r.ny; ++iy)
    for (int ix = 0; ix < r.nx; ++ix) {
      const Point c = r.pixel_center(ix, iy);
      const int cx = std::clamp(static_cast<int>((c.x - dom.x_min) / layout.cell), 0, layout.nx - 1);
      const int cy = std::clamp(static_cast<int>((c.y - dom.y_min) / layout.cell), 0, layout.ny - 1);
      const std::size_t k = static_cast<std::size_t>(cy) * layout.nx + cx;
      tot[k] += 1.0;
      occ[k] += r.at(ix, iy);
    }
  double min_pixels = 1e300;
  for (std::size_t k = 0; k < ncell; ++k) {
    if (tot[k] > 0.0) occ[k] /= tot[k];
    min_pixels = std::min(min_pixels, std::max(tot[k], 1.0));
  }
  return summarize_cells(dom, layout, occ, 1.0 - 1.0 / min_pixels, spec);
}

// ---------------------------------------------------------------------------
// Empirical parameter estimates

struct EmpiricalEstimates {
  double lambda_hat = 0.0;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  bool mu_defined = false;     ///< n >= 1
  bool sigma_defined = false;  ///< n >= 2
};

inline EmpiricalEstimates empirical_estimates(const DiskSet& set) {
  EmpiricalEstimates e;
  const std::size_t n = set.size();
  e.lambda_hat = static_cast<double>(n) / (set.domain.width() * set.domain.height());
  if (n >= 1) {
    double s = 0.0;
    for (const Disk& d : set.disks) s += d.radius;
    e.mu_hat = s / static_cast<double>(n);
    e.mu_defined = true;
  }
  if (n >= 2) {
    double ss = 0.0;
    for (const Disk& d : set.disks) ss += (d.radius - e.mu_hat) * (d.radius - e.mu_hat);
    e.sigma_hat = std::sqrt(ss / static_cast<double>(n - 1));
    e.sigma_defined = true;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Assembled vector

namespace stream {
inline constexpr std::uint64_t kAreaSamples = 11;
inline constexpr std::uint64_t kGridSamples = 12;
}  // namespace stream

inline MetricsVector metrics_vector(const DiskSet& set, const MetricsConfig& cfg, std::uint64_t seed) {
  MetricsVector v;
  v[Metric::Area] = set.empty() ? 0.0 : disk_area_mc(set, cfg.area_samples, derive_seed(seed, {stream::kAreaSamples}));
  if (!set.empty()) {
    const detail::DiskPairs pairs = overlapping_pairs(set.disks);
    v[Metric::Perimeter] = detail::perimeter_from_pairs(set, pairs, cfg.perimeter_points);
    v[Metric::Ncc] = static_cast<double>(detail::ncc_from_pairs(set.size(), pairs));
  }
  v[Metric::Holes] = static_cast<double>(disk_holes(set, cfg.hole_pixel));
  const GridMetrics g = grid_metrics(set, cfg.grid, cfg.cell_samples, derive_seed(seed, {stream::kGridSamples}));
  v[Metric::MoranI] = g.moran_i;
  v[Metric::GearyC] = g.geary_c;
  if (!g.autocorrelation_defined) {
    v.flag(Metric::MoranI);
    v.flag(Metric::GearyC);
  }
  v[Metric::SubareaSum] = g.subarea_sum;
  v[Metric::NFullCells] = static_cast<double>(g.n_full);
  v[Metric::NEmptyCells] = static_cast<double>(g.n_empty);
  v[Metric::SubareaVariance] = g.subarea_variance;
  const EmpiricalEstimates e = empirical_estimates(set);
  v[Metric::LambdaHat] = e.lambda_hat;
  v[Metric::MuHat] = e.mu_hat;
  v[Metric::SigmaHat] = e.sigma_hat;
  if (!e.mu_defined) v.flag(Metric::MuHat);
  if (!e.sigma_defined) v.flag(Metric::SigmaHat);
  return v;
}

/// Raster-path vector; the disk-only entries (lambda_hat, mu_hat, sigma_hat)
/// are flagged absent.
inline MetricsVector metrics_vector(const BinaryRaster& r, const GridSpec& spec) {
  MetricsVector v;
  const RasterMetrics rm = raster_metrics(r);
  v[Metric::Area] = rm.area;
  v[Metric::Perimeter] = rm.perimeter;
  v[Metric::Ncc] = static_cast<double>(rm.ncc);
  v[Metric::Holes] = static_cast<double>(rm.holes);
  const GridMetrics g = grid_metrics(r, spec);
  v[Metric::MoranI] = g.moran_i;
  v[Metric::GearyC] = g.geary_c;
  if (!g.autocorrelation_defined) {
    v.flag(Metric::MoranI);
    v.flag(Metric::GearyC);
  }
  v[Metric::SubareaSum] = g.subarea_sum;
  v[Metric::NFullCells] = static_cast<double>(g.n_full);
  v[Metric::NEmptyCells] = static_cast<double>(g.n_empty);
  v[Metric::SubareaVariance] = g.subarea_variance;
  v.flag(Metric::LambdaHat);
  v.flag(Metric::MuHat);
  v.flag(Metric::SigmaHat);
  return v;
}

}  // namespace fuelgen
