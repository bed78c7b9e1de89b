#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "model.hpp"

namespace fuelgen {

/// Uniform bucket grid over the disks' bounding boxes. Each disk is listed in
/// every bucket its bounding box overlaps.
class DiskIndex {
 public:
  explicit DiskIndex(const DiskSet& set) {
    const auto& disks = set.disks;
    x0_ = set.domain.x_min;
    y0_ = set.domain.y_min;
    double x1 = set.domain.x_max, y1 = set.domain.y_max;
    double mean_r = 0.0;
    for (const Disk& d : disks) {
      x0_ = std::min(x0_, d.center.x - d.radius);
      y0_ = std::min(y0_, d.center.y - d.radius);
      x1 = std::max(x1, d.center.x + d.radius);
      y1 = std::max(y1, d.center.y + d.radius);
      mean_r += d.radius;
    }
    const double extent = std::max(x1 - x0_, y1 - y0_);
    if (!disks.empty()) mean_r /= static_cast<double>(disks.size());
    double bucket = std::clamp(mean_r, extent / 128.0, extent);
    if (!(bucket > 0.0)) bucket = 1.0;
    inv_bucket_ = 1.0 / bucket;
    nx_ = std::max(1, static_cast<int>((x1 - x0_) * inv_bucket_) + 1);
    ny_ = std::max(1, static_cast<int>((y1 - y0_) * inv_bucket_) + 1);

    spans_.resize(disks.size());
    offsets_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (std::size_t k = 0; k < disks.size(); ++k) {
      const Disk& d = disks[k];
      Span s{bucket_x(d.center.x - d.radius), bucket_y(d.center.y - d.radius), bucket_x(d.center.x + d.radius),
             bucket_y(d.center.y + d.radius)};
      spans_[k] = s;
      for (int by = s.by0; by <= s.by1; ++by)
        for (int bx = s.bx0; bx <= s.bx1; ++bx) ++offsets_[static_cast<std::size_t>(by) * nx_ + bx + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
    items_.resize(offsets_.back());
    std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::uint32_t k = 0; k < disks.size(); ++k) {
      const Span& s = spans_[k];
      const Disk& d = disks[k];
      const Item item{d.center.x, d.center.y, d.radius * d.radius};
      for (int by = s.by0; by <= s.by1; ++by)
        for (int bx = s.bx0; bx <= s.bx1; ++bx) items_[fill[static_cast<std::size_t>(by) * nx_ + bx]++] = item;
    }
  }

  /// True if p lies in the closed union of the disks.
  bool covered(Point p) const {
    const double fx = (p.x - x0_) * inv_bucket_, fy = (p.y - y0_) * inv_bucket_;
    if (!(fx >= 0.0) || !(fy >= 0.0)) return false;
    const int bx = static_cast<int>(fx), by = static_cast<int>(fy);
    if (bx >= nx_ || by >= ny_) return false;
    const std::size_t b = static_cast<std::size_t>(by) * nx_ + bx;
    bool hit = false;
    for (std::uint32_t i = offsets_[b], e = offsets_[b + 1]; i < e; ++i) {
      const Item& d = items_[i];
      const double dx = p.x - d.x, dy = p.y - d.y;
      hit |= dx * dx + dy * dy <= d.r2;
    }
    return hit;
  }

 private:
  struct Span {
    int bx0, by0, bx1, by1;
  };
  struct Item {
    double x, y, r2;
  };

  int bucket_x(double x) const { return std::clamp(static_cast<int>(std::floor((x - x0_) * inv_bucket_)), 0, nx_ - 1); }
  int bucket_y(double y) const { return std::clamp(static_cast<int>(std::floor((y - y0_) * inv_bucket_)), 0, ny_ - 1); }

  double x0_ = 0.0, y0_ = 0.0, inv_bucket_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<Span> spans_;
  std::vector<std::uint32_t> offsets_;
  std::vector<Item> items_;
};

/// All pairs i < j with |s_i - s_j| <= r_i + r_j, each reported once.
/// Disks are binned by center into cells at least 2 r_max wide, so only the
/// own cell and four forward neighbors need checking.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> overlapping_pairs(const std::vector<Disk>& disks) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  const std::size_t n = disks.size();
  if (n < 2) return pairs;
  double x0 = disks[0].center.x, y0 = disks[0].center.y, x1 = x0, y1 = y0, r_max = 0.0;
  for (const Disk& d : disks) {
    x0 = std::min(x0, d.center.x);
    y0 = std::min(y0, d.center.y);
    x1 = std::max(x1, d.center.x);
    y1 = std::max(y1, d.center.y);
    r_max = std::max(r_max, d.radius);
  }
  const double extent = std::max({x1 - x0, y1 - y0, 1e-12});
  const double cell = std::max(2.0 * r_max, extent / 256.0);
  const double inv = 1.0 / cell;
  const int nx = static_cast<int>((x1 - x0) * inv) + 1, ny = static_cast<int>((y1 - y0) * inv) + 1;

  std::vector<std::uint32_t> start(static_cast<std::size_t>(nx) * ny + 1, 0), cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int cx = std::min(nx - 1, static_cast<int>((disks[i].center.x - x0) * inv));
    const int cy = std::min(ny - 1, static_cast<int>((disks[i].center.y - y0) * inv));
    cell_of[i] = static_cast<std::uint32_t>(cy * nx + cx);
    ++start[cell_of[i] + 1];
  }
  for (std::size_t c = 1; c < start.size(); ++c) start[c] += start[c - 1];
  // structure-of-arrays copy in cell order
  std::vector<double> xs(n), ys(n), rs(n);
  std::vector<std::uint32_t> ids(n);
  {
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t k = fill[cell_of[i]]++;
      xs[k] = disks[i].center.x;
      ys[k] = disks[i].center.y;
      rs[k] = disks[i].radius;
      ids[k] = i;
    }
  }
  auto check = [&](std::uint32_t a, std::uint32_t b_lo, std::uint32_t b_hi) {
    const double ax = xs[a], ay = ys[a], ar = rs[a];
    for (std::uint32_t b = b_lo; b < b_hi; ++b) {
      const double dx = ax - xs[b], dy = ay - ys[b], reach = ar + rs[b];
      if (dx * dx + dy * dy <= reach * reach) pairs.emplace_back(std::min(ids[a], ids[b]), std::max(ids[a], ids[b]));
    }
  };
  for (int cy = 0; cy < ny; ++cy)
    for (int cx = 0; cx < nx; ++cx) {
      const std::uint32_t c = static_cast<std::uint32_t>(cy * nx + cx);
      for (std::uint32_t a = start[c]; a < start[c + 1]; ++a) {
        check(a, a + 1, start[c + 1]);
        if (cx + 1 < nx) check(a, start[c + 1], start[c + 2]);
        if (cy + 1 < ny) {
          const std::uint32_t up = c + static_cast<std::uint32_t>(nx);
          check(a, start[up - (cx > 0 ? 1 : 0)], start[up + (cx + 1 < nx ? 2 : 1)]);
        }
      }
    }
  return pairs;
}

}  // namespace fuelgen
