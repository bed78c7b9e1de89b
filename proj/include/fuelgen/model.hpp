#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "domain.hpp"
#include "errors.hpp"

namespace fuelgen {

/// The four calibrated parameters of the generative model.
struct Theta {
  double rho = 3.0;     ///< GP lengthscale, meters
  double lambda = 2.0;  ///< disk centers per square meter
  double mu = 0.5;      ///< radius mean, meters
  double sigma = 0.2;   ///< radius standard deviation, meters

  /// lambda == 0 is admitted (it generates empty layouts); the rest must be > 0.
  void validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("rho must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw ParameterError("lambda must be non-negative");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ParameterError("mu must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be positive");
  }

  friend bool operator==(const Theta&, const Theta&) = default;
};

struct Disk {
  Point center;
  double radius = 0.0;
};

/// A germ-grain realization; the binary map is the union of the disks.
struct DiskSet {
  Domain domain;
  std::vector<Disk> disks;
  std::optional<std::uint64_t> seed;
  std::optional<Theta> theta;  ///< absent for observed data

  std::size_t size() const noexcept { return disks.size(); }
  bool empty() const noexcept { return disks.empty(); }
};

/// Occupancy raster over a domain. Row 0 is the southern-most row (y_min).
struct BinaryRaster {
  Domain domain;
  double pixel_size = 0.05;
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> bits;

  bool at(int ix, int iy) const { return bits[static_cast<std::size_t>(iy) * nx + ix] != 0; }
  void set(int ix, int iy, bool v) { bits[static_cast<std::size_t>(iy) * nx + ix] = v ? 1 : 0; }
  Point pixel_center(int ix, int iy) const {
    return {domain.x_min + (ix + 0.5) * pixel_size, domain.y_min + (iy + 0.5) * pixel_size};
  }
  std::size_t occupied() const {
    std::size_t c = 0;
    for (auto b : bits) c += b != 0;
    return c;
  }
};

/// Raster dimensions for a domain at a pixel size: ceil(extent / pixel).
inline BinaryRaster make_raster(const Domain& domain, double pixel_size) {
  if (!(pixel_size > 0.0)) throw ParameterError("pixel size must be positive");
  if (pixel_size > domain.width() || pixel_size > domain.height())
    throw ParameterError("pixel size larger than the domain");
  BinaryRaster raster;
  raster.domain = domain;
  raster.pixel_size = pixel_size;
  raster.nx = static_cast<int>(std::ceil(domain.width() / pixel_size - 1e-9));
  raster.ny = static_cast<int>(std::ceil(domain.height() / pixel_size - 1e-9));
  raster.bits.assign(static_cast<std::size_t>(raster.nx) * raster.ny, 0);
  return raster;
}

}  // namespace fuelgen
