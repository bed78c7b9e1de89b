#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace fuelgen {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Rectangular study region in meters, carrying the d x d resolution of the
/// grid on which the intensity field is referenced.
struct Domain {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 15.0;
  double y_max = 15.0;
  int grid = 32;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }

  bool contains(Point p) const noexcept {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }

  double spacing_x() const noexcept { return width() / (grid - 1); }
  double spacing_y() const noexcept { return height() / (grid - 1); }
  double node_x(int i) const noexcept { return x_min + i * spacing_x(); }
  double node_y(int j) const noexcept { return y_min + j * spacing_y(); }

  void validate() const {
    if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
          std::isfinite(y_max)))
      throw ParameterError("domain extent must be finite");
    if (!(x_max > x_min) || !(y_max > y_min))
      throw ParameterError("domain requires x_max > x_min and y_max > y_min");
    if (grid < 2) throw ParameterError("domain grid resolution must be at least 2");
  }

  friend bool operator==(const Domain&, const Domain&) = default;
};

/// Smallest d with node spacing <= rho_min / 2 on both axes, floored at 32.
inline int default_grid_resolution(const Domain& domain, double rho_min) {
  if (!(rho_min > 0.0)) throw ParameterError("rho_min must be positive");
  const double extent = std::max(domain.width(), domain.height());
  const int needed = static_cast<int>(std::ceil(extent / (0.5 * rho_min))) + 1;
  return std::max(32, needed);
}

inline Domain square_domain(double side, int grid = 32) {
  return Domain{0.0, 0.0, side, side, grid};
}

}  // namespace fuelgen
