#include "slpm/scaling.hpp"

#include <cmath>
#include <stdexcept>

namespace slpm {

ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3)
    throw std::invalid_argument("fit_scaling: need at least 3 points");
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0))
      throw std::invalid_argument("fit_scaling: points must be positive");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx, dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_scaling: degenerate abscissae");

  ScalingFit fit;
  const double slope = sxy / sxx;
  fit.alpha = -slope;
  fit.amplitude = std::exp(my - slope * mx);
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (const auto& [x, y] : points) {
      const double r = std::log(y) - (my + slope * (std::log(x) - mx));
      ss_res += r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  } else {
    fit.r2 = 1.0;  // constant data fits exactly
  }
  return fit;
}

}  // namespace slpm
