#pragma once

#include <utility>
#include <vector>

namespace slpm {

// Power-law fit value ~ A * n^(-alpha) by least squares in log-log space.
struct ScalingFit {
  double alpha = 0.0;      // decay exponent (positive = improves with n)
  double amplitude = 0.0;  // A
  double r2 = 0.0;
};

// points: (n, value), n and value strictly positive, at least 3 points
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points);

}  // namespace slpm
