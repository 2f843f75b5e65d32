#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "slpm/kernel.hpp"
#include "slpm/lattice.hpp"

namespace slpm {

struct Dataset {
  std::vector<SpinConfig> samples;
  std::vector<double> labels;
  std::vector<double> counts;  // orbit multiplicities; 1 for raw samples
};

struct DedupResult {
  Dataset data;
  std::vector<int> group_of;  // raw sample index -> deduplicated row
};

// Merge samples that share a symmetry orbit (including the global flip when
// z2_even). The stored representative is the canonical orbit key; rows keep
// first-occurrence order. With labels given, intra-orbit disagreement above
// tol is an inconsistency error (labels of a symmetric state must match).
DedupResult dedup(const std::vector<SpinConfig>& samples,
                  const std::vector<double>& labels, const SymmetryGroup& G,
                  bool z2_even, double tol = 1e-8);

// Subtracts max(labels) so the largest label is exactly 0; returns the shift.
double normalize_labels(Dataset& ds);

struct KrrModel {
  std::vector<SpinConfig> support;
  Eigen::VectorXd weights;
  double lambda = 0.0;  // regularization actually used (after any retry)
  KernelParams kernel;
  double log_shift = 0.0;
};

// Solves (K + R) w = y, R = lambda * I or lambda * diag(1/c_i) when
// count_reg. Cholesky; on factorization failure or residual above
// 1e-6 * (1 + ||y||_inf) retries once with lambda*10, then throws.
KrrModel fit(const Dataset& ds, const KernelParams& p, double lambda,
             bool count_reg);

inline CompiledPredictor compile(const KrrModel& m) {
  std::vector<double> w(m.weights.data(), m.weights.data() + m.weights.size());
  return CompiledPredictor(m.support, w, m.kernel, m.log_shift);
}

// log f(x) = log_shift + sum_i w_i k(x, c_i); one-shot evaluation, use
// compile() for loops.
double predict_log(const KrrModel& m, const SpinConfig& x);

// Binary, little-endian, bit-exact round trip.
void save_model(const KrrModel& m, const std::string& path);
KrrModel load_model(const std::string& path);

}  // namespace slpm
