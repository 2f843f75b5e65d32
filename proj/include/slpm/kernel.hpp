#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "slpm/lattice.hpp"

namespace slpm {

// k(x,y) = (1/|G|) sum_g sigma(<g.x, y>/L), sigma(t) = t * asin(gamma * t).
// sigma is even, so k is invariant under a global spin flip of either
// argument; z2_even only controls orbit-key deduplication elsewhere.
struct KernelParams {
  double gamma = 0.5808;
  SymmetryGroup group;
  bool z2_even = true;

  void validate() const;
};

double sigma_fn(double t, double gamma);

// sigma evaluated at every overlap value, indexed by r = min(h, n-h) where
// h = hamming distance (sigma is even in the overlap). Size floor(n/2)+1.
std::vector<double> sigma_table(int n_sites, double gamma);

double kernel_eval(const SpinConfig& x, const SpinConfig& y, const KernelParams& p);

struct GramMatrix {
  Eigen::MatrixXd K;               // dense symmetric
  std::vector<SpinConfig> order;   // row/column sample order echo
};

GramMatrix gram_matrix(const std::vector<SpinConfig>& samples, const KernelParams& p);

// Kernel expansion f(x) = shift + sum_i w_i k(x, c_i), flattened over the
// group (support translates precomputed) for tight evaluation loops.
// For n_sites <= 32 evaluation runs on packed uint32 configs; with AVX-512
// available and n_sites <= 31 the sigma table fits a 2-register permute.
class CompiledPredictor {
 public:
  CompiledPredictor() = default;
  CompiledPredictor(const std::vector<SpinConfig>& support,
                    const std::vector<double>& weights, const KernelParams& p,
                    double log_shift);

  double operator()(const SpinConfig& x) const;
  double predict_packed(uint32_t x) const;  // n_sites <= 32 only

  int n_sites() const { return n_; }
  double log_shift() const { return shift_; }
  bool empty() const { return flat_w_.empty(); }

 private:
  int n_ = 0;
  double shift_ = 0.0;
  size_t count_ = 0;  // padded to a SIMD multiple; padding has weight 0
  bool packed_ = false;
  std::vector<uint32_t> flat32_;
  std::vector<SpinConfig> flat64_;
  std::vector<double> flat_w_;
  std::vector<double> table_;               // reduced sigma table
  alignas(64) double tbl16_[16] = {0};      // permute copy, n <= 31
};

// Finite-width tangent-kernel probe of the symmetrized network
// f(x) = (1/|G|) sum_g (1/sqrt(n1)) sum_i logcosh((1/sqrt(n0)) <w_i, g.x>),
// evaluated analytically from the tanh derivatives and scaled so that the
// infinite-width limit matches kernel_eval (the tanh/erf substitution behind
// gamma leaves a residual bias of ~0.1%).
double empirical_ntk(const SpinConfig& x, const SpinConfig& y,
                     const KernelParams& p, int width, uint64_t seed);

}  // namespace slpm
