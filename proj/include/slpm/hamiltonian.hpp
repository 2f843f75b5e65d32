#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "slpm/lattice.hpp"

namespace slpm {

enum class Model { TFI, AFH };

// H_TFI = sum_<ij> sz_i sz_j - h sum_i sx_i
// H_AFH = sum_<ij> (sx_i sx_j + sy_i sy_j + sz_i sz_j)
// marshall conjugates AFH by sz on one sublattice: exchange amplitude 2 -> -2.
struct HamiltonianSpec {
  Model model = Model::TFI;
  Lattice lattice;
  double h = 0.0;        // TFI only
  bool marshall = false;  // AFH only

  void validate() const;
};

HamiltonianSpec make_tfi(const std::vector<int>& dims, double h);
HamiltonianSpec make_afh(const std::vector<int>& dims, bool marshall);

struct ConnectedRow {
  double diag = 0.0;
  std::vector<std::pair<SpinConfig, double>> offdiag;  // (x', <x'|H|x>), merged
};

double diag_element(const HamiltonianSpec& spec, const SpinConfig& x);

// Visits every off-diagonal term <x'|H|x> != 0. Duplicate x' may be visited
// more than once (extent-2 wrap bonds); connected_elements merges them.
template <class Fn>
void for_each_offdiag(const HamiltonianSpec& spec, const SpinConfig& x, Fn&& fn) {
  if (spec.model == Model::TFI) {
    if (spec.h == 0.0) return;
    for (int i = 0; i < x.n; ++i) fn(x.flipped(i), -spec.h);
  } else {
    const double amp = spec.marshall ? -2.0 : 2.0;
    for (const auto& [i, j] : spec.lattice.bonds) {
      if (x.spin(i) != x.spin(j)) {
        SpinConfig y = x;
        y.flip(i);
        y.flip(j);
        fn(y, amp);
      }
    }
  }
}

ConnectedRow connected_elements(const HamiltonianSpec& spec, const SpinConfig& x);

// max_x (|diag| + sum |offdiag|); every eigenvalue lies in +/- this bound
double gershgorin_bound(const HamiltonianSpec& spec);

using LogPsiFn = std::function<double(const SpinConfig&)>;

struct ShiftedOperator {
  HamiltonianSpec spec;
  double lambda = 0.0;  // applies Lambda - H
};

// log <x|(Lambda - H)|psi> via signed log-sum-exp over the connected row.
// Throws NumericalError if the summed amplitude is not positive (the learned
// representation exp(log psi) cannot encode it) or log psi is not finite.
double apply_shifted_log(const ShiftedOperator& op, const SpinConfig& x,
                         const LogPsiFn& log_psi);

// E_loc(x) = <x|H|psi> / psi(x). Amplitude log-ratios above 700 throw
// NumericalError naming the configuration (exp would overflow).
double local_energy(const HamiltonianSpec& spec, const SpinConfig& x,
                    const LogPsiFn& log_psi);

}  // namespace slpm
