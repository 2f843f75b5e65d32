#include "slpm/hamiltonian.hpp"

#include <algorithm>
#include <cmath>

#include "slpm/errors.hpp"

namespace slpm {

void HamiltonianSpec::validate() const {
  if (lattice.n_sites < 1) throw ConfigError("hamiltonian: empty lattice");
  if (model == Model::TFI) {
    if (h < 0.0) throw ConfigError("hamiltonian: TFI field h must be >= 0");
  } else if (marshall) {
    for (int d : lattice.dims)
      if (d > 1 && d % 2 != 0)
        throw ConfigError(
            "hamiltonian: marshall rotation needs a bipartite lattice "
            "(every periodic extent even)");
  }
}

HamiltonianSpec make_tfi(const std::vector<int>& dims, double h) {
  HamiltonianSpec s;
  s.model = Model::TFI;
  s.lattice = build_lattice(dims);
  s.h = h;
  s.validate();
  return s;
}

HamiltonianSpec make_afh(const std::vector<int>& dims, bool marshall) {
  HamiltonianSpec s;
  s.model = Model::AFH;
  s.lattice = build_lattice(dims);
  s.marshall = marshall;
  s.validate();
  return s;
}

double diag_element(const HamiltonianSpec& spec, const SpinConfig& x) {
  int acc = 0;
  for (const auto& [i, j] : spec.lattice.bonds) acc += x.spin(i) * x.spin(j);
  return static_cast<double>(acc);
}

ConnectedRow connected_elements(const HamiltonianSpec& spec, const SpinConfig& x) {
  ConnectedRow row;
  row.diag = diag_element(spec, x);
  for_each_offdiag(spec, x, [&](const SpinConfig& y, double amp) {
    for (auto& [cfg, a] : row.offdiag)
      if (cfg == y) {
        a += amp;
        return;
      }
    row.offdiag.emplace_back(y, amp);
  });
  return row;
}

double gershgorin_bound(const HamiltonianSpec& spec) {
  const double nb = static_cast<double>(spec.lattice.bonds.size());
  if (spec.model == Model::TFI)
    return nb + spec.h * spec.lattice.n_sites;
  return nb + 2.0 * nb;
}

double apply_shifted_log(const ShiftedOperator& op, const SpinConfig& x,
                         const LogPsiFn& log_psi) {
  struct Term {
    double coeff, logamp;
  };
  std::vector<Term> terms;
  terms.reserve(x.n + 1);

  const double l0 = log_psi(x);
  if (!std::isfinite(l0))
    throw NumericalError("apply_shifted_log: log psi not finite at " + x.to_string());
  terms.push_back({op.lambda - diag_element(op.spec, x), l0});

  for_each_offdiag(op.spec, x, [&](const SpinConfig& y, double amp) {
    const double ly = log_psi(y);
    if (!std::isfinite(ly))
      throw NumericalError("apply_shifted_log: log psi not finite at " + y.to_string());
    terms.push_back({-amp, ly});
  });

  double m = -HUGE_VAL;
  for (const auto& t : terms)
    if (t.coeff != 0.0) m = std::max(m, t.logamp);
  if (m == -HUGE_VAL)
    throw NumericalError("apply_shifted_log: row has no nonzero terms at " +
                         x.to_string());

  double s = 0.0;
  for (const auto& t : terms) s += t.coeff * std::exp(t.logamp - m);
  if (!(s > 0.0))
    throw NumericalError(
        "apply_shifted_log: non-positive amplitude <x|(Lambda-H)|psi> at " +
        x.to_string() + " (raise Lambda or check the sign structure)");
  return m + std::log(s);
}

double local_energy(const HamiltonianSpec& spec, const SpinConfig& x,
                    const LogPsiFn& log_psi) {
  const double l0 = log_psi(x);
  if (!std::isfinite(l0))
    throw NumericalError("local_energy: log psi not finite at " + x.to_string());

  double acc = diag_element(spec, x);
  for_each_offdiag(spec, x, [&](const SpinConfig& y, double amp) {
    const double dl = log_psi(y) - l0;
    if (!std::isfinite(dl) || dl > 700.0)
      throw NumericalError("local_energy: amplitude ratio overflow (log ratio " +
                           std::to_string(dl) + ") at " + x.to_string());
    acc += amp * std::exp(dl);
  });
  return acc;
}

}  // namespace slpm
