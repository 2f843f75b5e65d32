#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slpm/hamiltonian.hpp"
#include "slpm/krr.hpp"
#include "slpm/lattice.hpp"

namespace slpm {

enum class Sector { Full, ZeroMagnetization };

// Enumerated computational basis. Full basis needs no storage (index ==
// packed bits); the zero-magnetization sector keeps a sorted state list.
// Amplitude vectors are indexed by this ordering.
class Basis {
 public:
  Basis(int n_sites, Sector sector);

  size_t dim() const { return dim_; }
  int n_sites() const { return n_; }
  Sector sector() const { return sector_; }

  SpinConfig config_at(size_t idx) const;
  size_t index_of(const SpinConfig& x) const;  // throws outside the sector

 private:
  int n_ = 0;
  Sector sector_ = Sector::Full;
  size_t dim_ = 0;
  std::vector<uint32_t> states_;  // sector list, sorted (empty for Full)
};

Sector natural_sector(const HamiltonianSpec& spec);

// w = (lambda - H) v, matrix-free row enumeration.
Eigen::VectorXd dense_apply(const HamiltonianSpec& spec, double lambda,
                            const Basis& basis, const Eigen::VectorXd& v);

// <v|H|v> / <v|v>
double dense_energy(const HamiltonianSpec& spec, const Basis& basis,
                    const Eigen::VectorXd& v);

struct PowerResult {
  double energy = 0.0;        // lambda - dominant Rayleigh quotient
  Eigen::VectorXd vec;        // L2-normalized
  int iters = 0;
  bool converged = false;
};

// Power iteration on (lambda - H) with per-step max-norm renormalization;
// stops when the Rayleigh quotient change drops below tol (flagged if the
// iteration cap is hit first). `v0` overrides the default start vector.
PowerResult dense_power_method(const HamiltonianSpec& spec, double lambda,
                               const Basis& basis, double tol = 1e-11,
                               int max_iters = 60000,
                               const Eigen::VectorXd* v0 = nullptr);

struct SpectrumInfo {
  double e0 = 0.0;
  double e1 = 0.0;
  double e_max = 0.0;
  double gap = 0.0;            // e1 - e0
  bool degenerate = false;     // gap below 1e-10
  bool converged = false;
  int iters_total = 0;
};

// E0, E1 (deflated iteration) and Emax via shifted power iterations.
SpectrumInfo extremal_eigs(const HamiltonianSpec& spec, const Basis& basis,
                           double tol = 1e-11);

double fidelity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double fubini_study(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// exp(log psi - max log psi) over the basis
Eigen::VectorXd materialize(const KrrModel& m, const Basis& basis);

// 1 - F(after, (lambda - H) before)
double step_infidelity(const KrrModel& before, const KrrModel& after,
                       const HamiltonianSpec& spec, double lambda,
                       const Basis& basis);

// Spectrum + ground vector bundle shared by diagnostics; construction
// enforces the dense tracking cap.
struct ExactContext {
  Basis basis;
  SpectrumInfo spectrum;
  Eigen::VectorXd ground;
};

ExactContext make_exact_context(const HamiltonianSpec& spec, int dense_cap,
                                double tol = 1e-11);

// Raw little-endian amplitude dump (header: magic, n_sites, sector, dim).
void save_dense_state(const Eigen::VectorXd& v, const Basis& basis,
                      const std::string& path);

}  // namespace slpm
