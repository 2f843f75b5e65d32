#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "slpm/hamiltonian.hpp"
#include "slpm/oracle.hpp"

namespace slpm {

// Synthetic-noise injection budgets, as fractions of the convergence
// theorem's per-step allowances: assumption 1 caps the ground-state
// component |<Y0|D>| at (delta/5) cos(theta0) ||Psi||, assumption 2 caps
// ||D|| at (delta/5) eps ||Psi||. Values of 1 sit exactly on the boundary
// (worst admissible case); above 1 violates by construction.
struct NoiseSpec {
  double eps_scale = 1.0;
  double parallel_fraction = 1.0;
  uint64_t seed = 1;
};

struct NoisyStepRecord {
  int step = 0;
  double tan_theta = 0.0;          // after the step, vs the ground state
  double gamma = 0.0;              // applied normalization 1/||psi~ + D||
  double noise_over_state = 0.0;   // ||D|| / ||Psi||
  double parallel_overlap = 0.0;   // |<Y0|D>| / ||Psi||
  bool contraction_ok = false;     // tan' <= max(eps, omega tan)
  bool assum1_ok = false;
  bool assum2_ok = false;
};

struct TheoremCheckReport {
  double lambda = 0.0;
  double eps = 0.0;
  double delta = 0.0;   // 1 - (lambda-E1)/(lambda-E0)
  double omega = 0.0;   // max(((lambda-E1)/(lambda-E0))^(1/4), eps)
  double f0 = 0.0;
  double tan_theta0 = 0.0;
  int m_bound = 0;
  int m_observed = -1;  // first step with tan <= eps; -1 if never
  bool bound_ok = false;
  bool contraction_all_ok = false;
  bool assumptions_all_ok = false;
  bool steady_ok = false;          // ground infidelity <= eps^2 from m_observed on
  double final_infid = 0.0;
  double max_steady_infid = 0.0;
  std::vector<NoisyStepRecord> steps;
};

// Removes the component of `delta` along `propagated` while preserving the
// direction of propagated + delta:
//   D_perp = (<p|p> D - <p|D> p) / (<p|p> + <p|D>).
// Throws NumericalError when propagated + delta cancels (denominator ~ 0).
Eigen::VectorXd orthogonalize_noise(const Eigen::VectorXd& delta,
                                    const Eigen::VectorXd& propagated);

// ceil((4/delta) ln(tan(theta0)/eps)), clamped at 0
int stepcount_bound(double f0, double eps, const SpectrumInfo& sp, double lambda);

// Runs psi <- gamma ((lambda-H) psi + D) with D drawn orthogonal to the
// propagated state and rescaled onto the assumption budgets, and checks the
// per-step contraction, the step-count bound and the steady-state
// infidelity. Requires eps in (0, 1/2), lambda >= (E1+Emax)/2 and a
// nondegenerate spectrum.
TheoremCheckReport noisy_pm_run(const HamiltonianSpec& spec,
                                const ExactContext& ctx, double lambda,
                                const Eigen::VectorXd& psi0, double eps,
                                const NoiseSpec& noise, int n_steps);

// recomputes the bound from the report's own fields and compares
bool verify_stepcount_bound(const TheoremCheckReport& rep);

}  // namespace slpm
