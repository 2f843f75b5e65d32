#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slpm/hamiltonian.hpp"
#include "slpm/krr.hpp"
#include "slpm/oracle.hpp"
#include "slpm/sampler.hpp"

namespace slpm {

enum class DatasetMode { Sampled, FullBasis };

struct SlpmConfig {
  HamiltonianSpec hamiltonian;
  double lambda_shift = 1.0;  // Lambda in (Lambda - H)
  int n_iters = 100;
  size_t n_samples = 1024;
  double gamma = 0.5808;
  bool z2_even = true;
  double lambda_ridge = 1e-8;
  bool count_reg = false;
  SamplerConfig sampler;
  DatasetMode dataset_mode = DatasetMode::Sampled;
  uint64_t seed = 1;
  bool track_exact = false;
  int track_stride = 0;        // 0: final iteration only; k: every k-th + final
  int dense_cap = 20;
  size_t energy_samples = 0;   // final estimate; 0 reuses n_samples

  void validate() const;
};

struct EnergyEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // chain-blocked
  double acceptance = 1.0;
};

// Diagnostics of one power step. energy_* estimate <H> of the iteration's
// input state (the one that was sampled); log_shift is the normalization
// subtracted from the labels before the fit.
struct IterationRecord {
  int iter = 0;
  double energy_mean = 0.0;
  double energy_stderr = 0.0;
  double acceptance = 1.0;
  size_t n_unique = 0;
  double log_shift = 0.0;
  std::optional<double> step_infid;
  std::optional<double> infid;
  std::optional<double> rel_err;
};

struct RunResult {
  std::vector<IterationRecord> records;
  KrrModel model;  // final
  EnergyEstimate final_energy;
  std::map<std::string, double> phase_seconds;
  std::vector<std::string> warnings;
  std::optional<SpectrumInfo> spectrum;
  double contraction_ratio = 0.0;   // (Lambda-E1)/(Lambda-E0) when tracked
  std::string contraction_branch;   // "theorem" | "generic" | "subdominant"
  bool aborted = false;
  std::string abort_reason;
};

// Empty support: log psi == 0, the uniform state over the relevant sector.
KrrModel init_uniform_model(const HamiltonianSpec& spec, double gamma,
                            bool z2_even);

// Model and sampler state carried between iterations (chains warm-start
// from the previous iteration's final configurations).
struct StepState {
  KrrModel model;
  std::vector<SpinConfig> chain_states;
  std::optional<Basis> full_basis;  // FullBasis dataset mode
};

// One power step: sample from |psi|^2 (or enumerate), dedup into orbit
// representatives, label with log <x|(Lambda-H)|psi>, normalize, refit.
IterationRecord slpm_step(StepState& st, const SlpmConfig& cfg, int iter,
                          std::map<std::string, double>* phase_seconds = nullptr);

EnergyEstimate estimate_energy(const KrrModel& model, const HamiltonianSpec& spec,
                               const SamplerConfig& scfg, size_t n_samples,
                               uint64_t seed);

// Per-consumer stream seed: mixes (iter, phase) into the master seed so no
// phase reordering can shift another phase's variates.
uint64_t derive_seed(uint64_t seed, uint64_t iter, uint64_t phase);

using RecordCallback = std::function<void(const IterationRecord&)>;

// Full driver. `exact` may inject a precomputed spectrum/ground context
// (shared across runs of the same Hamiltonian); with track_exact and no
// context, one is built (dense_cap enforced). A NumericalError mid-run
// aborts and returns the partial result with the reason recorded.
RunResult run(const SlpmConfig& cfg, const RecordCallback& on_record = {},
              const ExactContext* exact = nullptr);

}  // namespace slpm
