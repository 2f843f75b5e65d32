#pragma once

#include <cstdint>
#include <vector>

#include "slpm/hamiltonian.hpp"
#include "slpm/lattice.hpp"
#include "slpm/rng.hpp"

namespace slpm {

// SingleFlip explores the full configuration space (TFI); Exchange swaps an
// unordered site pair and conserves magnetization (AFH sector). An equal-spin
// exchange is an identity proposal but still counts as a proposal.
enum class Move { SingleFlip, Exchange };

struct SamplerConfig {
  Move move = Move::SingleFlip;
  int n_chains = 16;
  int burn_in_sweeps = 16;
  int sweeps_per_sample = 1;
};

SpinConfig propose(Move move, const SpinConfig& x, RngStream& rng);

struct MhResult {
  std::vector<SpinConfig> samples;       // chain-major: chain c owns block c
  std::vector<double> acceptance;        // per chain
  std::vector<SpinConfig> final_states;  // per chain, for warm starts
};

// Metropolis-Hastings on Pi(x) = exp(2 log_psi(x)). Each chain derives its
// own stream from (seed, chain); identical inputs reproduce identical output
// exactly. n_samples must divide evenly across chains. Chains start from
// `init` when given (previous iteration's final states), otherwise from
// random configurations respecting the move's conservation law.
MhResult mh_sample(const LogPsiFn& log_psi, int n_sites, const SamplerConfig& cfg,
                   size_t n_samples, uint64_t seed,
                   const std::vector<SpinConfig>* init = nullptr);

}  // namespace slpm
