#include "slpm/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "slpm/errors.hpp"

namespace slpm {

SpinConfig propose(Move move, const SpinConfig& x, RngStream& rng) {
  SpinConfig y = x;
  if (move == Move::SingleFlip) {
    y.flip(static_cast<int>(rng.uniform_int(x.n)));
  } else {
    if (x.n < 2) throw std::invalid_argument("propose: exchange needs >= 2 sites");
    const int i = static_cast<int>(rng.uniform_int(x.n));
    int j = static_cast<int>(rng.uniform_int(x.n - 1));
    if (j >= i) ++j;
    const int si = x.spin(i);
    y.set_spin(i, x.spin(j));
    y.set_spin(j, si);
  }
  return y;
}

namespace {

SpinConfig random_start(Move move, int n_sites, RngStream& rng) {
  SpinConfig c = SpinConfig::zeros(n_sites);
  if (move == Move::SingleFlip) {
    for (int i = 0; i < n_sites; ++i)
      if (rng.next_u64() & 1) c.set_spin(i, +1);
  } else {
    // balanced magnetization start: floor(n/2) up spins, random placement
    std::vector<int> order(n_sites);
    for (int i = 0; i < n_sites; ++i) order[i] = i;
    for (int i = n_sites - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int k = 0; k < n_sites / 2; ++k) c.set_spin(order[k], +1);
  }
  return c;
}

double checked_eval(const LogPsiFn& log_psi, const SpinConfig& x) {
  const double v = log_psi(x);
  if (!std::isfinite(v))
    throw NumericalError("mh_sample: log psi not finite at " + x.to_string());
  return v;
}

}  // namespace

MhResult mh_sample(const LogPsiFn& log_psi, int n_sites, const SamplerConfig& cfg,
                   size_t n_samples, uint64_t seed,
                   const std::vector<SpinConfig>* init) {
  if (cfg.n_chains < 1 || cfg.burn_in_sweeps < 0 || cfg.sweeps_per_sample < 1)
    throw std::invalid_argument("mh_sample: bad sampler config");
  if (n_samples == 0 || n_samples % cfg.n_chains != 0)
    throw std::invalid_argument("mh_sample: n_samples must divide across chains");
  if (init && static_cast<int>(init->size()) != cfg.n_chains)
    throw std::invalid_argument("mh_sample: init state count != n_chains");

  const size_t per_chain = n_samples / cfg.n_chains;
  MhResult res;
  res.samples.reserve(n_samples);
  res.acceptance.resize(cfg.n_chains);
  res.final_states.reserve(cfg.n_chains);

  for (int c = 0; c < cfg.n_chains; ++c) {
    RngStream rng(seed, {0x6d686368ULL, static_cast<uint64_t>(c)});
    SpinConfig x = init ? (*init)[c] : random_start(cfg.move, n_sites, rng);
    if (x.n != n_sites) throw std::invalid_argument("mh_sample: init size mismatch");
    double lp = checked_eval(log_psi, x);

    uint64_t proposed = 0, accepted = 0;
    // Lazy chain: each slot holds with probability 1/2, else proposes one
    // move. Laziness makes the chain aperiodic; without it an even number
    // of always-accepted single flips between samples conserves spin parity
    // and pins each chain to one parity class (visible for near-flat psi).
    auto sweep = [&] {
      for (int s = 0; s < n_sites; ++s) {
        if (rng.uniform() < 0.5) continue;
        const SpinConfig y = propose(cfg.move, x, rng);
        ++proposed;
        if (y == x) {  // identity proposal, accepted by construction
          ++accepted;
          continue;
        }
        const double ly = checked_eval(log_psi, y);
        const double log_a = 2.0 * (ly - lp);
        if (log_a >= 0.0 || rng.uniform() < std::exp(log_a)) {
          x = y;
          lp = ly;
          ++accepted;
        }
      }
    };

    for (int b = 0; b < cfg.burn_in_sweeps; ++b) sweep();
    for (size_t k = 0; k < per_chain; ++k) {
      for (int s = 0; s < cfg.sweeps_per_sample; ++s) sweep();
      res.samples.push_back(x);
    }
    res.acceptance[c] =
        proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 1.0;
    res.final_states.push_back(x);
  }
  return res;
}

}  // namespace slpm
