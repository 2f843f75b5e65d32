#include "slpm/slpm.hpp"

#include <chrono>
#include <cmath>

#include "slpm/errors.hpp"

namespace slpm {

namespace {

constexpr uint64_t kPhaseSampling = 1;
constexpr uint64_t kPhaseEnergy = 2;

class PhaseTimer {
 public:
  PhaseTimer(std::map<std::string, double>* acc, const char* name)
      : acc_(acc), name_(name), t0_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    if (!acc_) return;
    const auto dt = std::chrono::steady_clock::now() - t0_;
    (*acc_)[name_] += std::chrono::duration<double>(dt).count();
  }

 private:
  std::map<std::string, double>* acc_;
  const char* name_;
  std::chrono::steady_clock::time_point t0_;
};

Move natural_move(const HamiltonianSpec& spec) {
  return spec.model == Model::AFH ? Move::Exchange : Move::SingleFlip;
}

}  // namespace

uint64_t derive_seed(uint64_t seed, uint64_t iter, uint64_t phase) {
  uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (iter + 1));
  uint64_t h = splitmix64(s);
  s ^= 0xd1b54a32d192ed03ULL * (phase + 1);
  return splitmix64(s) ^ h;
}

void SlpmConfig::validate() const {
  hamiltonian.validate();
  if (n_iters < 1) throw ConfigError("slpm: n_iters must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("slpm: gamma not in (0,1)");
  if (!(lambda_ridge > 0.0)) throw ConfigError("slpm: lambda_ridge must be > 0");
  if (track_stride < 0) throw ConfigError("slpm: track_stride must be >= 0");
  if (dataset_mode == DatasetMode::Sampled) {
    if (n_samples == 0 || n_samples % sampler.n_chains != 0)
      throw ConfigError("slpm: n_samples must divide across chains");
    if (sampler.move != natural_move(hamiltonian))
      throw ConfigError(
          "slpm: sampler move incompatible with the model's sector "
          "(TFI needs single_flip, AFH needs exchange)");
  } else if (hamiltonian.lattice.n_sites > 24) {
    throw ConfigError("slpm: full-basis dataset limited to 24 sites");
  }
  if (hamiltonian.model == Model::AFH) {
    if (hamiltonian.lattice.n_sites % 2 != 0)
      throw ConfigError("slpm: AFH needs an even site count (zero magnetization)");
    if (!hamiltonian.marshall)
      throw ConfigError(
          "slpm: AFH learning needs the marshall rotation (amplitudes must "
          "stay positive)");
  }
}

KrrModel init_uniform_model(const HamiltonianSpec& spec, double gamma,
                            bool z2_even) {
  KrrModel m;
  m.kernel.gamma = gamma;
  m.kernel.z2_even = z2_even;
  m.kernel.group = translation_group(spec.lattice);
  m.lambda = 0.0;
  m.log_shift = 0.0;
  return m;
}

IterationRecord slpm_step(StepState& st, const SlpmConfig& cfg, int iter,
                          std::map<std::string, double>* phase_seconds) {
  const HamiltonianSpec& spec = cfg.hamiltonian;
  const CompiledPredictor pred = compile(st.model);
  const LogPsiFn psi = [&pred](const SpinConfig& x) { return pred(x); };

  IterationRecord rec;
  rec.iter = iter;

  // phase: build the dataset
  std::vector<SpinConfig> raw;
  int n_chains = 1;
  {
    PhaseTimer t(phase_seconds, "sampling");
    if (cfg.dataset_mode == DatasetMode::Sampled) {
      MhResult mh = mh_sample(psi, spec.lattice.n_sites, cfg.sampler,
                              cfg.n_samples, derive_seed(cfg.seed, iter, kPhaseSampling),
                              st.chain_states.empty() ? nullptr : &st.chain_states);
      raw = std::move(mh.samples);
      st.chain_states = std::move(mh.final_states);
      n_chains = cfg.sampler.n_chains;
      double acc = 0.0;
      for (double a : mh.acceptance) acc += a;
      rec.acceptance = acc / mh.acceptance.size();
    } else {
      if (!st.full_basis)
        st.full_basis.emplace(spec.lattice.n_sites, natural_sector(spec));
      raw.reserve(st.full_basis->dim());
      for (size_t i = 0; i < st.full_basis->dim(); ++i)
        raw.push_back(st.full_basis->config_at(i));
      rec.acceptance = 1.0;
    }
  }

  // phase: orbit dedup + labels on representatives (labels are constant on
  // orbits: the kernel model and Lambda-H both commute with the group)
  Dataset ds;
  std::vector<double> e_loc;
  std::vector<int> group_of;
  {
    PhaseTimer t(phase_seconds, "labels");
    DedupResult dd = dedup(raw, {}, st.model.kernel.group, cfg.z2_even);
    ds = std::move(dd.data);
    group_of = std::move(dd.group_of);
    rec.n_unique = ds.samples.size();

    const ShiftedOperator op{spec, cfg.lambda_shift};
    ds.labels.resize(ds.samples.size());
    e_loc.resize(ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      const double y = apply_shifted_log(op, ds.samples[i], psi);
      ds.labels[i] = y;
      e_loc[i] = cfg.lambda_shift - std::exp(y - psi(ds.samples[i]));
    }
  }

  // energy of the sampled state from the same labels
  if (cfg.dataset_mode == DatasetMode::Sampled) {
    const size_t per_chain = raw.size() / n_chains;
    double mean = 0.0;
    std::vector<double> chain_mean(n_chains, 0.0);
    for (size_t k = 0; k < raw.size(); ++k) {
      const double e = e_loc[group_of[k]];
      mean += e;
      chain_mean[k / per_chain] += e;
    }
    mean /= static_cast<double>(raw.size());
    rec.energy_mean = mean;
    double var = 0.0;
    for (double& cm : chain_mean) {
      cm /= static_cast<double>(per_chain);
      var += (cm - mean) * (cm - mean);
    }
    rec.energy_stderr =
        n_chains > 1 ? std::sqrt(var / (n_chains * (n_chains - 1.0))) : 0.0;
  } else {
    // exact expectation under |psi|^2 over the enumerated basis
    double num = 0.0, den = 0.0;
    double lmax = -HUGE_VAL;
    std::vector<double> lp(ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      lp[i] = psi(ds.samples[i]);
      lmax = std::max(lmax, lp[i]);
    }
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      const double w = ds.counts[i] * std::exp(2.0 * (lp[i] - lmax));
      num += w * e_loc[i];
      den += w;
    }
    rec.energy_mean = num / den;
    rec.energy_stderr = 0.0;
  }

  // phase: normalize + refit
  {
    PhaseTimer t(phase_seconds, "fit");
    rec.log_shift = normalize_labels(ds);
    KrrModel next = fit(ds, st.model.kernel, cfg.lambda_ridge, cfg.count_reg);
    next.log_shift = 0.0;
    st.model = std::move(next);
  }
  return rec;
}

EnergyEstimate estimate_energy(const KrrModel& model, const HamiltonianSpec& spec,
                               const SamplerConfig& scfg, size_t n_samples,
                               uint64_t seed) {
  const CompiledPredictor pred = compile(model);
  const LogPsiFn psi = [&pred](const SpinConfig& x) { return pred(x); };
  MhResult mh = mh_sample(psi, spec.lattice.n_sites, scfg, n_samples, seed);

  // local energies per distinct configuration only
  DedupResult dd = dedup(mh.samples, {}, model.kernel.group, model.kernel.z2_even);
  std::vector<double> e_loc(dd.data.samples.size());
  for (size_t i = 0; i < e_loc.size(); ++i)
    e_loc[i] = local_energy(spec, dd.data.samples[i], psi);

  EnergyEstimate est;
  const int n_chains = scfg.n_chains;
  const size_t per_chain = n_samples / n_chains;
  std::vector<double> chain_mean(n_chains, 0.0);
  double mean = 0.0;
  for (size_t k = 0; k < mh.samples.size(); ++k) {
    const double e = e_loc[dd.group_of[k]];
    mean += e;
    chain_mean[k / per_chain] += e;
  }
  mean /= static_cast<double>(n_samples);
  est.mean = mean;
  double var = 0.0;
  for (double& cm : chain_mean) {
    cm /= static_cast<double>(per_chain);
    var += (cm - mean) * (cm - mean);
  }
  est.std_error = n_chains > 1 ? std::sqrt(var / (n_chains * (n_chains - 1.0))) : 0.0;
  double acc = 0.0;
  for (double a : mh.acceptance) acc += a;
  est.acceptance = acc / mh.acceptance.size();
  return est;
}

RunResult run(const SlpmConfig& cfg, const RecordCallback& on_record,
              const ExactContext* exact) {
  cfg.validate();
  RunResult res;

  std::optional<ExactContext> own_exact;
  const ExactContext* ctx = exact;
  if (cfg.track_exact && !ctx) {
    PhaseTimer t(&res.phase_seconds, "diagnostics");
    own_exact = make_exact_context(cfg.hamiltonian, cfg.dense_cap);
    ctx = &*own_exact;
  }

  if (ctx) {
    res.spectrum = ctx->spectrum;
    const double lam = cfg.lambda_shift;
    const auto& sp = ctx->spectrum;
    res.contraction_ratio = (lam - sp.e1) / (lam - sp.e0);
    if (lam >= 0.5 * (sp.e1 + sp.e_max))
      res.contraction_branch = "theorem";
    else if (lam > 0.5 * (sp.e0 + sp.e_max))
      res.contraction_branch = "generic";
    else
      res.contraction_branch = "subdominant";
    if (lam <= 0.5 * (sp.e0 + sp.e_max))
      res.warnings.push_back(
          "lambda_shift below the spectrum midpoint: the shifted ground state "
          "is not dominant and the iteration may diverge");
  }

  StepState st;
  st.model = init_uniform_model(cfg.hamiltonian, cfg.gamma, cfg.z2_even);

  auto tracked = [&](int iter) {
    if (!cfg.track_exact) return false;
    if (iter == cfg.n_iters) return true;
    return cfg.track_stride > 0 && iter % cfg.track_stride == 0;
  };

  for (int iter = 1; iter <= cfg.n_iters; ++iter) {
    const KrrModel prev = st.model;
    IterationRecord rec;
    try {
      rec = slpm_step(st, cfg, iter, &res.phase_seconds);
    } catch (const NumericalError& e) {
      res.aborted = true;
      res.abort_reason = e.what();
      res.warnings.push_back("aborted at iteration " + std::to_string(iter) +
                             ": " + e.what());
      break;
    }

    if (tracked(iter) && ctx) {
      PhaseTimer t(&res.phase_seconds, "diagnostics");
      rec.step_infid = step_infidelity(prev, st.model, cfg.hamiltonian,
                                       cfg.lambda_shift, ctx->basis);
      const Eigen::VectorXd v = materialize(st.model, ctx->basis);
      if (!ctx->spectrum.degenerate)
        rec.infid = 1.0 - fidelity(v, ctx->ground);
      const double e = dense_energy(cfg.hamiltonian, ctx->basis, v);
      rec.rel_err = (e - ctx->spectrum.e0) / std::abs(ctx->spectrum.e0);
    }

    res.records.push_back(rec);
    if (on_record) on_record(rec);
  }

  res.model = st.model;
  if (!res.aborted) {
    PhaseTimer t(&res.phase_seconds, "energy");
    if (cfg.dataset_mode == DatasetMode::Sampled) {
      const size_t n = cfg.energy_samples ? cfg.energy_samples : cfg.n_samples;
      res.final_energy = estimate_energy(res.model, cfg.hamiltonian, cfg.sampler,
                                         n, derive_seed(cfg.seed, 0, kPhaseEnergy));
    } else if (st.full_basis) {
      // exact <H> of the final model over the enumerated basis
      const Eigen::VectorXd v = materialize(res.model, *st.full_basis);
      res.final_energy.mean = dense_energy(cfg.hamiltonian, *st.full_basis, v);
      res.final_energy.std_error = 0.0;
    }
  }
  return res;
}

}  // namespace slpm
