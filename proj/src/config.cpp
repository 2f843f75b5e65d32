#include "slpm/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "slpm/errors.hpp"

namespace slpm::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + key + "'");
  }
}

template <class T>
T get_req(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + key + "'");
  }
}

HamiltonianSpec parse_hamiltonian(const json& j) {
  const std::string model = get_req<std::string>(j, "model");
  const std::vector<int> dims = get_req<std::vector<int>>(j, "dims");
  if (model == "tfi") {
    if (j.contains("marshall"))
      throw ConfigError("config: 'marshall' applies to afh only");
    return make_tfi(dims, get_req<double>(j, "h"));
  }
  if (model == "afh") {
    if (j.contains("h")) throw ConfigError("config: 'h' applies to tfi only");
    return make_afh(dims, get_or<bool>(j, "marshall", true));
  }
  throw ConfigError("config: model must be 'tfi' or 'afh'");
}

SamplerConfig parse_sampler(const json& j, Move move) {
  SamplerConfig s;
  s.move = move;
  if (j.is_null()) return s;
  check_keys(j, "sampler", {"n_chains", "burn_in_sweeps", "sweeps_per_sample"});
  s.n_chains = get_or<int>(j, "n_chains", s.n_chains);
  s.burn_in_sweeps = get_or<int>(j, "burn_in_sweeps", s.burn_in_sweeps);
  s.sweeps_per_sample = get_or<int>(j, "sweeps_per_sample", s.sweeps_per_sample);
  return s;
}

}  // namespace

RunPlan parse_run_config(const json& j) {
  check_keys(j, "run config",
             {"model", "dims", "h", "marshall", "lambda_shift", "n_iters",
              "n_samples", "gamma", "z2_even", "lambda_ridge", "count_reg",
              "dataset", "sampler", "seed", "seeds", "track_exact",
              "track_stride", "energy_samples", "dense_cap"});
  RunPlan plan;
  SlpmConfig& c = plan.base;
  c.hamiltonian = parse_hamiltonian(j);
  c.lambda_shift = get_or<double>(j, "lambda_shift", c.lambda_shift);
  c.n_iters = get_req<int>(j, "n_iters");
  c.gamma = get_or<double>(j, "gamma", c.gamma);
  c.z2_even = get_or<bool>(j, "z2_even", c.z2_even);
  c.lambda_ridge = get_or<double>(j, "lambda_ridge", c.lambda_ridge);
  c.count_reg = get_or<bool>(j, "count_reg", c.count_reg);
  c.track_exact = get_or<bool>(j, "track_exact", false);
  c.track_stride = get_or<int>(j, "track_stride", 0);
  c.dense_cap = get_or<int>(j, "dense_cap", 20);
  c.energy_samples = get_or<size_t>(j, "energy_samples", 0);

  const std::string dataset = get_or<std::string>(j, "dataset", "sampled");
  if (dataset == "sampled") {
    c.dataset_mode = DatasetMode::Sampled;
    c.n_samples = get_req<size_t>(j, "n_samples");
  } else if (dataset == "full_basis") {
    c.dataset_mode = DatasetMode::FullBasis;
    c.n_samples = get_or<size_t>(j, "n_samples", 0);
  } else {
    throw ConfigError("config: dataset must be 'sampled' or 'full_basis'");
  }

  const Move move =
      c.hamiltonian.model == Model::AFH ? Move::Exchange : Move::SingleFlip;
  c.sampler = parse_sampler(j.contains("sampler") ? j.at("sampler") : json(),
                            move);

  if (j.contains("seed") && j.contains("seeds"))
    throw ConfigError("config: give either 'seed' or 'seeds', not both");
  if (j.contains("seeds")) {
    plan.seeds = get_req<std::vector<uint64_t>>(j, "seeds");
    if (plan.seeds.empty()) throw ConfigError("config: 'seeds' must be nonempty");
  } else {
    plan.seeds.push_back(get_or<uint64_t>(j, "seed", 1));
  }
  c.seed = plan.seeds.front();
  c.validate();
  return plan;
}

ExactPlan parse_exact_config(const json& j) {
  check_keys(j, "exact config",
             {"model", "dims", "h", "marshall", "tol", "dump_ground", "dense_cap"});
  ExactPlan p;
  p.spec = parse_hamiltonian(j);
  p.tol = get_or<double>(j, "tol", p.tol);
  p.dump_ground = get_or<bool>(j, "dump_ground", false);
  p.dense_cap = get_or<int>(j, "dense_cap", p.dense_cap);
  return p;
}

NoisyPlan parse_noisy_config(const json& j) {
  check_keys(j, "noisy-pm config",
             {"model", "dims", "h", "marshall", "lambda", "eps", "n_steps", "f0",
              "noise", "dense_cap", "seed"});
  NoisyPlan p;
  p.spec = parse_hamiltonian(j);
  if (j.contains("lambda")) {
    p.lambda = get_req<double>(j, "lambda");
    p.lambda_auto = false;
  }
  p.eps = get_or<double>(j, "eps", p.eps);
  p.n_steps = get_or<int>(j, "n_steps", p.n_steps);
  p.f0 = get_or<double>(j, "f0", p.f0);
  if (!(p.f0 > 0.0 && p.f0 < 1.0))
    throw ConfigError("config: f0 must lie in (0,1)");
  p.dense_cap = get_or<int>(j, "dense_cap", p.dense_cap);
  p.seed = get_or<uint64_t>(j, "seed", p.seed);
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    check_keys(n, "noise", {"eps_scale", "parallel_fraction", "seed"});
    p.noise.eps_scale = get_or<double>(n, "eps_scale", 1.0);
    p.noise.parallel_fraction = get_or<double>(n, "parallel_fraction", 1.0);
    p.noise.seed = get_or<uint64_t>(n, "seed", p.seed);
  } else {
    p.noise.seed = p.seed;
  }
  return p;
}

KernelPlan parse_kernel_config(const json& j) {
  check_keys(j, "kernel config",
             {"dims", "gamma", "z2_even", "width", "n_pairs", "seed"});
  KernelPlan p;
  p.dims = get_req<std::vector<int>>(j, "dims");
  p.gamma = get_or<double>(j, "gamma", p.gamma);
  p.z2_even = get_or<bool>(j, "z2_even", p.z2_even);
  p.width = get_or<int>(j, "width", p.width);
  p.n_pairs = get_or<int>(j, "n_pairs", p.n_pairs);
  p.seed = get_or<uint64_t>(j, "seed", p.seed);
  return p;
}

ScalingPlan parse_scaling_config(const json& j) {
  check_keys(j, "scaling config", {"points", "summaries", "field"});
  ScalingPlan p;
  if (j.contains("points")) {
    for (const auto& e : j.at("points")) {
      if (!e.is_array() || e.size() != 2)
        throw ConfigError("config: each point must be [n, value]");
      p.points.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
  }
  if (j.contains("summaries")) {
    p.summaries = get_req<std::vector<std::string>>(j, "summaries");
    p.field = get_or<std::string>(j, "field", "final_step_infid");
  }
  if (p.points.empty() && p.summaries.empty())
    throw ConfigError("config: need 'points' or 'summaries'");
  return p;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_header() {
  return "iter,energy_mean,energy_stderr,acceptance,n_unique,log_shift,"
         "step_infid,infid,rel_err";
}

std::string csv_row(const IterationRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_g17(*v) : std::string();
  };
  std::string row = std::to_string(r.iter);
  row += ',' + format_g17(r.energy_mean);
  row += ',' + format_g17(r.energy_stderr);
  row += ',' + format_g17(r.acceptance);
  row += ',' + std::to_string(r.n_unique);
  row += ',' + format_g17(r.log_shift);
  row += ',' + opt(r.step_infid);
  row += ',' + opt(r.infid);
  row += ',' + opt(r.rel_err);
  return row;
}

nlohmann::json config_echo(const SlpmConfig& c) {
  json h;
  h["model"] = c.hamiltonian.model == Model::TFI ? "tfi" : "afh";
  h["dims"] = c.hamiltonian.lattice.dims;
  if (c.hamiltonian.model == Model::TFI)
    h["h"] = c.hamiltonian.h;
  else
    h["marshall"] = c.hamiltonian.marshall;

  json s;
  s["n_chains"] = c.sampler.n_chains;
  s["burn_in_sweeps"] = c.sampler.burn_in_sweeps;
  s["sweeps_per_sample"] = c.sampler.sweeps_per_sample;

  json out;
  out["hamiltonian"] = h;
  out["lambda_shift"] = c.lambda_shift;
  out["n_iters"] = c.n_iters;
  out["n_samples"] = c.n_samples;
  out["gamma"] = c.gamma;
  out["z2_even"] = c.z2_even;
  out["lambda_ridge"] = c.lambda_ridge;
  out["count_reg"] = c.count_reg;
  out["dataset"] =
      c.dataset_mode == DatasetMode::Sampled ? "sampled" : "full_basis";
  out["sampler"] = s;
  out["track_exact"] = c.track_exact;
  out["track_stride"] = c.track_stride;
  out["dense_cap"] = c.dense_cap;
  out["energy_samples"] = c.energy_samples;
  return out;
}

nlohmann::json run_summary(const SlpmConfig& cfg, uint64_t seed,
                           const RunResult& res) {
  json out;
  out["schema"] = "slpm-run/v1";
  out["artifact"] = {{"name", "slpm"}, {"version", "0.1.0"}};
  out["config"] = config_echo(cfg);
  out["seed"] = seed;
  out["aborted"] = res.aborted;
  if (res.aborted) out["abort_reason"] = res.abort_reason;
  out["warnings"] = res.warnings;
  out["completed_iters"] = res.records.size();
  out["final_energy"] = {{"mean", res.final_energy.mean},
                         {"std_error", res.final_energy.std_error},
                         {"acceptance", res.final_energy.acceptance}};
  if (res.spectrum) {
    out["spectrum"] = {{"e0", res.spectrum->e0},
                       {"e1", res.spectrum->e1},
                       {"e_max", res.spectrum->e_max},
                       {"gap", res.spectrum->gap},
                       {"degenerate", res.spectrum->degenerate},
                       {"converged", res.spectrum->converged}};
    out["contraction"] = {{"ratio", res.contraction_ratio},
                          {"branch", res.contraction_branch}};
  }
  json metrics;
  if (!res.records.empty()) {
    const IterationRecord& last = res.records.back();
    metrics["final_iter_energy"] = last.energy_mean;
    metrics["final_n_unique"] = last.n_unique;
    metrics["final_log_shift"] = last.log_shift;
    metrics["final_acceptance"] = last.acceptance;
    if (last.step_infid) metrics["final_step_infid"] = *last.step_infid;
    if (last.infid) metrics["final_infid"] = *last.infid;
    if (last.rel_err) metrics["final_rel_err"] = *last.rel_err;
  }
  out["metrics"] = metrics;
  out["phase_seconds"] = res.phase_seconds;
  return out;
}

}  // namespace slpm::cli
