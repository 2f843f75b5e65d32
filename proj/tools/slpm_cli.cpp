// Command-line driver: ground-state runs, dense oracles, noisy power-method
// theorem checks, kernel verification and scaling fits.

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "slpm/config.hpp"
#include "slpm/errors.hpp"
#include "slpm/kernel.hpp"
#include "slpm/noisy_pm.hpp"
#include "slpm/oracle.hpp"
#include "slpm/rng.hpp"
#include "slpm/scaling.hpp"
#include "slpm/slpm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw slpm::ConfigError("cannot open config file " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw slpm::ConfigError("config parse error in " + path + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw slpm::ConfigError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

fs::path resolve_out_dir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("SLPM_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  fs::create_directories(dir);
  return dir;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  int dense_cap = -1;          // -1: keep config value
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_threads = false) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")
      ->required();
  cmd->add_option("--out", o.out_dir,
                  "output directory (default: $SLPM_OUT_DIR or .)");
  if (with_threads)
    cmd->add_option("--threads", o.threads, "worker threads for seed fan-out")
        ->check(CLI::PositiveNumber);
  cmd->add_option("--dense-cap", o.dense_cap,
                  "max sites for exact tracking (overrides config)");
  cmd->add_option_function<uint64_t>(
      "--seed", [&o](const uint64_t& s) { o.seed = s; o.seed_set = true; },
      "override the config seed(s) with a single seed");
}

int run_slpm_cmd(const CommonOpts& opts) {
  slpm::cli::RunPlan plan = slpm::cli::parse_run_config(load_json(opts.config_path));
  if (opts.seed_set) plan.seeds = {opts.seed};
  if (opts.dense_cap >= 0) plan.base.dense_cap = opts.dense_cap;
  const fs::path out = resolve_out_dir(opts.out_dir);

  // one shared spectrum context when every run tracks the same Hamiltonian
  std::optional<slpm::ExactContext> shared;
  if (plan.base.track_exact)
    shared = slpm::make_exact_context(plan.base.hamiltonian, plan.base.dense_cap);

  std::mutex io_mutex;
  std::atomic<size_t> cursor{0};
  std::atomic<bool> numerical_failure{false};
  std::vector<std::exception_ptr> errors(plan.seeds.size());

  auto worker = [&] {
    for (;;) {
      const size_t k = cursor.fetch_add(1);
      if (k >= plan.seeds.size()) return;
      try {
        slpm::SlpmConfig cfg = plan.base;
        cfg.seed = plan.seeds[k];
        const std::string stem = "slpm_seed" + std::to_string(cfg.seed);
        std::ofstream csv(out / (stem + ".csv"));
        if (!csv)
          throw slpm::ConfigError("cannot write " + (out / (stem + ".csv")).string());
        csv << slpm::cli::csv_header() << '\n' << std::flush;
        const auto on_record = [&csv](const slpm::IterationRecord& r) {
          csv << slpm::cli::csv_row(r) << '\n' << std::flush;
        };
        const slpm::RunResult res =
            slpm::run(cfg, on_record, shared ? &*shared : nullptr);
        write_json(slpm::cli::run_summary(cfg, cfg.seed, res),
                   out / (stem + ".summary.json"));
        slpm::save_model(res.model, (out / (stem + ".model.bin")).string());
        {
          std::lock_guard<std::mutex> lock(io_mutex);
          if (res.aborted) {
            numerical_failure = true;
            std::cerr << "seed " << cfg.seed << ": aborted: " << res.abort_reason
                      << '\n';
          } else {
            std::cout << "seed " << cfg.seed << ": E = " << res.final_energy.mean
                      << " +/- " << res.final_energy.std_error << "  ("
                      << stem << ".csv)\n";
          }
        }
      } catch (...) {
        errors[k] = std::current_exception();
        return;
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(opts.threads, static_cast<int>(plan.seeds.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return numerical_failure ? 3 : 0;
}

int run_exact_cmd(const CommonOpts& opts) {
  slpm::cli::ExactPlan plan = slpm::cli::parse_exact_config(load_json(opts.config_path));
  if (opts.dense_cap >= 0) plan.dense_cap = opts.dense_cap;
  const fs::path out = resolve_out_dir(opts.out_dir);

  const slpm::ExactContext ctx =
      slpm::make_exact_context(plan.spec, plan.dense_cap, plan.tol);
  json j;
  j["schema"] = "slpm-exact/v1";
  j["spectrum"] = {{"e0", ctx.spectrum.e0},       {"e1", ctx.spectrum.e1},
                   {"e_max", ctx.spectrum.e_max}, {"gap", ctx.spectrum.gap},
                   {"degenerate", ctx.spectrum.degenerate},
                   {"converged", ctx.spectrum.converged},
                   {"iters_total", ctx.spectrum.iters_total}};
  j["dim"] = ctx.basis.dim();
  j["sector"] =
      ctx.basis.sector() == slpm::Sector::Full ? "full" : "zero_magnetization";
  if (plan.dump_ground) {
    slpm::save_dense_state(ctx.ground, ctx.basis, (out / "exact_ground.bin").string());
    j["ground_file"] = "exact_ground.bin";
  }
  write_json(j, out / "exact.json");
  std::cout << "E0 = " << ctx.spectrum.e0 << ", E1 = " << ctx.spectrum.e1
            << ", Emax = " << ctx.spectrum.e_max << "  (exact.json)\n";
  if (!ctx.spectrum.converged) {
    std::cerr << "power iteration hit its cap before the tolerance\n";
    return 3;
  }
  return 0;
}

int run_noisy_cmd(const CommonOpts& opts) {
  slpm::cli::NoisyPlan plan = slpm::cli::parse_noisy_config(load_json(opts.config_path));
  if (opts.dense_cap >= 0) plan.dense_cap = opts.dense_cap;
  if (opts.seed_set) {
    plan.seed = opts.seed;
    plan.noise.seed = opts.seed;
  }
  const fs::path out = resolve_out_dir(opts.out_dir);

  const slpm::ExactContext ctx = slpm::make_exact_context(plan.spec, plan.dense_cap);
  const double lambda = plan.lambda_auto
                            ? 0.5 * (ctx.spectrum.e1 + ctx.spectrum.e_max)
                            : plan.lambda;

  // start state with fidelity f0 against the ground state
  slpm::RngStream rng(plan.seed, {0x70736930ULL});
  Eigen::VectorXd u(ctx.ground.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
  u -= ctx.ground.dot(u) * ctx.ground;
  u /= u.norm();
  const Eigen::VectorXd psi0 =
      std::sqrt(plan.f0) * ctx.ground + std::sqrt(1.0 - plan.f0) * u;

  const slpm::TheoremCheckReport rep = slpm::noisy_pm_run(
      plan.spec, ctx, lambda, psi0, plan.eps, plan.noise, plan.n_steps);

  json j;
  j["schema"] = "slpm-noisy-pm/v1";
  j["lambda"] = rep.lambda;
  j["eps"] = rep.eps;
  j["delta"] = rep.delta;
  j["omega"] = rep.omega;
  j["f0"] = rep.f0;
  j["tan_theta0"] = rep.tan_theta0;
  j["m_bound"] = rep.m_bound;
  j["m_observed"] = rep.m_observed;
  j["bound_ok"] = rep.bound_ok;
  j["contraction_all_ok"] = rep.contraction_all_ok;
  j["assumptions_all_ok"] = rep.assumptions_all_ok;
  j["steady_ok"] = rep.steady_ok;
  j["final_infid"] = rep.final_infid;
  j["max_steady_infid"] = rep.max_steady_infid;
  json steps = json::array();
  for (const auto& s : rep.steps)
    steps.push_back({{"step", s.step},
                     {"tan_theta", s.tan_theta},
                     {"gamma", s.gamma},
                     {"noise_over_state", s.noise_over_state},
                     {"parallel_overlap", s.parallel_overlap},
                     {"contraction_ok", s.contraction_ok},
                     {"assum1_ok", s.assum1_ok},
                     {"assum2_ok", s.assum2_ok}});
  j["steps"] = steps;
  write_json(j, out / "noisy_pm.json");
  std::cout << "M_bound = " << rep.m_bound << ", M_observed = " << rep.m_observed
            << ", bound_ok = " << (rep.bound_ok ? "yes" : "no")
            << "  (noisy_pm.json)\n";
  return 0;
}

int verify_kernel_cmd(const CommonOpts& opts) {
  slpm::cli::KernelPlan plan = slpm::cli::parse_kernel_config(load_json(opts.config_path));
  if (opts.seed_set) plan.seed = opts.seed;
  const fs::path out = resolve_out_dir(opts.out_dir);

  const slpm::Lattice lat = slpm::build_lattice(plan.dims);
  slpm::KernelParams params;
  params.gamma = plan.gamma;
  params.z2_even = plan.z2_even;
  params.group = slpm::translation_group(lat);

  slpm::RngStream rng(plan.seed, {0x6b65726eULL});
  json pairs = json::array();
  double ss = 0.0;
  for (int k = 0; k < plan.n_pairs; ++k) {
    slpm::SpinConfig x = slpm::SpinConfig::zeros(lat.n_sites);
    slpm::SpinConfig y = slpm::SpinConfig::zeros(lat.n_sites);
    for (int i = 0; i < lat.n_sites; ++i) {
      if (rng.next_u64() & 1) x.set_spin(i, +1);
      if (rng.next_u64() & 1) y.set_spin(i, +1);
    }
    const double exact = slpm::kernel_eval(x, y, params);
    const double probe = slpm::empirical_ntk(
        x, y, params, plan.width, slpm::derive_seed(plan.seed, k, 7));
    const double rel = (probe - exact) / exact;
    ss += rel * rel;
    pairs.push_back({{"x", x.to_string()},
                     {"y", y.to_string()},
                     {"kernel", exact},
                     {"ntk", probe},
                     {"rel_err", rel}});
  }
  const double rms = std::sqrt(ss / plan.n_pairs);
  json j;
  j["schema"] = "slpm-kernel-check/v1";
  j["width"] = plan.width;
  j["rel_rms"] = rms;
  j["pairs"] = pairs;
  write_json(j, out / "kernel_check.json");
  std::cout << "rel RMS (width " << plan.width << ", " << plan.n_pairs
            << " pairs) = " << rms << "  (kernel_check.json)\n";
  return 0;
}

int fit_scaling_cmd(const CommonOpts& opts) {
  slpm::cli::ScalingPlan plan =
      slpm::cli::parse_scaling_config(load_json(opts.config_path));
  const fs::path out = resolve_out_dir(opts.out_dir);

  std::vector<std::pair<double, double>> pts = plan.points;
  for (const auto& path : plan.summaries) {
    const json s = load_json(path);
    if (!s.contains("config") || !s.contains("metrics") ||
        !s.at("metrics").contains(plan.field))
      throw slpm::ConfigError("summary " + path + " lacks metrics." + plan.field);
    pts.emplace_back(s.at("config").at("n_samples").get<double>(),
                     s.at("metrics").at(plan.field).get<double>());
  }
  slpm::ScalingFit fit;
  try {
    fit = slpm::fit_scaling(pts);
  } catch (const std::invalid_argument& e) {
    throw slpm::ConfigError(e.what());
  }
  json j;
  j["schema"] = "slpm-scaling/v1";
  j["alpha"] = fit.alpha;
  j["amplitude"] = fit.amplitude;
  j["r2"] = fit.r2;
  json jp = json::array();
  for (const auto& [x, y] : pts) jp.push_back({x, y});
  j["points"] = jp;
  write_json(j, out / "scaling.json");
  std::cout << "alpha = " << fit.alpha << ", A = " << fit.amplitude
            << ", r2 = " << fit.r2 << "  (scaling.json)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-learning power method for lattice spin ground states"};
  app.require_subcommand(1);

  CommonOpts run_o, exact_o, noisy_o, kernel_o, scaling_o;
  CLI::App* c_run = app.add_subcommand("run-slpm", "sampled/learned power iteration");
  add_common(c_run, run_o, true);
  CLI::App* c_exact = app.add_subcommand("run-exact", "dense spectrum oracle");
  add_common(c_exact, exact_o);
  CLI::App* c_noisy =
      app.add_subcommand("run-noisy-pm", "noise-budgeted power-method theorem check");
  add_common(c_noisy, noisy_o);
  CLI::App* c_kernel =
      app.add_subcommand("verify-kernel", "finite-width tangent kernel probe");
  add_common(c_kernel, kernel_o);
  CLI::App* c_scaling =
      app.add_subcommand("fit-scaling", "power-law fit of accuracy vs sample size");
  add_common(c_scaling, scaling_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_run->parsed()) return run_slpm_cmd(run_o);
    if (c_exact->parsed()) return run_exact_cmd(exact_o);
    if (c_noisy->parsed()) return run_noisy_cmd(noisy_o);
    if (c_kernel->parsed()) return verify_kernel_cmd(kernel_o);
    if (c_scaling->parsed()) return fit_scaling_cmd(scaling_o);
  } catch (const slpm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const slpm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
