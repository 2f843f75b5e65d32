#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "slpm/noisy_pm.hpp"
#include "slpm/slpm.hpp"

// JSON experiment configs (strict: unknown keys are rejected), CSV rows and
// run summaries for the command-line driver.
namespace slpm::cli {

struct RunPlan {
  SlpmConfig base;
  std::vector<uint64_t> seeds;  // one run per seed
};

RunPlan parse_run_config(const nlohmann::json& j);

struct ExactPlan {
  HamiltonianSpec spec;
  double tol = 1e-11;
  bool dump_ground = false;
  int dense_cap = 20;
};

ExactPlan parse_exact_config(const nlohmann::json& j);

struct NoisyPlan {
  HamiltonianSpec spec;
  double lambda = 0.0;
  bool lambda_auto = true;  // (E1+Emax)/2 once the spectrum is known
  double eps = 0.1;
  int n_steps = 100;
  double f0 = 0.5;          // fidelity of the constructed start state
  NoiseSpec noise;
  int dense_cap = 20;
  uint64_t seed = 1;
};

NoisyPlan parse_noisy_config(const nlohmann::json& j);

struct KernelPlan {
  std::vector<int> dims;
  double gamma = 0.5808;
  bool z2_even = true;
  int width = 65536;
  int n_pairs = 20;
  uint64_t seed = 1;
};

KernelPlan parse_kernel_config(const nlohmann::json& j);

struct ScalingPlan {
  std::vector<std::pair<double, double>> points;
  std::vector<std::string> summaries;  // run summary files to harvest
  std::string field;                   // metrics key, e.g. final_step_infid
};

ScalingPlan parse_scaling_config(const nlohmann::json& j);

std::string csv_header();
std::string csv_row(const IterationRecord& rec);

nlohmann::json config_echo(const SlpmConfig& cfg);
nlohmann::json run_summary(const SlpmConfig& cfg, uint64_t seed,
                           const RunResult& res);

std::string format_g17(double v);

}  // namespace slpm::cli
