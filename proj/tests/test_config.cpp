#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <string>

#include "slpm/config.hpp"
#include "slpm/errors.hpp"

using namespace slpm;
using nlohmann::json;

TEST_CASE("run configs parse with defaults and strict keys") {
  const json j = json::parse(R"({
    "model": "tfi", "dims": [8], "h": 1.0,
    "n_iters": 12, "n_samples": 256, "seed": 9
  })");
  const cli::RunPlan plan = cli::parse_run_config(j);
  CHECK(plan.base.hamiltonian.model == Model::TFI);
  CHECK(plan.base.hamiltonian.lattice.n_sites == 8);
  CHECK(plan.base.hamiltonian.h == 1.0);
  CHECK(plan.base.n_iters == 12);
  CHECK(plan.base.n_samples == 256);
  CHECK(plan.base.lambda_shift == 1.0);     // default shift
  CHECK(plan.base.gamma == 0.5808);         // default kernel curvature
  CHECK(plan.base.lambda_ridge == 1e-8);    // default regularization
  CHECK(plan.base.sampler.move == Move::SingleFlip);
  REQUIRE(plan.seeds.size() == 1);
  CHECK(plan.seeds[0] == 9);

  json unknown = j;
  unknown["n_itres"] = 3;
  CHECK_THROWS_WITH_AS(cli::parse_run_config(unknown),
                       doctest::Contains("n_itres"), ConfigError);
}

TEST_CASE("seed list and scalar seed are mutually exclusive") {
  json j = json::parse(
      R"({"model": "tfi", "dims": [8], "h": 1.0, "n_iters": 2, "n_samples": 64})");
  j["seeds"] = {1, 2, 3};
  const cli::RunPlan plan = cli::parse_run_config(j);
  CHECK(plan.seeds == std::vector<uint64_t>{1, 2, 3});

  j["seed"] = 4;
  CHECK_THROWS_AS(cli::parse_run_config(j), ConfigError);
}

TEST_CASE("model-specific keys are rejected on the other model") {
  json tfi = json::parse(
      R"({"model": "tfi", "dims": [8], "h": 1.0, "n_iters": 2, "n_samples": 64})");
  tfi["marshall"] = true;
  CHECK_THROWS_AS(cli::parse_run_config(tfi), ConfigError);

  json afh = json::parse(
      R"({"model": "afh", "dims": [8], "marshall": true, "n_iters": 2, "n_samples": 64})");
  CHECK(cli::parse_run_config(afh).base.hamiltonian.model == Model::AFH);
  CHECK(cli::parse_run_config(afh).base.sampler.move == Move::Exchange);
  afh["h"] = 1.0;
  CHECK_THROWS_AS(cli::parse_run_config(afh), ConfigError);
}

TEST_CASE("sampler and dataset blocks parse strictly") {
  json j = json::parse(R"({
    "model": "tfi", "dims": [8], "h": 2.0, "n_iters": 2,
    "dataset": "full_basis",
    "sampler": {"n_chains": 8, "burn_in_sweeps": 4}
  })");
  const cli::RunPlan plan = cli::parse_run_config(j);
  CHECK(plan.base.dataset_mode == DatasetMode::FullBasis);
  CHECK(plan.base.sampler.n_chains == 8);
  CHECK(plan.base.sampler.burn_in_sweeps == 4);
  CHECK(plan.base.sampler.sweeps_per_sample == 1);

  j["sampler"]["swps"] = 2;
  CHECK_THROWS_WITH_AS(cli::parse_run_config(j), doctest::Contains("swps"),
                       ConfigError);
  j["sampler"].erase("swps");
  j["dataset"] = "all_of_them";
  CHECK_THROWS_AS(cli::parse_run_config(j), ConfigError);
}

TEST_CASE("csv rows mirror the record optionals") {
  CHECK(cli::csv_header() ==
        "iter,energy_mean,energy_stderr,acceptance,n_unique,log_shift,"
        "step_infid,infid,rel_err");
  IterationRecord rec;
  rec.iter = 3;
  rec.energy_mean = -1.5;
  rec.energy_stderr = 0.25;
  rec.acceptance = 0.5;
  rec.n_unique = 17;
  rec.log_shift = 2.0;
  const std::string bare = cli::csv_row(rec);
  CHECK(bare.substr(0, 2) == "3,");
  CHECK(bare.substr(bare.size() - 3) == ",,,");

  rec.step_infid = 1e-7;
  rec.infid = 0.125;
  rec.rel_err = 0.0625;
  const std::string full = cli::csv_row(rec);
  CHECK(full.find(",,") == std::string::npos);
  CHECK(full.find("0.125") != std::string::npos);
}

TEST_CASE("g17 formatting round-trips doubles exactly") {
  for (double v : {-35.617546, 1e-300, 0.1, 3.141592653589793, -0.0}) {
    const std::string s = cli::format_g17(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("run summaries serialize the configuration echo") {
  const json j = json::parse(R"({
    "model": "tfi", "dims": [4], "h": 2.0,
    "n_iters": 2, "n_samples": 64, "seed": 5,
    "sampler": {"n_chains": 8}
  })");
  const cli::RunPlan plan = cli::parse_run_config(j);
  RunResult res;
  res.records.push_back({});
  res.records.back().iter = 1;
  res.final_energy.mean = -8.0;
  res.final_energy.std_error = 0.5;
  const json summary = cli::run_summary(plan.base, 5, res);
  CHECK(summary["schema"] == "slpm-run/v1");
  CHECK(summary["seed"] == 5);
  CHECK(summary["config"]["hamiltonian"]["model"] == "tfi");
  CHECK(summary["config"]["n_samples"] == 64);
  CHECK(summary["final_energy"]["mean"] == -8.0);
  CHECK(summary["completed_iters"] == 1);
  CHECK_FALSE(summary["aborted"].get<bool>());
  // must parse back from its own dump
  const json reparsed = json::parse(summary.dump());
  CHECK(reparsed == summary);
}

TEST_CASE("exact and noisy plans parse") {
  const cli::ExactPlan ep = cli::parse_exact_config(
      json::parse(R"({"model": "afh", "dims": [20], "marshall": true})"));
  CHECK(ep.spec.model == Model::AFH);
  CHECK(ep.tol == 1e-11);

  const cli::NoisyPlan np = cli::parse_noisy_config(json::parse(
      R"({"model": "tfi", "dims": [8], "h": 1.5, "eps": 0.2, "n_steps": 30})"));
  CHECK(np.eps == 0.2);
  CHECK(np.n_steps == 30);
  CHECK(np.lambda_auto);

  CHECK_THROWS_AS(cli::parse_exact_config(json::parse(
                      R"({"model": "afh", "dims": [20], "marshal": true})")),
                  ConfigError);
}
