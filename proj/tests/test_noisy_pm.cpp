#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "slpm/errors.hpp"
#include "slpm/noisy_pm.hpp"
#include "slpm/rng.hpp"

using namespace slpm;

namespace {

Eigen::VectorXd random_vec(int dim, RngStream& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

Eigen::VectorXd mixed_start(const ExactContext& ctx, double f0, uint64_t seed) {
  RngStream rng(seed, {0xabcdULL});
  Eigen::VectorXd u = random_vec(static_cast<int>(ctx.basis.dim()), rng);
  u -= ctx.ground.dot(u) * ctx.ground;
  u.normalize();
  return std::sqrt(f0) * ctx.ground + std::sqrt(1.0 - f0) * u;
}

}  // namespace

TEST_CASE("noise orthogonalization preserves the perturbed direction") {
  RngStream rng(61);
  const Eigen::VectorXd p = random_vec(30, rng);
  const Eigen::VectorXd d = 0.3 * random_vec(30, rng);
  const Eigen::VectorXd d_perp = orthogonalize_noise(d, p);

  CHECK(std::abs(p.dot(d_perp)) < 1e-10 * p.norm() * (1.0 + d_perp.norm()));
  // p + d and p + d_perp must be collinear
  const Eigen::VectorXd a = (p + d).normalized();
  const Eigen::VectorXd b = (p + d_perp).normalized();
  CHECK(std::min((a - b).norm(), (a + b).norm()) < 1e-12);
}

TEST_CASE("orthogonal noise passes through unchanged") {
  RngStream rng(62);
  const Eigen::VectorXd p = random_vec(12, rng);
  Eigen::VectorXd d = random_vec(12, rng);
  d -= p.dot(d) / p.squaredNorm() * p;
  const Eigen::VectorXd d_perp = orthogonalize_noise(d, p);
  CHECK((d_perp - d).norm() < 1e-12 * (1.0 + d.norm()));
}

TEST_CASE("parallel noise collapses to zero") {
  RngStream rng(63);
  const Eigen::VectorXd p = random_vec(12, rng);
  const Eigen::VectorXd d_perp = orthogonalize_noise(0.4 * p, p);
  CHECK(d_perp.norm() < 1e-12 * p.norm());
}

TEST_CASE("cancelling perturbations cannot be orthogonalized") {
  RngStream rng(64);
  const Eigen::VectorXd p = random_vec(12, rng);
  CHECK_THROWS_AS(orthogonalize_noise(-p, p), NumericalError);
}

TEST_CASE("step-count bound freezes the logarithmic contraction estimate") {
  SpectrumInfo sp;
  sp.e0 = -1.0;
  sp.e1 = -0.8;
  sp.e_max = 1.0;
  // lambda = 0: delta = 1 - 0.8 = 0.2; f0 = 0.5 gives tan(theta0) = 1
  CHECK(stepcount_bound(0.5, 0.1, sp, 0.0) == 47);  // ceil(20 ln 10)
  CHECK(stepcount_bound(0.5, 0.5, sp, 0.0) == ceil(20 * std::log(2.0)));
  // tan(theta0) <= eps clamps at zero
  CHECK(stepcount_bound(0.999999, 0.5, sp, 0.0) == 0);
  // a shift below the spectrum has no contraction
  CHECK_THROWS_AS(stepcount_bound(0.5, 0.1, sp, -1.5), ConfigError);
}

TEST_CASE("noiseless iteration contracts at the spectral ratio") {
  const HamiltonianSpec spec = make_tfi({8}, 1.5);
  const ExactContext ctx = make_exact_context(spec, 8);
  const double lambda = 0.5 * (ctx.spectrum.e1 + ctx.spectrum.e_max);
  const double ratio =
      (lambda - ctx.spectrum.e1) / (lambda - ctx.spectrum.e0);

  NoiseSpec noise;
  noise.eps_scale = 0.0;  // pure power iteration
  const Eigen::VectorXd psi0 = mixed_start(ctx, 0.5, 9);
  const TheoremCheckReport rep =
      noisy_pm_run(spec, ctx, lambda, psi0, 0.05, noise, 40);

  REQUIRE(rep.steps.size() == 40);
  double tan_prev = rep.tan_theta0;
  for (const NoisyStepRecord& s : rep.steps) {
    CHECK(s.noise_over_state == 0.0);
    CHECK(s.tan_theta <= ratio * tan_prev * (1.0 + 1e-9));
    CHECK(s.contraction_ok);
    tan_prev = s.tan_theta;
  }
  CHECK(rep.contraction_all_ok);
  CHECK(rep.assumptions_all_ok);
  CHECK(rep.steady_ok);
  CHECK(rep.bound_ok);
  CHECK(rep.m_observed >= 0);
  CHECK(rep.m_observed <= rep.m_bound);
  CHECK(verify_stepcount_bound(rep));
  CHECK(rep.final_infid < 0.05 * 0.05);
}

TEST_CASE("boundary-budget noise still satisfies every theorem clause") {
  const HamiltonianSpec spec = make_afh({6}, true);
  const ExactContext ctx = make_exact_context(spec, 6);
  const double lambda = 0.5 * (ctx.spectrum.e1 + ctx.spectrum.e_max);

  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    NoiseSpec noise;
    noise.seed = seed;
    const Eigen::VectorXd psi0 = mixed_start(ctx, 0.6, seed);
    const TheoremCheckReport rep =
        noisy_pm_run(spec, ctx, lambda, psi0, 0.1, noise, 80);

    CHECK(rep.contraction_all_ok);
    CHECK(rep.assumptions_all_ok);
    CHECK(rep.steady_ok);
    CHECK(rep.bound_ok);
    CHECK(rep.m_observed >= 0);
    CHECK(verify_stepcount_bound(rep));
    CHECK(rep.max_steady_infid <= 0.1 * 0.1 * (1.0 + 1e-9));

    // with both budgets saturated the injected noise sits exactly on the
    // norm allowance
    const double allowance = (rep.delta / 5.0) * rep.eps;
    for (const NoisyStepRecord& s : rep.steps)
      CHECK(s.noise_over_state == doctest::Approx(allowance).epsilon(1e-9));
  }
}

TEST_CASE("budget violations are detected and flagged") {
  const HamiltonianSpec spec = make_tfi({8}, 1.5);
  const ExactContext ctx = make_exact_context(spec, 8);
  const double lambda = 0.5 * (ctx.spectrum.e1 + ctx.spectrum.e_max);

  NoiseSpec noise;
  noise.eps_scale = 40.0;  // far beyond the admissible norm budget
  const Eigen::VectorXd psi0 = mixed_start(ctx, 0.5, 17);
  const TheoremCheckReport rep =
      noisy_pm_run(spec, ctx, lambda, psi0, 0.05, noise, 40);
  CHECK_FALSE(rep.assumptions_all_ok);
  bool any_assum2_broken = false;
  for (const NoisyStepRecord& s : rep.steps)
    any_assum2_broken = any_assum2_broken || !s.assum2_ok;
  CHECK(any_assum2_broken);
}

TEST_CASE("run preconditions are enforced") {
  const HamiltonianSpec spec = make_tfi({6}, 1.5);
  const ExactContext ctx = make_exact_context(spec, 6);
  const Eigen::VectorXd psi0 = mixed_start(ctx, 0.5, 5);
  NoiseSpec noise;
  // eps outside (0, 1/2)
  CHECK_THROWS_AS(noisy_pm_run(spec, ctx, 10.0, psi0, 0.7, noise, 10),
                  ConfigError);
  // shift below the dominance threshold
  const double low = 0.5 * (ctx.spectrum.e0 + ctx.spectrum.e1);
  CHECK_THROWS_AS(noisy_pm_run(spec, ctx, low, psi0, 0.1, noise, 10),
                  ConfigError);
}

TEST_CASE("orthogonal perturbation norms tie exactly to the infidelity") {
  // for D orthogonal to the propagated state p, the infidelity of p + D
  // against p satisfies ||D||/||p|| = sqrt(I/(1-I)); combined with the
  // operator norm this caps ||D|| by (lambda - E0) sqrt(I/(1-I)) ||Psi||
  const HamiltonianSpec spec = make_tfi({8}, 1.2);
  const ExactContext ctx = make_exact_context(spec, 8);
  const double lambda = 1.0 + ctx.spectrum.e_max;
  RngStream rng(66);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd psi = random_vec(256, rng);
    const Eigen::VectorXd p = dense_apply(spec, lambda, ctx.basis, psi);
    const Eigen::VectorXd d =
        orthogonalize_noise(0.05 * random_vec(256, rng), p);
    const double infid = 1.0 - fidelity(p, p + d);
    const double lhs = d.norm() / psi.norm();
    const double identity = d.norm() / p.norm();
    CHECK(identity == doctest::Approx(std::sqrt(infid / (1.0 - infid)))
                          .epsilon(1e-8));
    CHECK(lhs <= (lambda - ctx.spectrum.e0) *
                     std::sqrt(infid / (1.0 - infid)) * (1.0 + 1e-10));
  }
}
