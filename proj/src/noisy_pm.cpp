#include "slpm/noisy_pm.hpp"

#include <cmath>

#include "slpm/errors.hpp"
#include "slpm/rng.hpp"

namespace slpm {

Eigen::VectorXd orthogonalize_noise(const Eigen::VectorXd& delta,
                                    const Eigen::VectorXd& propagated) {
  if (delta.size() != propagated.size())
    throw std::invalid_argument("orthogonalize_noise: dimension mismatch");
  const double pp = propagated.squaredNorm();
  if (!(pp > 0.0))
    throw std::invalid_argument("orthogonalize_noise: zero propagated state");
  const double pd = propagated.dot(delta);
  const double den = pp + pd;
  if (std::abs(den) <= 1e-14 * (pp + std::abs(pd)))
    throw NumericalError(
        "orthogonalize_noise: propagated + delta cancels (singular noise)");
  return (pp * delta - pd * propagated) / den;
}

int stepcount_bound(double f0, double eps, const SpectrumInfo& sp, double lambda) {
  const double delta = 1.0 - (lambda - sp.e1) / (lambda - sp.e0);
  if (!(delta > 0.0))
    throw ConfigError("stepcount_bound: degenerate spectrum (delta <= 0)");
  const double tan0 = std::sqrt((1.0 - f0) / f0);
  const double raw = 4.0 / delta * std::log(tan0 / eps);
  return raw <= 0.0 ? 0 : static_cast<int>(std::ceil(raw));
}

TheoremCheckReport noisy_pm_run(const HamiltonianSpec& spec,
                                const ExactContext& ctx, double lambda,
                                const Eigen::VectorXd& psi0, double eps,
                                const NoiseSpec& noise, int n_steps) {
  spec.validate();
  if (!(eps > 0.0 && eps < 0.5))
    throw ConfigError("noisy_pm_run: eps must lie in (0, 1/2)");
  const SpectrumInfo& sp = ctx.spectrum;
  if (sp.degenerate)
    throw ConfigError("noisy_pm_run: theorem needs a unique dominant state");
  if (lambda < 0.5 * (sp.e1 + sp.e_max))
    throw ConfigError("noisy_pm_run: lambda below (E1+Emax)/2 premise");
  if (static_cast<size_t>(psi0.size()) != ctx.basis.dim())
    throw std::invalid_argument("noisy_pm_run: psi0 dimension mismatch");
  if (n_steps < 1) throw std::invalid_argument("noisy_pm_run: n_steps >= 1");

  TheoremCheckReport rep;
  rep.lambda = lambda;
  rep.eps = eps;
  const double ratio = (lambda - sp.e1) / (lambda - sp.e0);
  rep.delta = 1.0 - ratio;
  rep.omega = std::max(std::pow(ratio, 0.25), eps);
  rep.f0 = fidelity(psi0, ctx.ground);
  rep.tan_theta0 = std::sqrt((1.0 - rep.f0) / rep.f0);
  rep.m_bound = stepcount_bound(rep.f0, eps, sp, lambda);

  const double budget = rep.delta / 5.0;
  const double cos0 = std::abs(ctx.ground.dot(psi0)) / psi0.norm();

  Eigen::VectorXd psi = psi0;
  double tan_prev = rep.tan_theta0;
  rep.m_observed = rep.tan_theta0 <= eps ? 0 : -1;
  rep.contraction_all_ok = true;
  rep.assumptions_all_ok = true;
  rep.steady_ok = true;
  rep.max_steady_infid = 0.0;

  for (int step = 1; step <= n_steps; ++step) {
    const double psi_norm = psi.norm();
    const Eigen::VectorXd prop = dense_apply(spec, lambda, ctx.basis, psi);

    // noise basis inside the orthogonal complement of the propagated state:
    // a = ground-state direction, b = random direction orthogonal to both
    RngStream rng(noise.seed, {0x6e6f6973ULL, static_cast<uint64_t>(step)});
    const double pp = prop.squaredNorm();
    Eigen::VectorXd a = ctx.ground - (prop.dot(ctx.ground) / pp) * prop;
    const double a_norm = a.norm();
    const bool have_a = a_norm > 1e-13;
    if (have_a) a /= a_norm;

    Eigen::VectorXd b(psi.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.normal();
    b -= (prop.dot(b) / pp) * prop;
    if (have_a) b -= a.dot(b) * a;
    const double b_norm = b.norm();
    if (b_norm > 0.0) b /= b_norm;

    const double total_budget = noise.eps_scale * budget * eps * psi_norm;
    const double parallel_budget = noise.parallel_fraction * budget * cos0 * psi_norm;
    // |<Y0|a>| = a_norm before normalization; hit the parallel budget exactly
    double alpha = 0.0;
    if (have_a)
      alpha = std::min(parallel_budget / a_norm, total_budget) *
              (rng.next_u64() & 1 ? 1.0 : -1.0);
    const double beta =
        std::sqrt(std::max(total_budget * total_budget - alpha * alpha, 0.0));
    Eigen::VectorXd delta = beta * b;
    if (have_a) delta += alpha * a;

    NoisyStepRecord sr;
    sr.step = step;
    sr.noise_over_state = delta.norm() / psi_norm;
    sr.parallel_overlap = std::abs(ctx.ground.dot(delta)) / psi_norm;
    sr.assum1_ok = sr.parallel_overlap <= budget * cos0 * (1.0 + 1e-9);
    sr.assum2_ok = sr.noise_over_state <= budget * eps * (1.0 + 1e-9);

    Eigen::VectorXd next = prop + delta;
    const double next_norm = next.norm();
    if (!(next_norm > 0.0))
      throw NumericalError("noisy_pm_run: propagated + noise vanished");
    sr.gamma = 1.0 / next_norm;
    psi = next * sr.gamma;

    const double f = fidelity(psi, ctx.ground);
    sr.tan_theta = std::sqrt(std::max(0.0, 1.0 - f) / f);
    sr.contraction_ok =
        sr.tan_theta <= std::max(eps, rep.omega * tan_prev) * (1.0 + 1e-9) + 1e-12;

    if (rep.m_observed < 0 && sr.tan_theta <= eps) rep.m_observed = step;
    if (rep.m_observed >= 0 && step >= rep.m_observed) {
      const double infid = 1.0 - f;
      rep.max_steady_infid = std::max(rep.max_steady_infid, infid);
      if (infid > eps * eps) rep.steady_ok = false;
    }
    rep.contraction_all_ok = rep.contraction_all_ok && sr.contraction_ok;
    rep.assumptions_all_ok =
        rep.assumptions_all_ok && sr.assum1_ok && sr.assum2_ok;
    rep.final_infid = 1.0 - f;
    tan_prev = sr.tan_theta;
    rep.steps.push_back(sr);
  }

  rep.bound_ok = rep.m_observed >= 0 && rep.m_observed <= rep.m_bound;
  return rep;
}

bool verify_stepcount_bound(const TheoremCheckReport& rep) {
  const double tan0 = rep.tan_theta0;
  const double raw = 4.0 / rep.delta * std::log(tan0 / rep.eps);
  const int bound = raw <= 0.0 ? 0 : static_cast<int>(std::ceil(raw));
  return rep.m_observed >= 0 && rep.m_observed <= bound;
}

}  // namespace slpm
