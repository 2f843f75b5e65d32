#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <vector>

#include "slpm/kernel.hpp"
#include "slpm/lattice.hpp"
#include "slpm/rng.hpp"

using namespace slpm;

namespace {

SpinConfig random_config(int n, RngStream& rng) {
  SpinConfig c = SpinConfig::zeros(n);
  for (int i = 0; i < n; ++i)
    if (rng.next_u64() & 1) c.flip(i);
  return c;
}

// Plain double-loop reference: group average of sigma over spin overlaps.
double kernel_reference(const SpinConfig& x, const SpinConfig& y,
                        const KernelParams& p) {
  double acc = 0;
  for (const auto& g : p.group.elems) {
    const SpinConfig gx = apply_perm(g, x);
    double t = 0;
    for (int i = 0; i < x.n; ++i) t += gx.spin(i) * y.spin(i);
    t /= x.n;
    acc += t * std::asin(p.gamma * t);
  }
  return acc / p.group.size();
}

KernelParams ring_params(int n) {
  KernelParams p;
  p.group = translation_group(build_lattice({n}));
  return p;
}

}  // namespace

TEST_CASE("sigma at unit overlap") {
  CHECK(sigma_fn(1.0, 0.5808) == doctest::Approx(std::asin(0.5808)).epsilon(1e-15));
  CHECK(sigma_fn(1.0, 0.5808) == doctest::Approx(0.61971109163817).epsilon(1e-12));
  // even function, zero at zero overlap
  CHECK(sigma_fn(-0.3, 0.5808) == sigma_fn(0.3, 0.5808));
  CHECK(sigma_fn(0.0, 0.5808) == 0.0);
}

TEST_CASE("sigma table covers the reduced hamming range") {
  for (int n : {4, 9, 20}) {
    const std::vector<double> tbl = sigma_table(n, 0.5808);
    REQUIRE(static_cast<int>(tbl.size()) == n / 2 + 1);
    for (int r = 0; r <= n / 2; ++r) {
      const double t = double(n - 2 * r) / n;
      CHECK(tbl[r] == doctest::Approx(sigma_fn(t, 0.5808)).epsilon(1e-15));
    }
  }
}

TEST_CASE("kernel matches the reference loop and is symmetric") {
  RngStream rng(21);
  const KernelParams p = ring_params(12);
  for (int rep = 0; rep < 40; ++rep) {
    const SpinConfig x = random_config(12, rng);
    const SpinConfig y = random_config(12, rng);
    const double k = kernel_eval(x, y, p);
    CHECK(k == doctest::Approx(kernel_reference(x, y, p)).epsilon(1e-13));
    CHECK(k == doctest::Approx(kernel_eval(y, x, p)).epsilon(1e-13));
  }
}

TEST_CASE("kernel is invariant under global flips and translations") {
  RngStream rng(22);
  KernelParams p = ring_params(10);
  for (bool z2 : {true, false}) {
    p.z2_even = z2;  // the kernel itself never depends on this switch
    const SpinConfig x = random_config(10, rng);
    const SpinConfig y = random_config(10, rng);
    const double k = kernel_eval(x, y, p);
    CHECK(kernel_eval(x.global_flip(), y, p) == doctest::Approx(k).epsilon(1e-14));
    CHECK(kernel_eval(x, y.global_flip(), p) == doctest::Approx(k).epsilon(1e-14));
    for (const auto& g : p.group.elems) {
      CHECK(kernel_eval(apply_perm(g, x), y, p) == doctest::Approx(k).epsilon(1e-13));
      CHECK(kernel_eval(apply_perm(g, x), apply_perm(g, y), p) ==
            doctest::Approx(k).epsilon(1e-13));
    }
  }
}

TEST_CASE("gram matrix equals pairwise kernel evaluations") {
  RngStream rng(23);
  for (int n : {14, 36}) {  // exercises the packed row path and the wide fallback
    KernelParams p = ring_params(n);
    std::vector<SpinConfig> samples;
    for (int i = 0; i < 25; ++i) samples.push_back(random_config(n, rng));
    const GramMatrix gm = gram_matrix(samples, p);
    REQUIRE(gm.K.rows() == 25);
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 25; ++j)
        CHECK(gm.K(i, j) ==
              doctest::Approx(kernel_eval(samples[i], samples[j], p)).epsilon(1e-12));
  }
}

TEST_CASE("gram matrix is positive semidefinite") {
  RngStream rng(24);
  const KernelParams p = ring_params(12);
  std::set<SpinConfig> distinct;
  while (distinct.size() < 60) distinct.insert(random_config(12, rng));
  std::vector<SpinConfig> samples(distinct.begin(), distinct.end());
  const GramMatrix gm = gram_matrix(samples, p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gm.K);
  CHECK(es.eigenvalues().minCoeff() > -1e-12 * es.eigenvalues().maxCoeff());
}

TEST_CASE("compiled predictor reproduces the weighted kernel sum") {
  RngStream rng(25);
  // 20 sites runs the vectorized packed path, 32 the packed scalar path,
  // 40 the wide fallback
  for (int n : {20, 32, 40}) {
    const KernelParams p = ring_params(n);
    std::vector<SpinConfig> support;
    std::vector<double> w;
    for (int i = 0; i < 37; ++i) {
      support.push_back(random_config(n, rng));
      w.push_back(rng.normal());
    }
    const double shift = 0.37;
    const CompiledPredictor pred(support, w, p, shift);
    CHECK(pred.log_shift() == shift);
    for (int rep = 0; rep < 25; ++rep) {
      const SpinConfig q = random_config(n, rng);
      double want = shift;
      for (size_t i = 0; i < support.size(); ++i)
        want += w[i] * kernel_reference(support[i], q, p);
      CHECK(pred(q) == doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("packed evaluation agrees with the config interface") {
  RngStream rng(26);
  const int n = 18;
  const KernelParams p = ring_params(n);
  std::vector<SpinConfig> support;
  std::vector<double> w;
  for (int i = 0; i < 10; ++i) {
    support.push_back(random_config(n, rng));
    w.push_back(rng.normal());
  }
  const CompiledPredictor pred(support, w, p, -1.25);
  for (int rep = 0; rep < 50; ++rep) {
    const SpinConfig q = random_config(n, rng);
    CHECK(pred(q) == pred.predict_packed(static_cast<uint32_t>(q.w[0])));
  }
}

TEST_CASE("empty predictor is the uniform log amplitude") {
  const KernelParams p = ring_params(8);
  const CompiledPredictor pred({}, {}, p, 0.0);
  CHECK(pred.empty());
  RngStream rng(27);
  CHECK(pred(random_config(8, rng)) == 0.0);
}

TEST_CASE("finite-width tangent kernel is deterministic in the seed") {
  RngStream rng(28);
  const KernelParams p = ring_params(8);
  const SpinConfig x = random_config(8, rng);
  const SpinConfig y = random_config(8, rng);
  const double a = empirical_ntk(x, y, p, 64, 99);
  CHECK(a == empirical_ntk(x, y, p, 64, 99));
  CHECK(a != empirical_ntk(x, y, p, 64, 100));
}

TEST_CASE("finite-width tangent kernel converges to the closed form") {
  RngStream rng(29);
  const KernelParams p = ring_params(8);
  double err2 = 0, norm2 = 0;
  for (int rep = 0; rep < 6; ++rep) {
    const SpinConfig x = random_config(8, rng);
    const SpinConfig y = random_config(8, rng);
    const double wide = empirical_ntk(x, y, p, 65536, 7 + rep);
    const double exact = kernel_eval(x, y, p);
    err2 += (wide - exact) * (wide - exact);
    norm2 += exact * exact;
  }
  CHECK(std::sqrt(err2 / norm2) < 0.05);
}
