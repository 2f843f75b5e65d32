#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <vector>

#include "slpm/errors.hpp"
#include "slpm/krr.hpp"
#include "slpm/rng.hpp"

using namespace slpm;

namespace {

SpinConfig random_config(int n, RngStream& rng) {
  SpinConfig c = SpinConfig::zeros(n);
  for (int i = 0; i < n; ++i)
    if (rng.next_u64() & 1) c.flip(i);
  return c;
}

KernelParams ring_params(int n) {
  KernelParams p;
  p.group = translation_group(build_lattice({n}));
  return p;
}

// Distinct orbit representatives, so Gram matrices stay well conditioned.
std::vector<SpinConfig> distinct_orbits(int n, int count, RngStream& rng,
                                        const KernelParams& p) {
  std::set<SpinConfig> keys;
  std::vector<SpinConfig> out;
  while (static_cast<int>(out.size()) < count) {
    const SpinConfig x = random_config(n, rng);
    const SpinConfig key = canonical_orbit_key(x, p.group, p.z2_even);
    if (keys.insert(key).second) out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_CASE("dedup merges symmetry orbits and counts multiplicity") {
  const KernelParams p = ring_params(4);
  const SpinConfig x = SpinConfig::from_spins({+1, +1, -1, -1});
  const SpinConfig y = SpinConfig::from_spins({+1, -1, +1, -1});
  const std::vector<SpinConfig> samples = {
      x, apply_perm(p.group.elems[1], x), x.global_flip(), y, x};
  const DedupResult dd = dedup(samples, {}, p.group, true);
  REQUIRE(dd.data.samples.size() == 2);
  CHECK(dd.data.counts[0] == 4.0);
  CHECK(dd.data.counts[1] == 1.0);
  CHECK(dd.data.samples[0] == canonical_orbit_key(x, p.group, true));
  CHECK(dd.data.samples[1] == canonical_orbit_key(y, p.group, true));
  CHECK(dd.group_of == std::vector<int>{0, 0, 0, 1, 0});
  CHECK(dd.data.labels.empty());

  // for x the global flip coincides with a translation by two, so z2_even
  // changes nothing; a magnetized configuration separates the two settings
  CHECK(dedup(samples, {}, p.group, false).data.samples.size() == 2);
  const SpinConfig z = SpinConfig::from_spins({+1, -1, -1, -1});
  CHECK(dedup({z, z.global_flip()}, {}, p.group, false).data.samples.size() == 2);
  CHECK(dedup({z, z.global_flip()}, {}, p.group, true).data.samples.size() == 1);
}

TEST_CASE("dedup keeps consistent labels and rejects contradictions") {
  const KernelParams p = ring_params(4);
  const SpinConfig x = SpinConfig::from_spins({+1, +1, -1, -1});
  const SpinConfig gx = apply_perm(p.group.elems[2], x);
  const DedupResult dd = dedup({x, gx}, {0.5, 0.5 + 1e-12}, p.group, true);
  REQUIRE(dd.data.labels.size() == 1);
  CHECK(dd.data.labels[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS_AS(dedup({x, gx}, {0.5, 0.6}, p.group, true), NumericalError);
}

TEST_CASE("dedup counts always partition the sample") {
  RngStream rng(31);
  const KernelParams p = ring_params(10);
  std::vector<SpinConfig> samples;
  for (int i = 0; i < 200; ++i) samples.push_back(random_config(10, rng));
  const DedupResult dd = dedup(samples, {}, p.group, true);
  double total = 0;
  for (double c : dd.data.counts) total += c;
  CHECK(total == 200.0);
  REQUIRE(dd.group_of.size() == 200);
  for (size_t i = 0; i < samples.size(); ++i) {
    const int row = dd.group_of[i];
    CHECK(canonical_orbit_key(samples[i], p.group, true) ==
          dd.data.samples[row]);
  }
}

TEST_CASE("label normalization shifts the maximum to zero") {
  Dataset ds;
  ds.labels = {-1.5, 2.25, 0.0};
  const double shift = normalize_labels(ds);
  CHECK(shift == 2.25);
  CHECK(ds.labels[1] == 0.0);
  CHECK(ds.labels[0] == -3.75);
}

TEST_CASE("ridge solve matches a dense reference factorization") {
  RngStream rng(32);
  const KernelParams p = ring_params(12);
  Dataset ds;
  ds.samples = distinct_orbits(12, 40, rng, p);
  for (int i = 0; i < 40; ++i) {
    ds.labels.push_back(rng.normal());
    ds.counts.push_back(1.0);
  }
  const double lambda = 1e-6;
  const KrrModel m = fit(ds, p, lambda, false);
  CHECK(m.lambda == lambda);  // no retry on a clean system

  const GramMatrix gm = gram_matrix(ds.samples, p);
  Eigen::MatrixXd A = gm.K;
  A.diagonal().array() += lambda;
  Eigen::Map<const Eigen::VectorXd> y(ds.labels.data(), 40);
  const Eigen::VectorXd w_ref = A.ldlt().solve(y);
  CHECK((m.weights - w_ref).norm() < 1e-8 * (1.0 + w_ref.norm()));
}

TEST_CASE("fitted model interpolates the labels at the support") {
  RngStream rng(33);
  const KernelParams p = ring_params(10);
  Dataset ds;
  ds.samples = distinct_orbits(10, 25, rng, p);
  for (int i = 0; i < 25; ++i) {
    ds.labels.push_back(std::cos(0.7 * i));
    ds.counts.push_back(1.0);
  }
  const KrrModel m = fit(ds, p, 1e-8, false);
  const CompiledPredictor pred = compile(m);
  for (int i = 0; i < 25; ++i)
    CHECK(std::abs(pred(ds.samples[i]) - ds.labels[i]) < 1e-4);
}

TEST_CASE("count regularization equals ridge regression on repeated rows") {
  RngStream rng(34);
  const KernelParams p = ring_params(10);
  const std::vector<SpinConfig> base = distinct_orbits(10, 12, rng, p);
  std::vector<SpinConfig> raw;
  std::vector<double> raw_labels;
  Dataset dd;
  for (int i = 0; i < 12; ++i) {
    const int copies = 1 + static_cast<int>(rng.uniform_int(4));
    const double label = rng.normal();
    for (int c = 0; c < copies; ++c) {
      raw.push_back(base[i]);
      raw_labels.push_back(label);
    }
    dd.samples.push_back(base[i]);
    dd.labels.push_back(label);
    dd.counts.push_back(copies);
  }
  const double lambda = 1e-6;

  // reference: ridge on the full repeated sample, solved densely
  const GramMatrix gm = gram_matrix(raw, p);
  Eigen::MatrixXd A = gm.K;
  A.diagonal().array() += lambda;
  Eigen::Map<const Eigen::VectorXd> y(raw_labels.data(),
                                      static_cast<int>(raw_labels.size()));
  const Eigen::VectorXd w_raw = A.ldlt().solve(y);

  const KrrModel m = fit(dd, p, lambda, true);

  for (int rep = 0; rep < 20; ++rep) {
    const SpinConfig q = random_config(10, rng);
    double f_raw = 0;
    for (size_t i = 0; i < raw.size(); ++i)
      f_raw += w_raw[static_cast<int>(i)] * kernel_eval(raw[i], q, p);
    CHECK(predict_log(m, q) == doctest::Approx(f_raw).epsilon(1e-8));
  }
}

TEST_CASE("predictions after normalization reproduce the raw targets") {
  RngStream rng(35);
  const KernelParams p = ring_params(10);
  Dataset ds;
  ds.samples = distinct_orbits(10, 20, rng, p);
  for (int i = 0; i < 20; ++i) {
    ds.labels.push_back(2.0 + 0.3 * rng.normal());
    ds.counts.push_back(1.0);
  }
  const std::vector<double> raw = ds.labels;
  const double shift = normalize_labels(ds);
  KrrModel m = fit(ds, p, 1e-8, false);
  m.log_shift = shift;
  const CompiledPredictor pred = compile(m);
  for (int i = 0; i < 20; ++i)
    CHECK(std::abs(pred(ds.samples[i]) - raw[i]) < 1e-4);
}

TEST_CASE("models round-trip through the binary format bit for bit") {
  RngStream rng(36);
  const KernelParams p = ring_params(9);
  Dataset ds;
  ds.samples = distinct_orbits(9, 15, rng, p);
  for (int i = 0; i < 15; ++i) {
    ds.labels.push_back(rng.normal());
    ds.counts.push_back(1.0 + (i % 3));
  }
  KrrModel m = fit(ds, p, 1e-7, true);
  m.log_shift = 0.123456789012345678;

  const std::string path = "krr_roundtrip.bin";
  save_model(m, path);
  const KrrModel back = load_model(path);
  std::remove(path.c_str());

  REQUIRE(back.support.size() == m.support.size());
  for (size_t i = 0; i < m.support.size(); ++i)
    CHECK(back.support[i] == m.support[i]);
  REQUIRE(back.weights.size() == m.weights.size());
  for (int i = 0; i < m.weights.size(); ++i)
    CHECK(std::memcmp(&back.weights[i], &m.weights[i], sizeof(double)) == 0);
  CHECK(back.lambda == m.lambda);
  CHECK(back.log_shift == m.log_shift);
  CHECK(back.kernel.gamma == m.kernel.gamma);
  CHECK(back.kernel.z2_even == m.kernel.z2_even);
  REQUIRE(back.kernel.group.elems == m.kernel.group.elems);

  const SpinConfig q = random_config(9, rng);
  CHECK(predict_log(back, q) == predict_log(m, q));
}

TEST_CASE("degenerate systems exhaust the ridge retry and throw") {
  const KernelParams p = ring_params(6);
  const SpinConfig x = SpinConfig::from_spins({+1, -1, +1, +1, -1, -1});
  Dataset ds;
  ds.samples = {x, x};  // identical rows with contradictory labels
  ds.labels = {0.0, 1.0};
  ds.counts = {1.0, 1.0};
  CHECK_THROWS_AS(fit(ds, p, 1e-30, false), NumericalError);
}
