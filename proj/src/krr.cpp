#include "slpm/krr.hpp"

#include <lapacke.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "slpm/errors.hpp"

namespace slpm {

DedupResult dedup(const std::vector<SpinConfig>& samples,
                  const std::vector<double>& labels, const SymmetryGroup& G,
                  bool z2_even, double tol) {
  const bool labeled = !labels.empty();
  if (labeled && labels.size() != samples.size())
    throw std::invalid_argument("dedup: label/sample size mismatch");

  DedupResult res;
  res.group_of.resize(samples.size());
  std::unordered_map<SpinConfig, int, SpinConfigHash> seen;
  for (size_t i = 0; i < samples.size(); ++i) {
    const SpinConfig key = canonical_orbit_key(samples[i], G, z2_even);
    auto [it, inserted] = seen.emplace(key, static_cast<int>(res.data.samples.size()));
    if (inserted) {
      res.data.samples.push_back(key);
      res.data.counts.push_back(1.0);
      if (labeled) res.data.labels.push_back(labels[i]);
    } else {
      res.data.counts[it->second] += 1.0;
      if (labeled) {
        const double d = std::abs(res.data.labels[it->second] - labels[i]);
        if (d > tol)
          throw NumericalError(
              "dedup: labels disagree within orbit of " + key.to_string() +
              " by " + std::to_string(d) + " (symmetry-inconsistent labels)");
      }
    }
    res.group_of[i] = it->second;
  }
  return res;
}

double normalize_labels(Dataset& ds) {
  if (ds.labels.empty()) throw std::invalid_argument("normalize_labels: no labels");
  double shift = ds.labels[0];
  for (double l : ds.labels) shift = std::max(shift, l);
  for (double& l : ds.labels) l -= shift;
  return shift;
}

namespace {

// returns false on factorization failure or residual breach
bool try_solve(const Eigen::MatrixXd& K, const std::vector<double>& reg,
               const std::vector<double>& y, Eigen::VectorXd& w) {
  const lapack_int n = static_cast<lapack_int>(K.rows());
  Eigen::MatrixXd A = K;
  for (lapack_int i = 0; i < n; ++i) A(i, i) += reg[i];

  Eigen::MatrixXd F = A;
  if (LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, F.data(), n) != 0) return false;

  w = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  if (LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, F.data(), n, w.data(), n) != 0)
    return false;

  double ymax = 0.0;
  for (double v : y) ymax = std::max(ymax, std::abs(v));
  const double resid = (A * w - Eigen::Map<const Eigen::VectorXd>(y.data(), n))
                           .cwiseAbs()
                           .maxCoeff();
  return resid <= 1e-6 * (1.0 + ymax);
}

}  // namespace

KrrModel fit(const Dataset& ds, const KernelParams& p, double lambda,
             bool count_reg) {
  if (ds.samples.empty()) throw std::invalid_argument("fit: empty dataset");
  if (ds.labels.size() != ds.samples.size())
    throw std::invalid_argument("fit: label/sample size mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("fit: lambda must be positive");
  if (count_reg && ds.counts.size() != ds.samples.size())
    throw std::invalid_argument("fit: counts required for count_reg");

  const GramMatrix gm = gram_matrix(ds.samples, p);
  const size_t m = ds.samples.size();

  KrrModel model;
  model.support = ds.samples;
  model.kernel = p;
  model.log_shift = 0.0;

  std::vector<double> reg(m);
  for (double lam : {lambda, lambda * 10.0}) {
    for (size_t i = 0; i < m; ++i)
      reg[i] = count_reg ? lam / ds.counts[i] : lam;
    if (try_solve(gm.K, reg, ds.labels, model.weights)) {
      model.lambda = lam;
      return model;
    }
  }
  throw NumericalError(
      "fit: Cholesky solve failed (or residual above 1e-6*(1+||y||)) at lambda and "
      "lambda*10; Gram matrix too ill-conditioned");
}

double predict_log(const KrrModel& m, const SpinConfig& x) {
  return compile(m)(x);
}

namespace {

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(os, u);
}

uint32_t get_u32(std::istream& is) {
  uint32_t v;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t get_u64(std::istream& is) {
  uint64_t v;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double get_f64(std::istream& is) {
  const uint64_t u = get_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

constexpr char kMagic[8] = {'S', 'L', 'P', 'M', 'K', 'R', 'R', '1'};

}  // namespace

void save_model(const KrrModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("save_model: cannot open " + path);
  os.write(kMagic, 8);
  put_u32(os, static_cast<uint32_t>(m.kernel.group.n_sites));
  put_u32(os, static_cast<uint32_t>(m.kernel.group.size()));
  put_u32(os, m.kernel.z2_even ? 1 : 0);
  put_f64(os, m.kernel.gamma);
  for (const auto& g : m.kernel.group.elems)
    for (int s : g) put_u32(os, static_cast<uint32_t>(s));
  put_u64(os, m.support.size());
  for (const auto& c : m.support) {
    put_u64(os, c.w[0]);
    put_u64(os, c.w[1]);
  }
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) put_f64(os, m.weights[i]);
  put_f64(os, m.lambda);
  put_f64(os, m.log_shift);
  if (!os) throw ConfigError("save_model: write failed for " + path);
}

KrrModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("load_model: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("load_model: bad magic in " + path);

  KrrModel m;
  const int n_sites = static_cast<int>(get_u32(is));
  const int gsize = static_cast<int>(get_u32(is));
  m.kernel.z2_even = get_u32(is) != 0;
  m.kernel.gamma = get_f64(is);
  if (!is || n_sites < 1 || n_sites > 128 || gsize < 1)
    throw ConfigError("load_model: corrupt header in " + path);
  m.kernel.group.n_sites = n_sites;
  m.kernel.group.elems.assign(gsize, std::vector<int>(n_sites));
  for (auto& g : m.kernel.group.elems)
    for (int& s : g) s = static_cast<int>(get_u32(is));
  const uint64_t ns = get_u64(is);
  if (!is || ns > (1ULL << 32)) throw ConfigError("load_model: corrupt support");
  m.support.assign(ns, SpinConfig::zeros(n_sites));
  for (auto& c : m.support) {
    c.w[0] = get_u64(is);
    c.w[1] = get_u64(is);
  }
  m.weights.resize(static_cast<Eigen::Index>(ns));
  for (uint64_t i = 0; i < ns; ++i) m.weights[static_cast<Eigen::Index>(i)] = get_f64(is);
  m.lambda = get_f64(is);
  m.log_shift = get_f64(is);
  if (!is) throw ConfigError("load_model: truncated file " + path);
  return m;
}

}  // namespace slpm
