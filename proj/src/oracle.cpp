#include "slpm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "slpm/errors.hpp"
#include "slpm/rng.hpp"

namespace slpm {

Basis::Basis(int n_sites, Sector sector) : n_(n_sites), sector_(sector) {
  if (n_sites < 1 || n_sites > 32)
    throw ConfigError("basis: dense enumeration supports 1..32 sites");
  if (sector == Sector::Full) {
    dim_ = size_t{1} << n_sites;
  } else {
    if (n_sites % 2 != 0)
      throw ConfigError("basis: zero-magnetization sector needs even site count");
    // Gosper's hack over all words with n/2 set bits (ascending order)
    const uint32_t limit = n_sites == 32 ? 0xffffffffu
                                         : (uint32_t{1} << n_sites) - 1;
    uint32_t v = (uint32_t{1} << (n_sites / 2)) - 1;
    while (true) {
      states_.push_back(v);
      const uint32_t c = v & (0u - v);
      const uint32_t r = v + c;
      if (r > limit || r < v) break;  // next pattern leaves the word
      v = r | (((v ^ r) >> 2) / c);
    }
    dim_ = states_.size();
  }
}

SpinConfig Basis::config_at(size_t idx) const {
  SpinConfig c = SpinConfig::zeros(n_);
  c.w[0] = sector_ == Sector::Full ? idx : states_[idx];
  return c;
}

size_t Basis::index_of(const SpinConfig& x) const {
  if (sector_ == Sector::Full) return static_cast<size_t>(x.w[0]);
  const uint32_t key = static_cast<uint32_t>(x.w[0]);
  const auto it = std::lower_bound(states_.begin(), states_.end(), key);
  if (it == states_.end() || *it != key)
    throw std::invalid_argument("basis: configuration outside sector: " +
                                x.to_string());
  return static_cast<size_t>(it - states_.begin());
}

Sector natural_sector(const HamiltonianSpec& spec) {
  return spec.model == Model::AFH ? Sector::ZeroMagnetization : Sector::Full;
}

namespace {

// CSR form of (lambda - H); off-diagonal amplitude is uniform per model
struct SparseShifted {
  double offamp = 0.0;
  std::vector<double> diag;
  std::vector<uint32_t> cols;
  std::vector<uint64_t> offsets;
};

SparseShifted build_sparse(const HamiltonianSpec& spec, double lambda,
                           const Basis& basis) {
  SparseShifted op;
  const size_t dim = basis.dim();
  op.diag.resize(dim);
  op.offsets.resize(dim + 1);
  op.offamp = spec.model == Model::TFI ? spec.h : (spec.marshall ? 2.0 : -2.0);
  op.cols.reserve(dim * (spec.model == Model::TFI ? spec.lattice.n_sites : 4));
  for (size_t i = 0; i < dim; ++i) {
    const SpinConfig x = basis.config_at(i);
    op.diag[i] = lambda - diag_element(spec, x);
    op.offsets[i] = op.cols.size();
    for_each_offdiag(spec, x, [&](const SpinConfig& y, double) {
      op.cols.push_back(static_cast<uint32_t>(basis.index_of(y)));
    });
  }
  op.offsets[dim] = op.cols.size();
  return op;
}

void sparse_apply(const SparseShifted& op, const Eigen::VectorXd& v,
                  Eigen::VectorXd& w) {
  const size_t dim = op.diag.size();
  for (size_t i = 0; i < dim; ++i) {
    double acc = 0.0;
    for (uint64_t k = op.offsets[i]; k < op.offsets[i + 1]; ++k)
      acc += v[op.cols[k]];
    w[i] = op.diag[i] * v[i] + op.offamp * acc;
  }
}

Eigen::VectorXd default_init(size_t dim, uint64_t seed) {
  RngStream rng(seed, {0x70777230ULL});
  Eigen::VectorXd v(dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (size_t i = 0; i < dim; ++i) v[i] = s * (1.0 + 0.5 * rng.normal());
  return v;
}

struct PmOptions {
  double tol = 1e-11;
  int max_iters = 60000;
  const Eigen::VectorXd* v0 = nullptr;
  // Wielandt deflation A - strength * d d^T: moves the deflated eigenvalue
  // to ~0 instead of leaving a ghost that regrows from projection error.
  const Eigen::VectorXd* deflate = nullptr;
  double deflate_strength = 0.0;
};

PowerResult power_iterate(const SparseShifted& op, double lambda,
                          const PmOptions& opt) {
  const size_t dim = op.diag.size();
  Eigen::VectorXd v = opt.v0 ? *opt.v0 : default_init(dim, 0x243f6a8885a308d3ULL);
  if (opt.deflate) v -= (opt.deflate->dot(v)) * (*opt.deflate);
  Eigen::VectorXd w(dim);

  PowerResult res;
  double prev = HUGE_VAL;
  for (res.iters = 1; res.iters <= opt.max_iters; ++res.iters) {
    sparse_apply(op, v, w);
    if (opt.deflate)
      w -= (opt.deflate_strength * opt.deflate->dot(v)) * (*opt.deflate);
    const double vv = v.squaredNorm();
    if (!(vv > 0.0)) throw NumericalError("power method: iterate vanished");
    const double rho = v.dot(w) / vv;
    if (std::abs(rho - prev) <= opt.tol * std::max(1.0, std::abs(rho))) {
      res.converged = true;
      res.energy = lambda - rho;
      v = w;
      break;
    }
    prev = rho;
    const double m = w.cwiseAbs().maxCoeff();
    if (!(m > 0.0))
      throw NumericalError("power method: operator annihilated the iterate");
    v = w / m;
  }
  if (!res.converged) res.energy = lambda - prev;
  res.vec = v / v.norm();
  return res;
}

}  // namespace

Eigen::VectorXd dense_apply(const HamiltonianSpec& spec, double lambda,
                            const Basis& basis, const Eigen::VectorXd& v) {
  if (static_cast<size_t>(v.size()) != basis.dim())
    throw std::invalid_argument("dense_apply: dimension mismatch");
  Eigen::VectorXd w(basis.dim());
  for (size_t i = 0; i < basis.dim(); ++i) {
    const SpinConfig x = basis.config_at(i);
    double acc = (lambda - diag_element(spec, x)) * v[i];
    for_each_offdiag(spec, x, [&](const SpinConfig& y, double amp) {
      acc -= amp * v[basis.index_of(y)];
    });
    w[i] = acc;
  }
  return w;
}

double dense_energy(const HamiltonianSpec& spec, const Basis& basis,
                    const Eigen::VectorXd& v) {
  const Eigen::VectorXd w = dense_apply(spec, 0.0, basis, v);
  return -v.dot(w) / v.squaredNorm();
}

PowerResult dense_power_method(const HamiltonianSpec& spec, double lambda,
                               const Basis& basis, double tol, int max_iters,
                               const Eigen::VectorXd* v0) {
  spec.validate();
  const SparseShifted op = build_sparse(spec, lambda, basis);
  PmOptions opt;
  opt.tol = tol;
  opt.max_iters = max_iters;
  opt.v0 = v0;
  return power_iterate(op, lambda, opt);
}

namespace {

struct ExtremalFull {
  SpectrumInfo info;
  Eigen::VectorXd ground;
};

ExtremalFull extremal_eigs_full(const HamiltonianSpec& spec, const Basis& basis,
                                double tol) {
  spec.validate();
  const double R = gershgorin_bound(spec);
  ExtremalFull out;
  int iters = 0;

  // coarse passes at safe shifts bracket the spectrum
  const SparseShifted opLo = build_sparse(spec, R + 1.0, basis);
  PmOptions coarse;
  coarse.tol = 1e-6;
  coarse.max_iters = 20000;
  const PowerResult c0 = power_iterate(opLo, R + 1.0, coarse);
  iters += c0.iters;

  const SparseShifted opHi = build_sparse(spec, -(R + 1.0), basis);
  const PowerResult cM = power_iterate(opHi, -(R + 1.0), coarse);
  iters += cM.iters;

  // refined shift maximizes the sigma_1/sigma_0 contrast while keeping the
  // ground state dominant: just above the spectrum midpoint
  const double range = cM.energy - c0.energy;
  const double lam0 = 0.5 * (c0.energy + cM.energy) + 0.05 * std::max(range, 1.0);
  const SparseShifted op0 = build_sparse(spec, lam0, basis);

  PmOptions fine;
  fine.tol = tol;
  fine.max_iters = 60000;
  fine.v0 = &c0.vec;
  const PowerResult r0 = power_iterate(op0, lam0, fine);
  iters += r0.iters;

  // E1 needs a shift above (E1+Emax)/2 so the deflated top does not win;
  // bootstrap with a coarse pass at the outer shift, where dominance is
  // unconditional, then refine near the optimal contrast.
  PmOptions defl;
  defl.tol = 1e-6;
  defl.max_iters = 40000;
  defl.deflate = &r0.vec;
  defl.deflate_strength = R + 1.0 - r0.energy;
  const PowerResult c1 = power_iterate(opLo, R + 1.0, defl);
  iters += c1.iters;

  const double lam1 =
      0.5 * (c1.energy + cM.energy) + 0.05 * std::max(range, 1.0);
  const SparseShifted op1 = build_sparse(spec, lam1, basis);
  defl.tol = tol;
  defl.max_iters = 60000;
  defl.v0 = &c1.vec;
  defl.deflate_strength = lam1 - r0.energy;
  const PowerResult r1 = power_iterate(op1, lam1, defl);
  iters += r1.iters;

  PmOptions fineM;
  fineM.tol = tol;
  fineM.max_iters = 60000;
  fineM.v0 = &cM.vec;
  const PowerResult rM = power_iterate(opHi, -(R + 1.0), fineM);
  iters += rM.iters;

  out.info.e0 = r0.energy;
  out.info.e1 = r1.energy;
  out.info.e_max = rM.energy;
  out.info.gap = r1.energy - r0.energy;
  out.info.degenerate = out.info.gap < 1e-10;
  out.info.converged = c0.converged && cM.converged && r0.converged &&
                       c1.converged && r1.converged && rM.converged;
  out.info.iters_total = iters;
  out.ground = r0.vec;
  return out;
}

}  // namespace

SpectrumInfo extremal_eigs(const HamiltonianSpec& spec, const Basis& basis,
                           double tol) {
  return extremal_eigs_full(spec, basis, tol).info;
}

double fidelity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.squaredNorm(), nb = b.squaredNorm();
  if (!(na > 0.0) || !(nb > 0.0))
    throw std::invalid_argument("fidelity: zero vector");
  const double d = a.dot(b);
  return d * d / (na * nb);
}

double fubini_study(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double f = std::min(1.0, fidelity(a, b));
  return std::acos(std::sqrt(f));
}

Eigen::VectorXd materialize(const KrrModel& m, const Basis& basis) {
  const CompiledPredictor pred = compile(m);
  Eigen::VectorXd v(basis.dim());
  if (basis.n_sites() <= 32 && !pred.empty()) {
    for (size_t i = 0; i < basis.dim(); ++i)
      v[i] = pred.predict_packed(static_cast<uint32_t>(basis.config_at(i).w[0]));
  } else {
    for (size_t i = 0; i < basis.dim(); ++i) v[i] = pred(basis.config_at(i));
  }
  const double mx = v.maxCoeff();
  for (size_t i = 0; i < basis.dim(); ++i) v[i] = std::exp(v[i] - mx);
  return v;
}

double step_infidelity(const KrrModel& before, const KrrModel& after,
                       const HamiltonianSpec& spec, double lambda,
                       const Basis& basis) {
  const Eigen::VectorXd target =
      dense_apply(spec, lambda, basis, materialize(before, basis));
  return 1.0 - fidelity(materialize(after, basis), target);
}

ExactContext make_exact_context(const HamiltonianSpec& spec, int dense_cap,
                                double tol) {
  if (spec.lattice.n_sites > dense_cap)
    throw ConfigError("exact tracking refused: " +
                      std::to_string(spec.lattice.n_sites) + " sites above cap " +
                      std::to_string(dense_cap));
  Basis basis(spec.lattice.n_sites, natural_sector(spec));
  ExtremalFull ext = extremal_eigs_full(spec, basis, tol);
  return ExactContext{std::move(basis), ext.info, std::move(ext.ground)};
}

void save_dense_state(const Eigen::VectorXd& v, const Basis& basis,
                      const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("save_dense_state: cannot open " + path);
  const char magic[8] = {'S', 'L', 'P', 'M', 'V', 'E', 'C', '1'};
  os.write(magic, 8);
  const uint32_t n = basis.n_sites();
  const uint32_t sec = basis.sector() == Sector::Full ? 0 : 1;
  const uint64_t dim = basis.dim();
  os.write(reinterpret_cast<const char*>(&n), 4);
  os.write(reinterpret_cast<const char*>(&sec), 4);
  os.write(reinterpret_cast<const char*>(&dim), 8);
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * v.size()));
  if (!os) throw ConfigError("save_dense_state: write failed for " + path);
}

}  // namespace slpm
