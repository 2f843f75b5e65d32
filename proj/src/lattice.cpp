#include "slpm/lattice.hpp"

#include <bit>
#include <stdexcept>

namespace slpm {

namespace {

uint64_t mask_low(int nbits) {
  return nbits >= 64 ? ~0ULL : (1ULL << nbits) - 1;
}

void check_sites(int n) {
  if (n < 1 || n > 128) throw std::invalid_argument("site count must be in [1,128]");
}

}  // namespace

SpinConfig SpinConfig::zeros(int n_sites) {
  check_sites(n_sites);
  SpinConfig c;
  c.n = n_sites;
  return c;
}

SpinConfig SpinConfig::from_spins(const std::vector<int>& spins) {
  SpinConfig c = zeros(static_cast<int>(spins.size()));
  for (int i = 0; i < c.n; ++i)
    if (spins[i] > 0) c.set_spin(i, +1);
  return c;
}

SpinConfig SpinConfig::global_flip() const {
  SpinConfig r = *this;
  r.w[0] ^= mask_low(n >= 64 ? 64 : n);
  if (n > 64) r.w[1] ^= mask_low(n - 64);
  return r;
}

int SpinConfig::popcount() const {
  return std::popcount(w[0]) + std::popcount(w[1]);
}

int SpinConfig::overlap_numer(const SpinConfig& a, const SpinConfig& b) {
  const int d = std::popcount(a.w[0] ^ b.w[0]) + std::popcount(a.w[1] ^ b.w[1]);
  return a.n - 2 * d;
}

std::vector<int> SpinConfig::to_spins() const {
  std::vector<int> s(n);
  for (int i = 0; i < n; ++i) s[i] = spin(i);
  return s;
}

std::string SpinConfig::to_string() const {
  std::string s(n, '-');
  for (int i = 0; i < n; ++i)
    if (spin(i) > 0) s[i] = '+';
  return s;
}

size_t SpinConfigHash::operator()(const SpinConfig& c) const {
  uint64_t h = c.w[0] + 0x9e3779b97f4a7c15ULL * (c.w[1] + 1);
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<size_t>(h ^ (h >> 31));
}

Lattice build_lattice(const std::vector<int>& dims) {
  if (dims.empty() || dims.size() > 2)
    throw std::invalid_argument("lattice dims must have rank 1 or 2");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("lattice extents must be positive");

  Lattice lat;
  lat.dims = dims;
  lat.n_sites = 1;
  for (int d : dims) lat.n_sites *= d;
  check_sites(lat.n_sites);

  if (dims.size() == 1) {
    const int L = dims[0];
    for (int i = 0; i < L; ++i) {
      const int j = (i + 1) % L;
      if (j != i) lat.bonds.emplace_back(i, j);
    }
  } else {
    const int Lx = dims[0], Ly = dims[1];
    auto site = [Ly](int r, int c) { return r * Ly + c; };
    for (int r = 0; r < Lx; ++r)
      for (int c = 0; c < Ly; ++c) {
        if (Ly > 1) lat.bonds.emplace_back(site(r, c), site(r, (c + 1) % Ly));
        if (Lx > 1) lat.bonds.emplace_back(site(r, c), site((r + 1) % Lx, c));
      }
  }
  return lat;
}

SymmetryGroup trivial_group(int n_sites) {
  check_sites(n_sites);
  SymmetryGroup g;
  g.n_sites = n_sites;
  g.elems.emplace_back(n_sites);
  for (int i = 0; i < n_sites; ++i) g.elems[0][i] = i;
  return g;
}

SymmetryGroup translation_group(const Lattice& lat) {
  SymmetryGroup g;
  g.n_sites = lat.n_sites;
  if (lat.dims.size() == 1) {
    const int L = lat.dims[0];
    for (int s = 0; s < L; ++s) {
      std::vector<int> perm(L);
      for (int i = 0; i < L; ++i) perm[i] = (i - s + L) % L;  // result[i] = x[i-s]
      g.elems.push_back(std::move(perm));
    }
  } else {
    const int Lx = lat.dims[0], Ly = lat.dims[1];
    for (int a = 0; a < Lx; ++a)
      for (int b = 0; b < Ly; ++b) {
        std::vector<int> perm(lat.n_sites);
        for (int r = 0; r < Lx; ++r)
          for (int c = 0; c < Ly; ++c)
            perm[r * Ly + c] = ((r - a + Lx) % Lx) * Ly + (c - b + Ly) % Ly;
        g.elems.push_back(std::move(perm));
      }
  }
  return g;
}

SpinConfig apply_perm(const std::vector<int>& g, const SpinConfig& x) {
  SpinConfig r = SpinConfig::zeros(x.n);
  for (int i = 0; i < x.n; ++i)
    if (x.spin(g[i]) > 0) r.set_spin(i, +1);
  return r;
}

SpinConfig canonical_orbit_key(const SpinConfig& x, const SymmetryGroup& G,
                               bool z2_even) {
  if (G.n_sites != x.n) throw std::invalid_argument("group/config size mismatch");
  SpinConfig best = x;
  bool first = true;
  for (const auto& g : G.elems) {
    SpinConfig y = apply_perm(g, x);
    if (first || y < best) best = y, first = false;
    if (z2_even) {
      SpinConfig yf = y.global_flip();
      if (yf < best) best = yf;
    }
  }
  return best;
}

}  // namespace slpm
