#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace slpm {

// Spin-1/2 configuration, bit-packed: bit i == 1 <=> s_i == +1.
// Two 64-bit words cover lattices up to 128 sites.
struct SpinConfig {
  std::array<uint64_t, 2> w{0, 0};
  int n = 0;

  static SpinConfig zeros(int n_sites);  // all spins -1
  static SpinConfig from_spins(const std::vector<int>& spins);

  int spin(int i) const { return (w[i >> 6] >> (i & 63)) & 1 ? +1 : -1; }
  void set_spin(int i, int value) {
    const uint64_t bit = 1ULL << (i & 63);
    if (value > 0)
      w[i >> 6] |= bit;
    else
      w[i >> 6] &= ~bit;
  }
  void flip(int i) { w[i >> 6] ^= 1ULL << (i & 63); }

  SpinConfig flipped(int i) const {
    SpinConfig r = *this;
    r.flip(i);
    return r;
  }
  SpinConfig global_flip() const;

  int popcount() const;                    // number of +1 spins
  int magnetization() const { return 2 * popcount() - n; }

  // <x|y> / L, numerator = n - 2*hamming(x,y)
  static int overlap_numer(const SpinConfig& a, const SpinConfig& b);

  std::vector<int> to_spins() const;
  std::string to_string() const;  // "+-+-..." (site 0 first)

  bool operator==(const SpinConfig& o) const { return w == o.w && n == o.n; }
  // lexicographic order of the packed form (word 1 high)
  bool operator<(const SpinConfig& o) const {
    return w[1] != o.w[1] ? w[1] < o.w[1] : w[0] < o.w[0];
  }
};

struct SpinConfigHash {
  size_t operator()(const SpinConfig& c) const;
};

struct Lattice {
  std::vector<int> dims;                     // [L] or [Lx, Ly], row-major site index r*Ly + c
  int n_sites = 0;
  std::vector<std::pair<int, int>> bonds;    // nearest-neighbour, periodic
};

// Periodic hypercubic lattice in 1 or 2 dimensions. Extent-2 directions keep
// both wrap-around bonds (the pair appears twice); self-bonds (extent 1) are
// dropped.
Lattice build_lattice(const std::vector<int>& dims);

// Site permutation group. Element g is stored as the source-site table:
// apply_perm(g, x)[i] = x[g[i]], i.e. g[i] = g^{-1}(i). Identity is elems[0].
struct SymmetryGroup {
  int n_sites = 0;
  std::vector<std::vector<int>> elems;

  int size() const { return static_cast<int>(elems.size()); }
};

SymmetryGroup trivial_group(int n_sites);

// All lattice translations, identity first, then lexicographic shift order.
SymmetryGroup translation_group(const Lattice& lat);

SpinConfig apply_perm(const std::vector<int>& g, const SpinConfig& x);

// Lexicographically minimal packed form over the orbit of x under G,
// including the global spin flip when z2_even is set.
SpinConfig canonical_orbit_key(const SpinConfig& x, const SymmetryGroup& G,
                               bool z2_even);

}  // namespace slpm
