#include "slpm/kernel.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "slpm/errors.hpp"
#include "slpm/rng.hpp"

#if defined(__AVX512F__) && defined(__AVX512VL__) && defined(__AVX512VPOPCNTDQ__)
#include <immintrin.h>
#define SLPM_AVX512 1
#endif

namespace slpm {

void KernelParams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("kernel: gamma must lie in (0,1)");
  if (group.size() < 1 || group.elems[0].empty())
    throw ConfigError("kernel: symmetry group must contain the identity");
}

double sigma_fn(double t, double gamma) { return t * std::asin(gamma * t); }

std::vector<double> sigma_table(int n_sites, double gamma) {
  std::vector<double> tbl(n_sites / 2 + 1);
  for (size_t r = 0; r < tbl.size(); ++r) {
    const double t = static_cast<double>(n_sites - 2 * static_cast<int>(r)) / n_sites;
    tbl[r] = sigma_fn(t, gamma);
  }
  return tbl;
}

double kernel_eval(const SpinConfig& x, const SpinConfig& y, const KernelParams& p) {
  p.validate();
  if (x.n != y.n || x.n != p.group.n_sites)
    throw std::invalid_argument("kernel_eval: size mismatch");
  double acc = 0.0;
  for (const auto& g : p.group.elems) {
    const SpinConfig gx = apply_perm(g, x);
    acc += sigma_fn(static_cast<double>(SpinConfig::overlap_numer(gx, y)) / x.n,
                    p.gamma);
  }
  return acc / p.group.size();
}

namespace {

int reduced_index(uint32_t a, uint32_t b, int n) {
  const int h = std::popcount(a ^ b);
  return std::min(h, n - h);
}

#ifdef SLPM_AVX512

double dot_sigma_avx(uint32_t q, const uint32_t* cfgs, const double* w,
                     size_t count, const double* tbl16, int n) {
  const __m512d t0 = _mm512_load_pd(tbl16);
  const __m512d t1 = _mm512_load_pd(tbl16 + 8);
  const __m256i qv = _mm256_set1_epi32(static_cast<int>(q));
  const __m256i nv = _mm256_set1_epi32(n);
  __m512d acc0 = _mm512_setzero_pd();
  __m512d acc1 = _mm512_setzero_pd();
  size_t k = 0;
  for (; k + 16 <= count; k += 16) {
    const __m256i ca = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(cfgs + k));
    const __m256i cb =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(cfgs + k + 8));
    const __m256i ha = _mm256_popcnt_epi32(_mm256_xor_si256(ca, qv));
    const __m256i hb = _mm256_popcnt_epi32(_mm256_xor_si256(cb, qv));
    const __m256i ra = _mm256_min_epu32(ha, _mm256_sub_epi32(nv, ha));
    const __m256i rb = _mm256_min_epu32(hb, _mm256_sub_epi32(nv, hb));
    const __m512d va = _mm512_permutex2var_pd(t0, _mm512_cvtepu32_epi64(ra), t1);
    const __m512d vb = _mm512_permutex2var_pd(t0, _mm512_cvtepu32_epi64(rb), t1);
    acc0 = _mm512_fmadd_pd(va, _mm512_loadu_pd(w + k), acc0);
    acc1 = _mm512_fmadd_pd(vb, _mm512_loadu_pd(w + k + 8), acc1);
  }
  for (; k + 8 <= count; k += 8) {
    const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(cfgs + k));
    const __m256i h = _mm256_popcnt_epi32(_mm256_xor_si256(c, qv));
    const __m256i r = _mm256_min_epu32(h, _mm256_sub_epi32(nv, h));
    const __m512d v = _mm512_permutex2var_pd(t0, _mm512_cvtepu32_epi64(r), t1);
    acc0 = _mm512_fmadd_pd(v, _mm512_loadu_pd(w + k), acc0);
  }
  return _mm512_reduce_add_pd(_mm512_add_pd(acc0, acc1));
}

void accum_sigma_avx(uint32_t q, const uint32_t* cfgs, size_t count,
                     const double* tbl16, int n, double* out) {
  const __m512d t0 = _mm512_load_pd(tbl16);
  const __m512d t1 = _mm512_load_pd(tbl16 + 8);
  const __m256i qv = _mm256_set1_epi32(static_cast<int>(q));
  const __m256i nv = _mm256_set1_epi32(n);
  size_t k = 0;
  for (; k + 8 <= count; k += 8) {
    const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(cfgs + k));
    const __m256i h = _mm256_popcnt_epi32(_mm256_xor_si256(c, qv));
    const __m256i r = _mm256_min_epu32(h, _mm256_sub_epi32(nv, h));
    const __m512d v = _mm512_permutex2var_pd(t0, _mm512_cvtepu32_epi64(r), t1);
    _mm512_storeu_pd(out + k, _mm512_add_pd(_mm512_loadu_pd(out + k), v));
  }
  for (; k < count; ++k)
    out[k] += tbl16[reduced_index(q, cfgs[k], n)];
}

#endif  // SLPM_AVX512

double dot_sigma_scalar(uint32_t q, const uint32_t* cfgs, const double* w,
                        size_t count, const double* tbl, int n) {
  double acc = 0.0;
  for (size_t k = 0; k < count; ++k) acc += w[k] * tbl[reduced_index(q, cfgs[k], n)];
  return acc;
}

void accum_sigma_scalar(uint32_t q, const uint32_t* cfgs, size_t count,
                        const double* tbl, int n, double* out) {
  for (size_t k = 0; k < count; ++k) out[k] += tbl[reduced_index(q, cfgs[k], n)];
}

bool use_permute_path(int n) {
#ifdef SLPM_AVX512
  return n <= 31;  // reduced table must fit 16 permute lanes
#else
  (void)n;
  return false;
#endif
}

double dot_sigma(uint32_t q, const uint32_t* cfgs, const double* w, size_t count,
                 const double* tbl16, int n) {
#ifdef SLPM_AVX512
  if (use_permute_path(n)) return dot_sigma_avx(q, cfgs, w, count, tbl16, n);
#endif
  return dot_sigma_scalar(q, cfgs, w, count, tbl16, n);
}

void accum_sigma(uint32_t q, const uint32_t* cfgs, size_t count, const double* tbl16,
                 int n, double* out) {
#ifdef SLPM_AVX512
  if (use_permute_path(n)) {
    accum_sigma_avx(q, cfgs, count, tbl16, n, out);
    return;
  }
#endif
  accum_sigma_scalar(q, cfgs, count, tbl16, n, out);
}

}  // namespace

GramMatrix gram_matrix(const std::vector<SpinConfig>& samples, const KernelParams& p) {
  p.validate();
  const int n = p.group.n_sites;
  const size_t m = samples.size();
  for (const auto& s : samples)
    if (s.n != n) throw std::invalid_argument("gram_matrix: size mismatch");

  GramMatrix gm;
  gm.order = samples;
  gm.K.resize(m, m);

  if (n <= 32) {
    const auto tbl = sigma_table(n, p.gamma);
    alignas(64) double tbl16[16] = {0};
    for (size_t r = 0; r < tbl.size() && r < 16; ++r) tbl16[r] = tbl[r];
    const double* tp = tbl.size() <= 16 ? tbl16 : tbl.data();

    std::vector<uint32_t> packed(m);
    for (size_t i = 0; i < m; ++i) packed[i] = static_cast<uint32_t>(samples[i].w[0]);

    // translates of each row sample; group closure makes g vs g^{-1} moot
    const int ng = p.group.size();
    std::vector<uint32_t> trans(ng);
    std::vector<double> row(m);
    for (size_t i = 0; i < m; ++i) {
      for (int g = 0; g < ng; ++g)
        trans[g] =
            static_cast<uint32_t>(apply_perm(p.group.elems[g], samples[i]).w[0]);
      std::fill(row.begin(), row.begin() + i + 1, 0.0);
      for (int g = 0; g < ng; ++g)
        accum_sigma(trans[g], packed.data(), i + 1, tp, n, row.data());
      for (size_t j = 0; j <= i; ++j) {
        const double v = row[j] / ng;
        gm.K(i, j) = v;
        gm.K(j, i) = v;
      }
    }
  } else {
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j <= i; ++j) {
        const double v = kernel_eval(samples[i], samples[j], p);
        gm.K(i, j) = v;
        gm.K(j, i) = v;
      }
  }
  return gm;
}

CompiledPredictor::CompiledPredictor(const std::vector<SpinConfig>& support,
                                     const std::vector<double>& weights,
                                     const KernelParams& p, double log_shift) {
  p.validate();
  if (support.size() != weights.size())
    throw std::invalid_argument("predictor: support/weight size mismatch");
  n_ = p.group.n_sites;
  shift_ = log_shift;
  packed_ = n_ <= 32;
  table_ = sigma_table(n_, p.gamma);
  for (size_t r = 0; r < table_.size() && r < 16; ++r) tbl16_[r] = table_[r];

  const int ng = p.group.size();
  const double inv_g = 1.0 / ng;
  const size_t flat_n = support.size() * ng;
  const size_t padded = packed_ ? (flat_n + 15) / 16 * 16 : flat_n;
  flat_w_.assign(padded, 0.0);
  if (packed_)
    flat32_.assign(padded, 0u);
  else
    flat64_.reserve(flat_n);

  size_t k = 0;
  for (size_t i = 0; i < support.size(); ++i) {
    if (support[i].n != n_) throw std::invalid_argument("predictor: size mismatch");
    for (int g = 0; g < ng; ++g, ++k) {
      const SpinConfig t = apply_perm(p.group.elems[g], support[i]);
      if (packed_)
        flat32_[k] = static_cast<uint32_t>(t.w[0]);
      else
        flat64_.push_back(t);
      flat_w_[k] = weights[i] * inv_g;
    }
  }
  count_ = padded;
  if (flat_n == 0) count_ = 0;
}

double CompiledPredictor::predict_packed(uint32_t x) const {
  if (count_ == 0) return shift_;
  const double* tp = table_.size() <= 16 ? tbl16_ : table_.data();
  return shift_ + dot_sigma(x, flat32_.data(), flat_w_.data(), count_, tp, n_);
}

double CompiledPredictor::operator()(const SpinConfig& x) const {
  if (x.n != n_) throw std::invalid_argument("predictor: size mismatch");
  if (count_ == 0) return shift_;
  if (packed_) return predict_packed(static_cast<uint32_t>(x.w[0]));
  double acc = 0.0;
  for (size_t k = 0; k < flat64_.size(); ++k) {
    const int h = (x.n - SpinConfig::overlap_numer(x, flat64_[k])) / 2;
    acc += flat_w_[k] * table_[std::min(h, x.n - h)];
  }
  return shift_ + acc;
}

double empirical_ntk(const SpinConfig& x, const SpinConfig& y,
                     const KernelParams& p, int width, uint64_t seed) {
  p.validate();
  const int n0 = p.group.n_sites;
  if (x.n != n0 || y.n != n0)
    throw std::invalid_argument("empirical_ntk: size mismatch");
  if (width < 1) throw std::invalid_argument("empirical_ntk: width must be >= 1");

  const int ng = p.group.size();
  // group images of x and y as +/-1 vectors
  std::vector<double> gx(ng * n0), gy(ng * n0);
  for (int g = 0; g < ng; ++g) {
    const SpinConfig ax = apply_perm(p.group.elems[g], x);
    const SpinConfig ay = apply_perm(p.group.elems[g], y);
    for (int k = 0; k < n0; ++k) {
      gx[g * n0 + k] = ax.spin(k);
      gy[g * n0 + k] = ay.spin(k);
    }
  }
  // O(g,g') = <g.x, g'.y>
  std::vector<double> ov(ng * ng);
  for (int g = 0; g < ng; ++g)
    for (int g2 = 0; g2 < ng; ++g2) {
      double s = 0.0;
      for (int k = 0; k < n0; ++k) s += gx[g * n0 + k] * gy[g2 * n0 + k];
      ov[g * ng + g2] = s;
    }

  RngStream rng(seed, {0x6e746bULL});
  const double inv_sqrt_n0 = 1.0 / std::sqrt(static_cast<double>(n0));
  std::vector<double> w(n0), tx(ng), ty(ng);
  double theta = 0.0;
  for (int unit = 0; unit < width; ++unit) {
    for (int k = 0; k < n0; ++k) w[k] = rng.normal();
    for (int g = 0; g < ng; ++g) {
      double zx = 0.0, zy = 0.0;
      for (int k = 0; k < n0; ++k) {
        zx += w[k] * gx[g * n0 + k];
        zy += w[k] * gy[g * n0 + k];
      }
      tx[g] = std::tanh(zx * inv_sqrt_n0);
      ty[g] = std::tanh(zy * inv_sqrt_n0);
    }
    for (int g = 0; g < ng; ++g) {
      double s = 0.0;
      for (int g2 = 0; g2 < ng; ++g2) s += ty[g2] * ov[g * ng + g2];
      theta += tx[g] * s;
    }
  }
  theta /= static_cast<double>(ng) * ng * width * n0;
  // scale to the arcsin kernel normalization (tanh' covariance carries 2/pi)
  return theta * (M_PI / 2.0);
}

}  // namespace slpm
