#include "kernels_internal.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace ocmae::kernels::avx2 {
namespace {

// Lane masks for the n % 8 tail; row r enables the first r lanes.
alignas(32) constexpr int kTailMask[9][8] = {
    {0, 0, 0, 0, 0, 0, 0, 0},         {-1, 0, 0, 0, 0, 0, 0, 0},
    {-1, -1, 0, 0, 0, 0, 0, 0},       {-1, -1, -1, 0, 0, 0, 0, 0},
    {-1, -1, -1, -1, 0, 0, 0, 0},     {-1, -1, -1, -1, -1, 0, 0, 0},
    {-1, -1, -1, -1, -1, -1, 0, 0},   {-1, -1, -1, -1, -1, -1, -1, 0},
    {-1, -1, -1, -1, -1, -1, -1, -1},
};

inline __m256i tail_mask(std::int64_t count) {
  return _mm256_load_si256(reinterpret_cast<const __m256i*>(kTailMask[count]));
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline float hmax(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_max_ps(lo, hi);
  lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_max_ss(lo, _mm_movehdup_ps(lo));
  return _mm_cvtss_f32(lo);
}

// Cephes-style exp: range reduction by ln 2 and a degree-5 polynomial.
inline __m256 exp_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);

  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);

  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  const __m256 x2 = _mm256_mul_ps(x, x);
  y = _mm256_fmadd_ps(y, x2, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

  __m256i e = _mm256_cvttps_epi32(fx);
  e = _mm256_add_epi32(e, _mm256_set1_epi32(127));
  e = _mm256_slli_epi32(e, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

// Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
inline __m256 erf_ps(__m256 x) {
  const __m256 sign_bit = _mm256_set1_ps(-0.0f);
  const __m256 sign = _mm256_and_ps(x, sign_bit);
  const __m256 ax = _mm256_andnot_ps(sign_bit, x);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 t = _mm256_div_ps(one, _mm256_fmadd_ps(_mm256_set1_ps(0.3275911f), ax, one));
  __m256 poly = _mm256_set1_ps(1.061405429f);
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(-1.453152027f));
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(1.421413741f));
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(-0.284496736f));
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(0.254829592f));
  poly = _mm256_mul_ps(poly, t);
  const __m256 e = exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), _mm256_mul_ps(ax, ax)));
  const __m256 r = _mm256_fnmadd_ps(poly, e, one);
  return _mm256_or_ps(r, sign);
}

template <int R>
inline void gemm_rows(std::int64_t n, std::int64_t k, const float* a, const float* b, float* c,
                      bool accumulate) {
  std::int64_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256 c0[R], c1[R];
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      c0[r] = accumulate ? _mm256_loadu_ps(c + r * n + j) : _mm256_setzero_ps();
      c1[r] = accumulate ? _mm256_loadu_ps(c + r * n + j + 8) : _mm256_setzero_ps();
    }
    for (std::int64_t p = 0; p < k; ++p) {
      const __m256 b0 = _mm256_loadu_ps(b + p * n + j);
      const __m256 b1 = _mm256_loadu_ps(b + p * n + j + 8);
#pragma GCC unroll 4
      for (int r = 0; r < R; ++r) {
        const __m256 av = _mm256_broadcast_ss(a + r * k + p);
        c0[r] = _mm256_fmadd_ps(av, b0, c0[r]);
        c1[r] = _mm256_fmadd_ps(av, b1, c1[r]);
      }
    }
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      _mm256_storeu_ps(c + r * n + j, c0[r]);
      _mm256_storeu_ps(c + r * n + j + 8, c1[r]);
    }
  }
  for (; j < n; j += 8) {
    const std::int64_t width = n - j < 8 ? n - j : 8;
    const __m256i mask = tail_mask(width);
    __m256 acc[R];
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r)
      acc[r] = accumulate ? _mm256_maskload_ps(c + r * n + j, mask) : _mm256_setzero_ps();
    for (std::int64_t p = 0; p < k; ++p) {
      const __m256 bv = _mm256_maskload_ps(b + p * n + j, mask);
#pragma GCC unroll 4
      for (int r = 0; r < R; ++r)
        acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * k + p), bv, acc[r]);
    }
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) _mm256_maskstore_ps(c + r * n + j, mask, acc[r]);
  }
}

}  // namespace

bool compiled() { return true; }

void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, const float* b,
          float* c, bool accumulate) {
  std::int64_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(n, k, a + i * k, b, c + i * n, accumulate);
  switch (m - i) {
    case 3: gemm_rows<3>(n, k, a + i * k, b, c + i * n, accumulate); break;
    case 2: gemm_rows<2>(n, k, a + i * k, b, c + i * n, accumulate); break;
    case 1: gemm_rows<1>(n, k, a + i * k, b, c + i * n, accumulate); break;
    default: break;
  }
}

void softmax_rows(std::int64_t rows, std::int64_t n, const float* x, float* y) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * n;
    float* yr = y + r * n;
    __m256 vmax = _mm256_set1_ps(-INFINITY);
    std::int64_t j = 0;
    for (; j + 8 <= n; j += 8) vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(xr + j));
    float mx = hmax(vmax);
    for (; j < n; ++j) mx = xr[j] > mx ? xr[j] : mx;

    const __m256 vmx = _mm256_set1_ps(mx);
    __m256 vsum = _mm256_setzero_ps();
    j = 0;
    for (; j + 8 <= n; j += 8) {
      const __m256 e = exp_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + j), vmx));
      _mm256_storeu_ps(yr + j, e);
      vsum = _mm256_add_ps(vsum, e);
    }
    float sum = hsum(vsum);
    for (; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const float inv = 1.0f / sum;
    const __m256 vinv = _mm256_set1_ps(inv);
    j = 0;
    for (; j + 8 <= n; j += 8) _mm256_storeu_ps(yr + j, _mm256_mul_ps(_mm256_loadu_ps(yr + j), vinv));
    for (; j < n; ++j) yr[j] *= inv;
  }
}

void softmax_backward_rows(std::int64_t rows, std::int64_t n, const float* y, const float* dy,
                           float* dx) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* yr = y + r * n;
    const float* gr = dy + r * n;
    float* dr = dx + r * n;
    __m256 vdot = _mm256_setzero_ps();
    std::int64_t j = 0;
    for (; j + 8 <= n; j += 8)
      vdot = _mm256_fmadd_ps(_mm256_loadu_ps(yr + j), _mm256_loadu_ps(gr + j), vdot);
    float dot = hsum(vdot);
    for (; j < n; ++j) dot += yr[j] * gr[j];
    const __m256 vd = _mm256_set1_ps(dot);
    j = 0;
    for (; j + 8 <= n; j += 8) {
      const __m256 t = _mm256_mul_ps(_mm256_loadu_ps(yr + j), _mm256_sub_ps(_mm256_loadu_ps(gr + j), vd));
      _mm256_storeu_ps(dr + j, _mm256_add_ps(_mm256_loadu_ps(dr + j), t));
    }
    for (; j < n; ++j) dr[j] += yr[j] * (gr[j] - dot);
  }
}

void gelu(std::int64_t n, const float* x, float* y) {
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 inv_sqrt2 = _mm256_set1_ps(0.70710678118654752f);
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 cdf = _mm256_mul_ps(half, _mm256_add_ps(one, erf_ps(_mm256_mul_ps(v, inv_sqrt2))));
    _mm256_storeu_ps(y + i, _mm256_mul_ps(v, cdf));
  }
  for (; i < n; ++i) y[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * 0.70710678118654752f));
}

void gelu_backward(std::int64_t n, const float* x, const float* dy, float* dx) {
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 inv_sqrt2 = _mm256_set1_ps(0.70710678118654752f);
  const __m256 inv_sqrt2pi = _mm256_set1_ps(0.39894228040143268f);
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 cdf = _mm256_mul_ps(half, _mm256_add_ps(one, erf_ps(_mm256_mul_ps(v, inv_sqrt2))));
    const __m256 pdf =
        _mm256_mul_ps(inv_sqrt2pi, exp_ps(_mm256_mul_ps(_mm256_set1_ps(-0.5f), _mm256_mul_ps(v, v))));
    const __m256 d = _mm256_fmadd_ps(v, pdf, cdf);
    _mm256_storeu_ps(dx + i, _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), d, _mm256_loadu_ps(dx + i)));
  }
  for (; i < n; ++i) {
    const float cdf = 0.5f * (1.0f + std::erf(x[i] * 0.70710678118654752f));
    const float pdf = 0.39894228040143268f * std::exp(-0.5f * x[i] * x[i]);
    dx[i] += dy[i] * (cdf + x[i] * pdf);
  }
}

void axpy(std::int64_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace ocmae::kernels::avx2

#else

#include <stdexcept>

namespace ocmae::kernels::avx2 {

bool compiled() { return false; }

namespace {
[[noreturn]] void unavailable() { throw std::logic_error("AVX2 kernels were not compiled in"); }
}  // namespace

void gemm(std::int64_t, std::int64_t, std::int64_t, const float*, const float*, float*, bool) {
  unavailable();
}
void softmax_rows(std::int64_t, std::int64_t, const float*, float*) { unavailable(); }
void softmax_backward_rows(std::int64_t, std::int64_t, const float*, const float*, float*) {
  unavailable();
}
void gelu(std::int64_t, const float*, float*) { unavailable(); }
void gelu_backward(std::int64_t, const float*, const float*, float*) { unavailable(); }
void axpy(std::int64_t, float, const float*, float*) { unavailable(); }

}  // namespace ocmae::kernels::avx2

#endif
