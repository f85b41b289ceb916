#ifndef SPGNN_SRC_KERNELS_HPP
#define SPGNN_SRC_KERNELS_HPP

// Shared inner loops: float storage, double accumulation. Reductions keep a
// fixed lane-striped summation order, so a given binary is deterministic
// run to run; the scalar path is a portability fallback.

#include <cmath>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define SPGNN_KERNELS_AVX2 1
#endif

namespace spgnn::detail {

#if SPGNN_KERNELS_AVX2

inline double dot_striped(const float* a, const float* b, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m128 af = _mm_loadu_ps(a + i);
    __m128 bf = _mm_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(af), _mm256_cvtps_pd(bf), acc0);
    __m128 af1 = _mm_loadu_ps(a + i + 4);
    __m128 bf1 = _mm_loadu_ps(b + i + 4);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(af1), _mm256_cvtps_pd(bf1), acc1);
  }
  double lanes0[4], lanes1[4];
  _mm256_storeu_pd(lanes0, acc0);
  _mm256_storeu_pd(lanes1, acc1);
  double s0 = lanes0[0], s1 = lanes0[1], s2 = lanes0[2], s3 = lanes0[3];
  double t0 = lanes1[0], t1 = lanes1[1], t2 = lanes1[2], t3 = lanes1[3];
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (((s0 + t0) + (s1 + t1)) + ((s2 + t2) + (s3 + t3)));
}

inline void axpy(double* acc, const float* src, double w, int n) {
  __m256d wv = _mm256_set1_pd(w);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
    __m256d a = _mm256_loadu_pd(acc + i);
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(wv, s, a));
  }
  for (; i < n; ++i) acc[i] += w * src[i];
}

#else

inline double dot_striped(const float* a, const float* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  double t0 = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0;
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    t0 += static_cast<double>(a[i + 4]) * b[i + 4];
    t1 += static_cast<double>(a[i + 5]) * b[i + 5];
    t2 += static_cast<double>(a[i + 6]) * b[i + 6];
    t3 += static_cast<double>(a[i + 7]) * b[i + 7];
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (((s0 + t0) + (s1 + t1)) + ((s2 + t2) + (s3 + t3)));
}

inline void axpy(double* acc, const float* src, double w, int n) {
  for (int i = 0; i < n; ++i) acc[i] += w * src[i];
}

#endif

// elu forward: out = x for x > 0, exp(x) - 1 otherwise. The negative side
// uses a degree-5 exp polynomial with 2^k reconstruction (Cephes
// coefficients); |x| < 2^-5 switches to the direct expm1 series, which is
// exact where exp(x)-1 would cancel.
inline void elu_forward(const float* x, float* out, long long n) {
  const float kLog2e = 1.442695041f;
  const float kLn2Hi = 0.693359375f;
  const float kLn2Lo = -2.12194440e-4f;
  const float kC0 = 1.9875691500e-4f, kC1 = 1.3981999507e-3f,
              kC2 = 8.3334519073e-3f, kC3 = 4.1665795894e-2f,
              kC4 = 1.6666665459e-1f, kC5 = 5.0000001201e-1f;
  long long i = 0;
#if SPGNN_KERNELS_AVX2
  const __m256 vlog2e = _mm256_set1_ps(kLog2e);
  const __m256 vln2hi = _mm256_set1_ps(kLn2Hi);
  const __m256 vln2lo = _mm256_set1_ps(kLn2Lo);
  const __m256 vone = _mm256_set1_ps(1.0f);
  const __m256 vhalf = _mm256_set1_ps(0.5f);
  const __m256 vzero = _mm256_setzero_ps();
  const __m256 vmin = _mm256_set1_ps(-87.0f);
  const __m256 vsmall = _mm256_set1_ps(0.03125f);
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 xc = _mm256_max_ps(v, vmin);
    // k = round(x / ln 2); r = x - k ln 2 (two-part)
    __m256 kf = _mm256_round_ps(_mm256_mul_ps(xc, vlog2e),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256 r = _mm256_fnmadd_ps(kf, vln2hi, xc);
    r = _mm256_fnmadd_ps(kf, vln2lo, r);
    __m256 p = _mm256_set1_ps(kC0);
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(kC1));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(kC2));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(kC3));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(kC4));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(kC5));
    __m256 r2 = _mm256_mul_ps(r, r);
    __m256 er = _mm256_add_ps(_mm256_add_ps(vone, r), _mm256_mul_ps(p, r2));
    // scale by 2^k
    __m256i ki = _mm256_cvtps_epi32(kf);
    __m256i pow2 = _mm256_slli_epi32(_mm256_add_epi32(ki, _mm256_set1_epi32(127)), 23);
    __m256 expx = _mm256_mul_ps(er, _mm256_castsi256_ps(pow2));
    __m256 em1 = _mm256_sub_ps(expx, vone);
    // series x + x^2/2 + x^3/6 + x^4/24 for |x| < 1/32
    __m256 s = _mm256_set1_ps(1.0f / 24.0f);
    s = _mm256_fmadd_ps(s, v, _mm256_set1_ps(1.0f / 6.0f));
    s = _mm256_fmadd_ps(s, v, vhalf);
    s = _mm256_fmadd_ps(s, v, vone);
    s = _mm256_mul_ps(s, v);
    __m256 absv = _mm256_andnot_ps(_mm256_set1_ps(-0.0f), v);
    __m256 use_series = _mm256_cmp_ps(absv, vsmall, _CMP_LT_OQ);
    __m256 neg = _mm256_blendv_ps(em1, s, use_series);
    __m256 pos_mask = _mm256_cmp_ps(v, vzero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i, _mm256_blendv_ps(neg, v, pos_mask));
  }
#endif
  for (; i < n; ++i) {
    float v = x[i];
    if (v > 0.0f) {
      out[i] = v;
    } else if (v > -0.03125f) {
      out[i] = v * (1.0f + v * (0.5f + v * (1.0f / 6.0f + v * (1.0f / 24.0f))));
    } else {
      float xc = v < -87.0f ? -87.0f : v;
      float kf = std::nearbyintf(xc * kLog2e);
      float r = xc - kf * kLn2Hi;
      r = r - kf * kLn2Lo;
      float p = kC0;
      p = p * r + kC1;
      p = p * r + kC2;
      p = p * r + kC3;
      p = p * r + kC4;
      p = p * r + kC5;
      float er = 1.0f + r + p * r * r;
      float e;
      {
        int ki = static_cast<int>(kf);
        union {
          int bits;
          float f;
        } u;
        u.bits = (ki + 127) << 23;
        e = er * u.f;
      }
      out[i] = e - 1.0f;
    }
  }
}


}  // namespace spgnn::detail

#endif
