#include "cmf/kernels.hpp"

#include <immintrin.h>

namespace cmf::kern {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

inline double dot_avx2(const double* a, const double* b, int k) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= k; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < k; ++i) s += a[i] * b[i];
  return s;
}

void theta_batch_avx2(const double* V, const double* u, int n, int k,
                      double* theta) {
  for (int j = 0; j < n; ++j)
    theta[j] = dot_avx2(V + static_cast<long>(j) * k, u, k);
}

void weighted_sum_avx2(const double* V, const double* w, int n, int k,
                       double* g) {
  for (int j = 0; j < n; ++j) {
    const double* v = V + static_cast<long>(j) * k;
    __m256d wj = _mm256_set1_pd(w[j]);
    int a = 0;
    for (; a + 4 <= k; a += 4) {
      __m256d acc = _mm256_loadu_pd(g + a);
      acc = _mm256_fmadd_pd(wj, _mm256_loadu_pd(v + a), acc);
      _mm256_storeu_pd(g + a, acc);
    }
    for (; a < k; ++a) g[a] += w[j] * v[a];
  }
}

void weighted_gram_avx2(const double* V, const double* c, int n, int k,
                        double* H) {
  for (int j = 0; j < n; ++j) {
    const double* v = V + static_cast<long>(j) * k;
    double cj = c[j];
    for (int a = 0; a < k; ++a) {
      __m256d ca = _mm256_set1_pd(cj * v[a]);
      double* Ha = H + static_cast<long>(a) * k;
      int b = 0;
      for (; b + 4 <= k; b += 4) {
        __m256d acc = _mm256_loadu_pd(Ha + b);
        acc = _mm256_fmadd_pd(ca, _mm256_loadu_pd(v + b), acc);
        _mm256_storeu_pd(Ha + b, acc);
      }
      double cav = cj * v[a];
      for (; b < k; ++b) Ha[b] += cav * v[b];
    }
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{theta_batch_avx2, weighted_sum_avx2, weighted_gram_avx2,
                       dot_avx2, "avx2"};
  return ops;
}

}  // namespace cmf::kern
