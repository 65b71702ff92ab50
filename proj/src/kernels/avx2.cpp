// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants. This file is compiled with -mavx2 and only entered after a
// CPUID check.
#include <immintrin.h>

#include "nxfp/kernels.hpp"

namespace nxfp::kernels::avx2 {

void nearest_index(std::span<const float> x, std::span<const double> thr,
                   std::span<const std::uint8_t> tie_up, std::span<std::uint16_t> out) {
  const std::size_t n = x.size();
  std::size_t i = 0;
  // Four lanes of double: comparisons against the (exact) double thresholds
  // must not round the input.
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(x.data() + i));
    __m256i count = _mm256_setzero_si256();
    for (std::size_t k = 0; k < thr.size(); ++k) {
      const __m256d t = _mm256_set1_pd(thr[k]);
      __m256d hit = _mm256_cmp_pd(t, v, _CMP_LT_OQ);
      if (tie_up[k]) hit = _mm256_or_pd(hit, _mm256_cmp_pd(t, v, _CMP_EQ_OQ));
      // all-ones lanes are -1 as 64-bit integers
      count = _mm256_sub_epi64(count, _mm256_castpd_si256(hit));
    }
    alignas(32) std::int64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), count);
    for (int l = 0; l < 4; ++l) out[i + l] = static_cast<std::uint16_t>(lanes[l]);
  }
  if (i < n) scalar::nearest_index(x.subspan(i), thr, tie_up, out.subspan(i));
}

void scale_lookup(std::span<const Code> codes, std::span<const float> lut, float scale,
                  std::span<float> out) {
  const std::size_t n = codes.size();
  const __m256 s = _mm256_set1_ps(scale);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(codes.data() + i));
    const __m256i idx = _mm256_cvtepu8_epi32(bytes);
    const __m256 v = _mm256_i32gather_ps(lut.data(), idx, 4);
    _mm256_storeu_ps(out.data() + i, _mm256_mul_ps(v, s));
  }
  if (i < n) scalar::scale_lookup(codes.subspan(i), lut, scale, out.subspan(i));
}

void gemm_f32(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
              std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(a[i * k + p]);
        const __m256 bv = _mm256_loadu_ps(b + p * n + j);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(av, bv));
      }
      _mm256_storeu_ps(c + i * n + j, acc);
    }
    for (; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) {
        const float prod = a[i * k + p] * b[p * n + j];
        acc = acc + prod;
      }
      c[i * n + j] = acc;
    }
  }
}

}  // namespace nxfp::kernels::avx2
