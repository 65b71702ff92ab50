// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "nxfp/kernels.hpp"

namespace nxfp::kernels::scalar {

void nearest_index(std::span<const float> x, std::span<const double> thr,
                   std::span<const std::uint8_t> tie_up, std::span<std::uint16_t> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const auto it = std::lower_bound(thr.begin(), thr.end(), v);
    auto idx = static_cast<std::size_t>(it - thr.begin());
    if (it != thr.end() && *it == v && tie_up[idx]) ++idx;
    out[i] = static_cast<std::uint16_t>(idx);
  }
}

void scale_lookup(std::span<const Code> codes, std::span<const float> lut, float scale,
                  std::span<float> out) {
  for (std::size_t i = 0; i < codes.size(); ++i) out[i] = lut[codes[i]] * scale;
}

void gemm_f32(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
              std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) {
        const float prod = a[i * k + p] * b[p * n + j];
        acc = acc + prod;
      }
      c[i * n + j] = acc;
    }
  }
}

}  // namespace nxfp::kernels::scalar
