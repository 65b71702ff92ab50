// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Each kernel has a scalar reference and, on x86-64,
// an AVX2 variant. The variant is picked once at runtime from CPUID and can be
// forced with NXFP_KERNELS=scalar|avx2 or set_isa(). All variants must produce
// bit-identical output; tests/unit/test_kernels.cpp checks that.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "nxfp/formats.hpp"

namespace nxfp::kernels {

enum class Isa { scalar, avx2 };

const char* to_string(Isa isa);

struct KernelTable {
  // out[i] = #{k : thr[k] < x[i]} + [x[i] == thr[k] && tie_up[k]], i.e. the
  // index of the nearest sorted level under the table's tie rule.
  void (*nearest_index)(std::span<const float> x, std::span<const double> thr,
                        std::span<const std::uint8_t> tie_up, std::span<std::uint16_t> out);

  // out[i] = lut[codes[i]] * scale, single precision.
  void (*scale_lookup)(std::span<const Code> codes, std::span<const float> lut, float scale,
                       std::span<float> out);

  // c[m x n] = a[m x k] * b[k x n], row-major, binary32, each output summed
  // sequentially over the inner dimension with no fused multiply-add.
  void (*gemm_f32)(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                   std::size_t k);
};

namespace scalar {
void nearest_index(std::span<const float> x, std::span<const double> thr,
                   std::span<const std::uint8_t> tie_up, std::span<std::uint16_t> out);
void scale_lookup(std::span<const Code> codes, std::span<const float> lut, float scale,
                  std::span<float> out);
void gemm_f32(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
              std::size_t k);
}  // namespace scalar

#if defined(NXFP_HAVE_AVX2)
namespace avx2 {
void nearest_index(std::span<const float> x, std::span<const double> thr,
                   std::span<const std::uint8_t> tie_up, std::span<std::uint16_t> out);
void scale_lookup(std::span<const Code> codes, std::span<const float> lut, float scale,
                  std::span<float> out);
void gemm_f32(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
              std::size_t k);
}  // namespace avx2
#endif

bool isa_supported(Isa isa);
const KernelTable& table_for(Isa isa);

// Active kernels.
const KernelTable& active();
Isa active_isa();
// Throws Errc::invalid_argument if the ISA is not supported on this machine.
void set_isa(Isa isa);

}  // namespace nxfp::kernels
