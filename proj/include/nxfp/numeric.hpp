// SPDX-License-Identifier: Apache-2.0
//
// IEEE binary16 / bfloat16 conversions and a compensated accumulator.
#pragma once

#include <bit>
#include <cstdint>
#include <span>

namespace nxfp {

// Round-to-nearest-even; overflow goes to Inf, NaN stays NaN.
std::uint16_t f32_to_f16_bits(float f);
float f16_bits_to_f32(std::uint16_t h);
std::uint16_t f32_to_bf16_bits(float f);
inline float bf16_bits_to_f32(std::uint16_t h) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
}

// Neumaier summation. The result depends only on the order of add() calls.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs);

}  // namespace nxfp
