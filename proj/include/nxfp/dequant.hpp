// SPDX-License-Identifier: Apache-2.0
//
// On-the-fly dequantization. Per block, the format bit selects the element
// table (slice), the -0 code decodes to its recycled level, the NanoMantissa
// multiplies the element significand, the shared exponent is added, and the
// result is rounded once to the target precision.
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "nxfp/config.hpp"
#include "nxfp/container.hpp"

namespace nxfp {

enum class DequantTarget { binary16, bfloat16, binary32 };

const char* to_string(DequantTarget t);
DequantTarget parse_target(const std::string& s);

// Rounds a binary32 value to the target precision (RNE), returned as binary32.
float round_to_target(float x, DequantTarget target);

// Decoding tables for one config, reusable across blocks and threads.
class BlockDecoder {
 public:
  explicit BlockDecoder(const QuantConfig& cfg);

  const QuantConfig& config() const { return cfg_; }
  const TablePair& tables() const { return tables_; }

  // out.size() values from the first out.size() codes.
  void decode(const BlockScale& scale, std::span<const Code> codes, DequantTarget target,
              std::span<float> out) const;

 private:
  QuantConfig cfg_;
  TablePair tables_;
  // [fmt][m_nano] -> level * (1 + m/4) per code, exact in binary32.
  std::array<std::array<std::vector<float>, 4>, 2> luts_;
};

std::vector<float> dequantize_block(const BlockScale& scale, std::span<const Code> codes,
                                    const QuantConfig& cfg,
                                    DequantTarget target = DequantTarget::binary32);

// Logical-length output; padding lanes are dropped.
std::vector<float> dequantize_tensor(const PackedTensor& t,
                                     DequantTarget target = DequantTarget::binary32);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // row-major
};

// a: [M, K] packed, b: [K, N]. Operands are dequantized to `target` and
// multiplied with binary32 accumulation, summed sequentially over K.
Matrix gemm_dequant(const PackedTensor& a, const PackedTensor& b,
                    DequantTarget target = DequantTarget::binary32);
Matrix gemm_dequant(const PackedTensor& a, std::span<const float> b, std::size_t b_rows,
                    std::size_t b_cols, DequantTarget target = DequantTarget::binary32);

}  // namespace nxfp
