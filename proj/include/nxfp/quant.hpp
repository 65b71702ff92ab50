// SPDX-License-Identifier: Apache-2.0
//
// MSE-driven block quantization.
//
// For every block the quantizer picks a shared exponent (the binade of the
// largest magnitude), then searches NanoMantissa multipliers m in {0..3}
// (1 + m/4) and, with adaptive selection, both element formats, keeping the
// candidate with the smallest mean squared error in the original value space.
// The winning reconstruction is then written in its canonical encoding so that
// quantizing a dequantized tensor reproduces the same codes and scales.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nxfp/config.hpp"
#include "nxfp/container.hpp"

namespace nxfp {

struct BlockReport {
  double mse = 0.0;      // over the block's real elements
  double l1 = 0.0;       // mean absolute error
  double max_abs = 0.0;  // largest absolute error
  std::size_t count = 0;
  std::uint8_t fmt = 1;
  std::uint8_t m_nano = 0;
};

struct QuantizedBlock {
  BlockScale scale;
  std::vector<Code> codes;  // block_size entries
  BlockReport report;
};

// floor(log2(max |v|)); nullopt for an all-zero block. Throws
// Errc::non_finite on NaN/Inf and Errc::invalid_argument on an empty block.
std::optional<int> shared_exponent(std::span<const float> block);

// The 2-bit m whose multiplier 1 + m/4 is nearest to scaled_max / q_max
// (ties to even m), clamped to [0, 3].
int nano_candidate(double scaled_max, double q_max);
// Same, with the block scaled into `table`'s space by 2^(table.emax() - e_shared).
int nano_candidate(std::span<const float> block, int e_shared, const LevelTable& table);

// Reconstruction of one block under an explicit scale (exact, in double).
std::vector<double> reconstruct(const BlockScale& scale, std::span<const Code> codes,
                                const TablePair& tables);

// Unique encoding of an exactly representable block, if one exists.
std::optional<QuantizedBlock> canonical_encoding(std::span<const double> values,
                                                 const QuantConfig& cfg, const TablePair& tables);

// `block` may be shorter than cfg.block_size; the tail is zero padding and is
// excluded from the error report.
QuantizedBlock quantize_block(std::span<const float> block, const QuantConfig& cfg,
                              const TablePair& tables);
QuantizedBlock quantize_block(std::span<const float> block, const QuantConfig& cfg);

struct QuantizeResult {
  PackedTensor tensor;
  std::vector<BlockReport> reports;
};

// Blocks the row-major flattened tensor, zero-pads the final block and
// quantizes every block independently (in parallel, with output identical to
// a sequential run).
QuantizeResult quantize_tensor_with_report(std::span<const float> values,
                                           std::span<const std::size_t> shape,
                                           const QuantConfig& cfg);
PackedTensor quantize_tensor(std::span<const float> values, std::span<const std::size_t> shape,
                             const QuantConfig& cfg);
inline PackedTensor quantize_tensor(std::span<const float> values, const QuantConfig& cfg) {
  const std::size_t n = values.size();
  return quantize_tensor(values, std::span<const std::size_t>(&n, 1), cfg);
}

}  // namespace nxfp
