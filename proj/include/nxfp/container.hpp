// SPDX-License-Identifier: Apache-2.0
//
// Packed tensors and the .nxt file layout.
//
//   "NXT1" | u32 version | u32 header_len | header (UTF-8 key=value lines)
//   | scales: one byte per block (e_shared + 127, 0xFF = all-zero block)
//   | sidecar: per block, 2-bit m_nano if NanoMantissa is on, then 1-bit fmt
//     if adaptive selection is on; LSB-first, padded to a byte
//   | payload: element codes, LSB-first within little-endian bytes,
//     block-major, padded to a byte
//
// All integers are little-endian.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nxfp/config.hpp"

namespace nxfp {

inline constexpr std::uint32_t kContainerVersion = 1;

struct PackedTensor {
  std::vector<std::size_t> shape;
  std::size_t logical_len = 0;
  QuantConfig cfg;
  std::vector<BlockScale> scales;
  std::vector<std::uint8_t> payload;

  std::size_t block_count() const { return scales.size(); }
  // Codes of block k, block_size entries (padding lanes included).
  std::vector<Code> block_codes(std::size_t k) const;
  // Number of real (non-padding) elements in block k.
  std::size_t block_length(std::size_t k) const;

  friend bool operator==(const PackedTensor&, const PackedTensor&) = default;
};

std::size_t block_count_for(std::size_t logical_len, int block_size);

// Metadata bits per block: 8-bit exponent, 2-bit NanoMantissa, 1-bit format.
int scale_bits_per_block(const QuantConfig& cfg);
double footprint_bits_per_element(const QuantConfig& cfg);
// blocks * (B * block_size + scale_bits_per_block), before byte alignment.
std::uint64_t footprint_bits(const PackedTensor& t);

// Predicted .nxt size: 12 + header + ceil(scale bits / 8) + ceil(payload bits / 8).
std::size_t serialized_size(const PackedTensor& t);

std::string header_text(const PackedTensor& t);
std::vector<std::uint8_t> serialize(const PackedTensor& t);
PackedTensor deserialize(std::span<const std::uint8_t> bytes);

void write_nxt(const std::filesystem::path& path, const PackedTensor& t);
PackedTensor read_nxt(const std::filesystem::path& path);

namespace bitpack {

// Packs `bits`-wide codes LSB-first starting at bit `bit_offset` of `out`.
void pack(std::span<const Code> codes, int bits, std::span<std::uint8_t> out,
          std::size_t bit_offset = 0);
void unpack(std::span<const std::uint8_t> in, int bits, std::size_t bit_offset,
            std::span<Code> codes);

}  // namespace bitpack

}  // namespace nxfp
