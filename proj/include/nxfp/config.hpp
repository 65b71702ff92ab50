// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "nxfp/formats.hpp"

namespace nxfp {

enum class NanoSearch {
  as_algorithm1,  // try {nano_candidate, 0}
  exhaustive4,    // try every m in 0..3
};

struct QuantConfig {
  int block_size = 32;
  int element_bits = 4;
  int microexp_bits = 2;
  bool nano_enabled = false;
  bool adaptive_enabled = false;
  bool recycle_enabled = false;
  RecycleRule recycle_rule = RecycleRule::half_smallest();
  NanoSearch nano_search = NanoSearch::as_algorithm1;

  // Element format selected by fmt = 1 (microexponent format).
  ElementFormat mx_format() const { return {microexp_bits, element_bits - 1 - microexp_bits}; }
  // Element format selected by fmt = 0 (all-mantissa format).
  ElementFormat bfp_format() const { return {0, element_bits - 1}; }

  // The fmt bit a non-adaptive config always uses.
  std::uint8_t default_fmt() const { return microexp_bits > 0 ? 1 : 0; }

  // Both element formats can be chosen per block.
  bool has_two_formats() const { return adaptive_enabled && microexp_bits > 0; }

  friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

// Throws Errc::invalid_argument on out-of-range fields.
void validate(const QuantConfig& cfg);

const char* to_string(NanoSearch s);
NanoSearch parse_nano_search(const std::string& s);

// Per-block shared scale. e_shared == kZeroBlockExponent marks an all-zero
// block (stored as 0xFF).
struct BlockScale {
  static constexpr int kZeroBlockExponent = 128;
  static constexpr int kMinExponent = -127;
  static constexpr int kMaxExponent = 127;

  int e_shared = kZeroBlockExponent;
  std::uint8_t m_nano = 0;
  std::uint8_t fmt = 1;

  bool is_zero_block() const { return e_shared == kZeroBlockExponent; }
  // 1 + m_nano / 4
  double nano_factor() const { return 1.0 + m_nano / 4.0; }

  friend bool operator==(const BlockScale&, const BlockScale&) = default;
};

// Level tables for both per-block element formats of a config, in one shared
// scaled space (the microexponent format's).
class TablePair {
 public:
  explicit TablePair(const QuantConfig& cfg);

  const LevelTable& for_fmt(std::uint8_t fmt) const { return fmt ? mx_ : bfp_; }
  const LevelTable& mx() const { return mx_; }
  const LevelTable& bfp() const { return bfp_; }
  int emax() const { return mx_.emax(); }

 private:
  LevelTable mx_;
  LevelTable bfp_;
};

}  // namespace nxfp
