// SPDX-License-Identifier: Apache-2.0
//
// Element formats for block-scaled minifloats.
//
// Every element is sign-magnitude with `exp_bits` microexponent bits and
// `mant_bits` trailing mantissa bits. exp_bits == 0 is the BFP case (a plain
// sign-magnitude integer mantissa). All codes decode to finite values; there
// are no Inf/NaN encodings at element level.
//
// Level tables live in a "scaled space": the space in which the block's
// largest magnitude, divided by the power-of-two block scale, lands in
// [2^emax, 2^(emax+1)). A stored element code decodes to
//
//     level(code) * (1 + m_nano / 4) * 2^(e_shared - emax)
//
// where emax is the table's scaled-space exponent.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nxfp {

using Code = std::uint8_t;

struct ElementFormat {
  int exp_bits = 2;
  int mant_bits = 1;

  constexpr int total_bits() const { return 1 + exp_bits + mant_bits; }
  constexpr int magnitude_bits() const { return exp_bits + mant_bits; }
  constexpr int bias() const { return exp_bits >= 2 ? (1 << (exp_bits - 1)) - 1 : 0; }
  constexpr Code sign_mask() const { return static_cast<Code>(1u << magnitude_bits()); }
  constexpr int code_count() const { return 1 << total_bits(); }

  // Exponent of the largest normal level, e.g. 2 for E2M1 (6 = 1.5 * 2^2).
  int natural_emax() const;

  // "E2M1", "E0M3", ...
  std::string name() const;

  friend bool operator==(const ElementFormat&, const ElementFormat&) = default;
};

// Throws Errc::invalid_argument unless total_bits is in [3, 8].
void validate(const ElementFormat& fmt);

// Which level the otherwise-wasted -0 code is rebound to.
struct RecycleRule {
  enum class Kind {
    half_smallest,  // half of the smallest nonzero level
    midpoint_top,   // midpoint of the two largest levels
    midpoint,       // midpoint of magnitude levels `index` and `index + 1`
    explicit_value, // `value`, in the table's scaled space
  };

  Kind kind = Kind::half_smallest;
  int index = 0;
  double value = 0.0;
  // The -0 code carries a set sign bit, so the remapped level is negative by
  // default.
  bool negative = true;

  static RecycleRule half_smallest() { return {}; }
  static RecycleRule midpoint_top() { return {Kind::midpoint_top, 0, 0.0, true}; }
  static RecycleRule midpoint(int i) { return {Kind::midpoint, i, 0.0, true}; }
  static RecycleRule explicit_level(double v) { return {Kind::explicit_value, 0, v, v < 0}; }

  // "half-smallest", "midpoint-top", "midpoint:3", "value:-0.25"
  std::string to_string() const;
  static RecycleRule parse(const std::string& s);

  friend bool operator==(const RecycleRule&, const RecycleRule&) = default;
};

// Immutable quantization-level table for one element format in one scaled
// space. Encoding is nearest-level with saturation; ties go to the level with
// the even magnitude code (smaller magnitude if both codes share parity, which
// can only happen next to a recycled level).
class LevelTable {
 public:
  LevelTable() = default;

  const ElementFormat& format() const { return format_; }
  int emax() const { return emax_; }
  int code_bits() const { return format_.total_bits(); }

  // Magnitudes indexed by magnitude code, strictly increasing, starting at 0.
  std::span<const double> magnitudes() const { return magnitudes_; }
  double max_level() const { return magnitudes_.back(); }
  double smallest_nonzero() const { return magnitudes_[1]; }
  const std::optional<double>& recycled_value() const { return recycled_; }

  // Signed entries in increasing value order, one per distinct value, with the
  // code the encoder emits for each, and the decision thresholds between
  // neighbours. thresholds()[k] separates entries k and k + 1.
  std::span<const double> sorted_values() const { return sorted_values_; }
  std::span<const Code> sorted_codes() const { return sorted_codes_; }
  std::span<const double> thresholds() const { return thresholds_; }
  std::span<const std::uint8_t> tie_up() const { return tie_up_; }

  Code encode(double v_scaled) const;
  double decode(Code code) const;

  // Position in sorted_values() of the nearest entry to v_scaled.
  std::size_t nearest_index(double v_scaled) const;

  bool operator==(const LevelTable& o) const {
    return format_ == o.format_ && emax_ == o.emax_ && decoded_ == o.decoded_;
  }

 private:
  friend LevelTable build_level_table(const ElementFormat&, bool, const RecycleRule&,
                                      std::optional<int>);

  ElementFormat format_{};
  int emax_ = 0;
  std::vector<double> magnitudes_;
  std::optional<double> recycled_;
  std::vector<double> decoded_;  // indexed by full code
  std::vector<double> sorted_values_;
  std::vector<Code> sorted_codes_;
  std::vector<double> thresholds_;
  std::vector<std::uint8_t> tie_up_;
};

// Materializes the level table. `space_emax` places the table in another
// format's scaled space (BFP tables share the MxFP companion's space); by
// default the format's natural emax is used.
LevelTable build_level_table(const ElementFormat& fmt, bool recycle,
                             const RecycleRule& rule = RecycleRule::half_smallest(),
                             std::optional<int> space_emax = std::nullopt);

inline Code encode_scalar(double v_scaled, const LevelTable& table) { return table.encode(v_scaled); }
inline double decode_scalar(Code code, const LevelTable& table) { return table.decode(code); }

// Resolves a recycle rule to a signed value in the scaled space of a table
// whose magnitudes are `mags`.
double resolve_recycled_value(std::span<const double> mags, const RecycleRule& rule);

}  // namespace nxfp
