// SPDX-License-Identifier: Apache-2.0
#include "nxfp/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include <fmt/format.h>

#include "nxfp/error.hpp"

namespace nxfp {

void validate(const ElementFormat& fmt) {
  if (fmt.exp_bits < 0 || fmt.mant_bits < 0 || fmt.total_bits() < 3 || fmt.total_bits() > 8) {
    throw Error(Errc::invalid_argument,
                fmt::format("element format {} has {} bits; supported widths are 3..8", fmt.name(),
                            fmt.total_bits()));
  }
}

int ElementFormat::natural_emax() const {
  const int max_field = (1 << exp_bits) - 1;
  // exp_bits == 0 has only the 0.M * 2^(1 - bias) binade; its top level is in [1, 2).
  return max_field == 0 ? -bias() : max_field - bias();
}

std::string ElementFormat::name() const { return fmt::format("E{}M{}", exp_bits, mant_bits); }

std::string RecycleRule::to_string() const {
  std::string s;
  switch (kind) {
    case Kind::half_smallest: s = "half-smallest"; break;
    case Kind::midpoint_top: s = "midpoint-top"; break;
    case Kind::midpoint: s = fmt::format("midpoint:{}", index); break;
    case Kind::explicit_value: return fmt::format("value:{}", value);
  }
  return negative ? s : s + ":positive";
}

RecycleRule RecycleRule::parse(const std::string& text) {
  std::string s = text;
  bool negative = true;
  constexpr std::string_view kPos = ":positive";
  if (s.size() > kPos.size() && s.ends_with(kPos)) {
    negative = false;
    s.resize(s.size() - kPos.size());
  }
  RecycleRule r;
  if (s == "half-smallest") {
    r = half_smallest();
  } else if (s == "midpoint-top") {
    r = midpoint_top();
  } else if (s.starts_with("midpoint:")) {
    char* end = nullptr;
    const long i = std::strtol(s.c_str() + 9, &end, 10);
    if (end == s.c_str() + 9 || *end != '\0' || i < 0) {
      throw Error(Errc::invalid_argument, "bad recycle rule: " + text);
    }
    r = midpoint(static_cast<int>(i));
  } else if (s.starts_with("value:")) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str() + 6, &end);
    if (end == s.c_str() + 6 || *end != '\0' || !std::isfinite(v)) {
      throw Error(Errc::invalid_argument, "bad recycle rule: " + text);
    }
    return explicit_level(v);
  } else {
    throw Error(Errc::invalid_argument, "bad recycle rule: " + text);
  }
  r.negative = negative;
  return r;
}

double resolve_recycled_value(std::span<const double> mags, const RecycleRule& rule) {
  double magnitude = 0.0;
  switch (rule.kind) {
    case RecycleRule::Kind::half_smallest:
      magnitude = mags[1] / 2;
      break;
    case RecycleRule::Kind::midpoint_top:
      magnitude = (mags[mags.size() - 1] + mags[mags.size() - 2]) / 2;
      break;
    case RecycleRule::Kind::midpoint:
      if (rule.index < 0 || static_cast<std::size_t>(rule.index) + 1 >= mags.size()) {
        throw Error(Errc::invalid_argument,
                    fmt::format("recycle midpoint index {} out of range", rule.index));
      }
      magnitude = (mags[rule.index] + mags[rule.index + 1]) / 2;
      break;
    case RecycleRule::Kind::explicit_value:
      return rule.value;
  }
  return rule.negative ? -magnitude : magnitude;
}

LevelTable build_level_table(const ElementFormat& fmt, bool recycle, const RecycleRule& rule,
                             std::optional<int> space_emax) {
  validate(fmt);
  LevelTable t;
  t.format_ = fmt;
  const int natural = fmt.natural_emax();
  t.emax_ = space_emax.value_or(natural);
  const int shift = t.emax_ - natural;

  const int mag_count = 1 << fmt.magnitude_bits();
  const int mant_count = 1 << fmt.mant_bits;
  t.magnitudes_.resize(mag_count);
  for (int c = 0; c < mag_count; ++c) {
    const int field = c >> fmt.mant_bits;
    const int mant = c & (mant_count - 1);
    const double frac = static_cast<double>(mant) / mant_count;
    const double v = field == 0 ? std::ldexp(frac, 1 - fmt.bias())
                                : std::ldexp(1.0 + frac, field - fmt.bias());
    t.magnitudes_[c] = std::ldexp(v, shift);
  }

  const Code sign = fmt.sign_mask();
  t.decoded_.resize(fmt.code_count());
  for (int c = 0; c < mag_count; ++c) {
    t.decoded_[c] = t.magnitudes_[c];
    t.decoded_[c | sign] = -t.magnitudes_[c];
  }
  if (recycle) {
    t.recycled_ = resolve_recycled_value(t.magnitudes_, rule);
    t.decoded_[sign] = *t.recycled_;
  } else {
    t.decoded_[sign] = 0.0;
  }

  // Distinct signed entries. Zero always encodes to +0; a recycled value that
  // duplicates an existing level is never emitted by the encoder.
  struct Entry {
    double value;
    Code code;
  };
  std::vector<Entry> entries;
  entries.reserve(fmt.code_count());
  for (int c = 0; c < mag_count; ++c) {
    entries.push_back({t.magnitudes_[c], static_cast<Code>(c)});
    if (c != 0) entries.push_back({-t.magnitudes_[c], static_cast<Code>(c | sign)});
  }
  if (t.recycled_) {
    const double r = *t.recycled_;
    const bool dup = std::any_of(entries.begin(), entries.end(),
                                 [r](const Entry& e) { return e.value == r; });
    if (!dup) entries.push_back({r, sign});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  for (const auto& e : entries) {
    t.sorted_values_.push_back(e.value);
    t.sorted_codes_.push_back(e.code);
  }
  const Code mag_mask = static_cast<Code>(sign - 1);
  for (std::size_t k = 0; k + 1 < entries.size(); ++k) {
    const Entry& lo = entries[k];
    const Entry& hi = entries[k + 1];
    t.thresholds_.push_back((lo.value + hi.value) / 2);
    const bool lo_even = ((lo.code & mag_mask) & 1) == 0;
    const bool hi_even = ((hi.code & mag_mask) & 1) == 0;
    bool up;
    if (lo_even != hi_even) {
      up = hi_even;
    } else {
      up = std::abs(hi.value) < std::abs(lo.value);
    }
    t.tie_up_.push_back(up ? 1 : 0);
  }
  return t;
}

std::size_t LevelTable::nearest_index(double v) const {
  const auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), v);
  auto idx = static_cast<std::size_t>(it - thresholds_.begin());
  if (it != thresholds_.end() && *it == v && tie_up_[idx]) ++idx;
  return idx;
}

Code LevelTable::encode(double v_scaled) const { return sorted_codes_[nearest_index(v_scaled)]; }

double LevelTable::decode(Code code) const {
  return decoded_[code & static_cast<Code>(format_.code_count() - 1)];
}

}  // namespace nxfp
