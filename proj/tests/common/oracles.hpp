// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used by the tests. Deliberately naive and written
// without the library's level tables or search code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "nxfp/config.hpp"

namespace oracle {

// Sign-magnitude minifloat with E exponent and M mantissa bits.
inline double minifloat(int E, int M, unsigned code) {
  const unsigned mag_bits = static_cast<unsigned>(E + M);
  const bool neg = (code >> mag_bits) & 1u;
  const unsigned field = (code >> M) & ((1u << E) - 1u);
  const unsigned mant = code & ((1u << M) - 1u);
  const int bias = E >= 2 ? (1 << (E - 1)) - 1 : 0;
  const double frac = static_cast<double>(mant) / std::pow(2.0, M);
  const double mag = field == 0 ? frac * std::pow(2.0, 1 - bias)
                                : (1.0 + frac) * std::pow(2.0, static_cast<int>(field) - bias);
  return neg ? -mag : mag;
}

inline std::vector<double> positive_levels(int E, int M) {
  std::vector<double> out;
  for (unsigned c = 0; c < (1u << (E + M)); ++c) out.push_back(minifloat(E, M, c));
  return out;
}

// floor(log2(largest level)).
inline int level_emax(int E, int M) {
  const auto lv = positive_levels(E, M);
  const double top = *std::max_element(lv.begin(), lv.end());
  return static_cast<int>(std::floor(std::log2(top)));
}

// Decoded value of every code of one per-block element format, in the
// scaled space shared by both formats of `cfg` (the microexponent format's).
// Only the half-smallest recycling rule is modelled.
inline std::vector<double> code_values(const nxfp::QuantConfig& cfg, int fmt) {
  const int E = fmt ? cfg.microexp_bits : 0;
  const int M = cfg.element_bits - 1 - E;
  const int space = level_emax(cfg.microexp_bits, cfg.element_bits - 1 - cfg.microexp_bits);
  const double shift = std::pow(2.0, space - level_emax(E, M));
  std::vector<double> v;
  for (unsigned c = 0; c < (1u << cfg.element_bits); ++c) v.push_back(minifloat(E, M, c) * shift);
  if (cfg.recycle_enabled) {
    double smallest = std::numeric_limits<double>::infinity();
    for (double x : v) {
      if (x > 0) smallest = std::min(smallest, x);
    }
    v[1u << (cfg.element_bits - 1)] = -smallest / 2;
  }
  return v;
}

inline int floor_log2(double x) {
  int e = 0;
  std::frexp(x, &e);
  return e - 1;
}

// Minimal original-space MSE over every m in `ms`, every allowed element
// format and every per-element code (the squared error is separable, so
// the per-element minimum over all codes is the minimum over all
// assignments). The shared exponent is floor(log2(max |v|)).
inline double exhaustive_mse(std::span<const float> block, const nxfp::QuantConfig& cfg,
                             std::span<const int> ms) {
  double vmax = 0;
  for (float x : block) vmax = std::max(vmax, std::fabs(static_cast<double>(x)));
  if (vmax == 0) return 0;
  const int e = std::clamp(floor_log2(vmax), -127, 127);
  const int space = level_emax(cfg.microexp_bits, cfg.element_bits - 1 - cfg.microexp_bits);
  std::vector<int> fmts;
  if (cfg.adaptive_enabled && cfg.microexp_bits > 0) {
    fmts = {1, 0};
  } else {
    fmts = {cfg.microexp_bits > 0 ? 1 : 0};
  }
  double best = std::numeric_limits<double>::infinity();
  for (int m : ms) {
    for (int f : fmts) {
      const auto vals = code_values(cfg, f);
      const double step = (1.0 + m / 4.0) * std::pow(2.0, e - space);
      double sum = 0;
      for (float x : block) {
        double emin = std::numeric_limits<double>::infinity();
        for (double v : vals) {
          const double err = static_cast<double>(x) - v * step;
          emin = std::min(emin, err * err);
        }
        sum += emin;
      }
      best = std::min(best, sum / static_cast<double>(block.size()));
    }
  }
  return best;
}

inline double exhaustive_mse(std::span<const float> block, const nxfp::QuantConfig& cfg) {
  std::vector<int> ms = {0};
  if (cfg.nano_enabled) ms = {0, 1, 2, 3};
  return exhaustive_mse(block, cfg, ms);
}

// Row-major [m, k] x [k, n] with binary32 accumulation in k order.
inline std::vector<float> matmul(std::span<const float> a, std::span<const float> b,
                                 std::size_t m, std::size_t n, std::size_t k) {
  std::vector<float> c(m * n, 0.0f);
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
  return c;
}

// IEEE binary16 decode from the bit fields.
inline double half_value(std::uint16_t h) {
  const int s = h >> 15;
  const int e = (h >> 10) & 0x1F;
  const int f = h & 0x3FF;
  double v;
  if (e == 0) {
    v = std::ldexp(f, -24);
  } else if (e == 31) {
    v = f ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  } else {
    v = std::ldexp(1024 + f, e - 25);
  }
  return s ? -v : v;
}

// Random finite binary16 values, as float.
inline std::vector<float> random_halves(std::mt19937_64& rng, std::size_t n) {
  std::vector<float> out;
  while (out.size() < n) {
    const auto h = static_cast<std::uint16_t>(rng());
    const double v = half_value(h);
    if (std::isfinite(v)) out.push_back(static_cast<float>(v));
  }
  return out;
}

}  // namespace oracle
