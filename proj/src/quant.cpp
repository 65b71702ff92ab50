// SPDX-License-Identifier: Apache-2.0
#include "nxfp/quant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "nxfp/error.hpp"
#include "nxfp/kernels.hpp"
#include "nxfp/parallel.hpp"

namespace nxfp {

namespace {

double max_abs(std::span<const float> v) {
  double m = 0.0;
  for (float x : v) m = std::max(m, static_cast<double>(std::fabs(x)));
  return m;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

int clamp_exponent(int e) {
  return std::clamp(e, BlockScale::kMinExponent, BlockScale::kMaxExponent);
}

// Per-element scale of a block: (1 + m/4) * 2^(e - emax).
double block_step(int e_shared, int m_nano, int emax) {
  return std::ldexp(1.0 + m_nano / 4.0, e_shared - emax);
}

std::span<const std::uint8_t> candidate_fmts(const QuantConfig& cfg,
                                             std::array<std::uint8_t, 2>& storage) {
  if (cfg.has_two_formats()) {
    storage = {1, 0};
    return {storage.data(), 2};
  }
  storage[0] = cfg.default_fmt();
  return {storage.data(), 1};
}

QuantizedBlock zero_block(const QuantConfig& cfg, std::size_t count) {
  QuantizedBlock q;
  q.scale = BlockScale{BlockScale::kZeroBlockExponent, 0, cfg.default_fmt()};
  q.codes.assign(cfg.block_size, Code{0});
  q.report.count = count;
  q.report.fmt = q.scale.fmt;
  return q;
}

struct Candidate {
  std::uint8_t m = 0;
  std::uint8_t fmt = 1;
  double mse = std::numeric_limits<double>::infinity();
  std::vector<std::uint16_t> index;
};

// Nearest-level rounding of the whole block under one (m, fmt) choice; the
// decision thresholds are moved into the original value space, where they are
// exact, so no input is ever rounded before comparison.
void evaluate(std::span<const float> block, int e_shared, int m, const LevelTable& table,
              Candidate& out, std::vector<double>& thr_scratch) {
  const double step = block_step(e_shared, m, table.emax());
  const auto thr = table.thresholds();
  thr_scratch.resize(thr.size());
  for (std::size_t k = 0; k < thr.size(); ++k) thr_scratch[k] = thr[k] * step;
  out.index.resize(block.size());
  kernels::active().nearest_index(block, thr_scratch, table.tie_up(), out.index);

  const auto levels = table.sorted_values();
  double sum = 0.0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const double err = static_cast<double>(block[i]) - levels[out.index[i]] * step;
    sum += err * err;
  }
  out.mse = sum / static_cast<double>(block.size());
}

bool try_represent(std::span<const double> values, int e_shared, int m, const LevelTable& table,
                   std::span<Code> codes) {
  const double step = block_step(e_shared, m, table.emax());
  const auto levels = table.sorted_values();
  const auto lcodes = table.sorted_codes();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v == 0.0) {
      codes[i] = 0;
      continue;
    }
    const std::size_t idx = table.nearest_index(v / step);
    if (levels[idx] * step != v) return false;
    codes[i] = lcodes[idx];
  }
  return true;
}

void fill_report(std::span<const float> block, std::span<const double> rec, double mse,
                 QuantizedBlock& q) {
  double l1 = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const double err = std::fabs(static_cast<double>(block[i]) - rec[i]);
    l1 += err;
    worst = std::max(worst, err);
  }
  q.report.mse = mse;
  q.report.l1 = l1 / static_cast<double>(block.size());
  q.report.max_abs = worst;
  q.report.count = block.size();
  q.report.fmt = q.scale.fmt;
  q.report.m_nano = q.scale.m_nano;
}

void check_block(std::span<const float> block, const QuantConfig& cfg) {
  if (block.empty()) throw Error(Errc::invalid_argument, "empty block");
  if (block.size() > static_cast<std::size_t>(cfg.block_size)) {
    throw Error(Errc::invalid_argument,
                fmt::format("block of {} elements exceeds block size {}", block.size(),
                            cfg.block_size));
  }
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (!std::isfinite(block[i])) {
      throw Error(Errc::non_finite, fmt::format("element {} is not finite", i));
    }
  }
}

}  // namespace

std::optional<int> shared_exponent(std::span<const float> block) {
  if (block.empty()) throw Error(Errc::invalid_argument, "empty block");
  for (float x : block) {
    if (!std::isfinite(x)) throw Error(Errc::non_finite, "block contains NaN or Inf");
  }
  const double m = max_abs(block);
  if (m == 0.0) return std::nullopt;
  return std::ilogb(m);
}

int nano_candidate(double scaled_max, double q_max) {
  const double quarters = std::nearbyint((scaled_max / q_max - 1.0) * 4.0);
  return static_cast<int>(std::clamp(quarters, 0.0, 3.0));
}

int nano_candidate(std::span<const float> block, int e_shared, const LevelTable& table) {
  const double scaled = std::ldexp(max_abs(block), table.emax() - e_shared);
  return nano_candidate(scaled, table.max_level());
}

std::vector<double> reconstruct(const BlockScale& scale, std::span<const Code> codes,
                                const TablePair& tables) {
  std::vector<double> out(codes.size(), 0.0);
  if (scale.is_zero_block()) return out;
  const LevelTable& table = tables.for_fmt(scale.fmt);
  const double step = block_step(scale.e_shared, scale.m_nano, table.emax());
  for (std::size_t i = 0; i < codes.size(); ++i) out[i] = table.decode(codes[i]) * step;
  return out;
}

std::optional<QuantizedBlock> canonical_encoding(std::span<const double> values,
                                                 const QuantConfig& cfg,
                                                 const TablePair& tables) {
  const double vmax = max_abs(values);
  if (vmax == 0.0) return zero_block(cfg, values.size());

  // The reconstruction's own binade first; a NanoMantissa multiplier can push
  // a block's largest level one binade up or down.
  const int e0 = std::ilogb(vmax);
  std::array<int, 5> exps{};
  std::size_t n_exp = 0;
  for (int d : {0, -1, 1, -2, 2}) {
    const int e = clamp_exponent(e0 + d);
    if (std::find(exps.begin(), exps.begin() + n_exp, e) == exps.begin() + n_exp) {
      exps[n_exp++] = e;
    }
  }

  std::array<std::uint8_t, 2> fmt_storage{};
  const auto fmts = candidate_fmts(cfg, fmt_storage);
  const int m_count = cfg.nano_enabled ? 4 : 1;

  QuantizedBlock q;
  q.codes.assign(cfg.block_size, Code{0});
  for (std::size_t ei = 0; ei < n_exp; ++ei) {
    for (int m = 0; m < m_count; ++m) {
      for (std::uint8_t f : fmts) {
        if (try_represent(values, exps[ei], m, tables.for_fmt(f),
                          std::span<Code>(q.codes).first(values.size()))) {
          q.scale = BlockScale{exps[ei], static_cast<std::uint8_t>(m), f};
          q.report.count = values.size();
          q.report.fmt = f;
          q.report.m_nano = static_cast<std::uint8_t>(m);
          return q;
        }
      }
    }
  }
  return std::nullopt;
}

QuantizedBlock quantize_block(std::span<const float> block, const QuantConfig& cfg,
                              const TablePair& tables) {
  check_block(block, cfg);
  const double vmax = max_abs(block);
  if (vmax == 0.0) return zero_block(cfg, block.size());

  const std::vector<double> exact(block.begin(), block.end());
  if (auto q = canonical_encoding(exact, cfg, tables)) return *std::move(q);

  const int e = clamp_exponent(std::ilogb(vmax));

  std::array<int, 4> ms{};
  std::size_t n_m = 0;
  if (cfg.nano_enabled) {
    const int nc = nano_candidate(block, e, tables.for_fmt(cfg.default_fmt()));
    ms[n_m++] = nc;
    if (cfg.nano_search == NanoSearch::exhaustive4) {
      for (int m = 0; m < 4; ++m) {
        if (m != nc) ms[n_m++] = m;
      }
    } else if (nc != 0) {
      ms[n_m++] = 0;
    }
  } else {
    ms[n_m++] = 0;
  }

  std::array<std::uint8_t, 2> fmt_storage{};
  const auto fmts = candidate_fmts(cfg, fmt_storage);

  Candidate best;
  Candidate trial[2];
  std::vector<double> scratch;
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    const int m = ms[mi];
    for (std::size_t fi = 0; fi < fmts.size(); ++fi) {
      trial[fi].m = static_cast<std::uint8_t>(m);
      trial[fi].fmt = fmts[fi];
      evaluate(block, e, m, tables.for_fmt(fmts[fi]), trial[fi], scratch);
    }
    // MxFP is evaluated first and wins ties.
    Candidate& pick = (fmts.size() == 2 && trial[1].mse < trial[0].mse) ? trial[1] : trial[0];
    if (pick.mse < best.mse) std::swap(best, pick);
  }

  const LevelTable& table = tables.for_fmt(best.fmt);
  const double step = block_step(e, best.m, table.emax());
  std::vector<double> rec(block.size());
  for (std::size_t i = 0; i < block.size(); ++i) rec[i] = table.sorted_values()[best.index[i]] * step;

  QuantizedBlock q;
  if (auto canon = canonical_encoding(rec, cfg, tables)) {
    q = *std::move(canon);
  } else {
    q.scale = BlockScale{e, best.m, best.fmt};
    q.codes.assign(cfg.block_size, Code{0});
    for (std::size_t i = 0; i < block.size(); ++i) q.codes[i] = table.sorted_codes()[best.index[i]];
  }
  fill_report(block, rec, best.mse, q);
  return q;
}

QuantizedBlock quantize_block(std::span<const float> block, const QuantConfig& cfg) {
  return quantize_block(block, cfg, TablePair(cfg));
}

QuantizeResult quantize_tensor_with_report(std::span<const float> values,
                                           std::span<const std::size_t> shape,
                                           const QuantConfig& cfg) {
  validate(cfg);
  if (values.empty()) throw Error(Errc::invalid_argument, "empty tensor");
  std::size_t product = 1;
  for (std::size_t d : shape) product *= d;
  if (shape.empty() || product != values.size()) {
    throw Error(Errc::shape_mismatch,
                fmt::format("shape holds {} elements but {} values were given", product,
                            values.size()));
  }
  const std::size_t bs = static_cast<std::size_t>(cfg.block_size);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(Errc::non_finite,
                  fmt::format("block {}: element {} is not finite", i / bs, i % bs));
    }
  }

  const TablePair tables(cfg);
  const std::size_t blocks = block_count_for(values.size(), cfg.block_size);

  QuantizeResult r;
  PackedTensor& t = r.tensor;
  t.shape.assign(shape.begin(), shape.end());
  t.logical_len = values.size();
  t.cfg = cfg;
  t.scales.resize(blocks);
  r.reports.resize(blocks);
  std::vector<Code> codes(blocks * bs, Code{0});

  parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t lo = k * bs;
      const std::size_t len = std::min(bs, values.size() - lo);
      QuantizedBlock q = quantize_block(values.subspan(lo, len), cfg, tables);
      t.scales[k] = q.scale;
      r.reports[k] = q.report;
      std::copy(q.codes.begin(), q.codes.end(), codes.begin() + static_cast<std::ptrdiff_t>(lo));
    }
  });

  const std::size_t bits = codes.size() * static_cast<std::size_t>(cfg.element_bits);
  t.payload.assign((bits + 7) / 8, 0);
  bitpack::pack(codes, cfg.element_bits, t.payload);
  return r;
}

PackedTensor quantize_tensor(std::span<const float> values, std::span<const std::size_t> shape,
                             const QuantConfig& cfg) {
  return quantize_tensor_with_report(values, shape, cfg).tensor;
}

}  // namespace nxfp
