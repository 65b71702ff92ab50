// SPDX-License-Identifier: Apache-2.0
#include "nxfp/dequant.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nxfp/error.hpp"
#include "nxfp/kernels.hpp"
#include "nxfp/numeric.hpp"
#include "nxfp/parallel.hpp"

namespace nxfp {

const char* to_string(DequantTarget t) {
  switch (t) {
    case DequantTarget::binary16: return "f16";
    case DequantTarget::bfloat16: return "bf16";
    case DequantTarget::binary32: return "f32";
  }
  return "f32";
}

DequantTarget parse_target(const std::string& s) {
  if (s == "f16" || s == "binary16") return DequantTarget::binary16;
  if (s == "bf16" || s == "bfloat16") return DequantTarget::bfloat16;
  if (s == "f32" || s == "binary32") return DequantTarget::binary32;
  throw Error(Errc::invalid_argument, "unknown dequantization target: " + s);
}

float round_to_target(float x, DequantTarget target) {
  switch (target) {
    case DequantTarget::binary16: return f16_bits_to_f32(f32_to_f16_bits(x));
    case DequantTarget::bfloat16: return bf16_bits_to_f32(f32_to_bf16_bits(x));
    case DequantTarget::binary32: return x;
  }
  return x;
}

BlockDecoder::BlockDecoder(const QuantConfig& cfg) : cfg_(cfg), tables_(cfg) {
  for (int f = 0; f < 2; ++f) {
    const LevelTable& table = tables_.for_fmt(static_cast<std::uint8_t>(f));
    const int n = table.format().code_count();
    for (int m = 0; m < 4; ++m) {
      auto& lut = luts_[f][m];
      lut.resize(n);
      for (int c = 0; c < n; ++c) {
        lut[c] = static_cast<float>(table.decode(static_cast<Code>(c)) * (1.0 + m / 4.0));
      }
    }
  }
}

void BlockDecoder::decode(const BlockScale& scale, std::span<const Code> codes,
                          DequantTarget target, std::span<float> out) const {
  const std::size_t n = out.size();
  if (scale.is_zero_block()) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  if (scale.m_nano > 3 || scale.fmt > 1) {
    throw Error(Errc::invalid_argument, "block scale out of range");
  }
  const auto& lut = luts_[scale.fmt][scale.m_nano];
  const int k = scale.e_shared - tables_.for_fmt(scale.fmt).emax();
  if (k >= -149 && k <= 127) {
    // 2^k is exact in binary32, so the product rounds once.
    kernels::active().scale_lookup(codes.first(n), lut, std::ldexp(1.0f, k), out);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = static_cast<float>(std::ldexp(static_cast<double>(lut[codes[i]]), k));
    }
  }
  if (target != DequantTarget::binary32) {
    for (float& x : out) x = round_to_target(x, target);
  }
}

std::vector<float> dequantize_block(const BlockScale& scale, std::span<const Code> codes,
                                    const QuantConfig& cfg, DequantTarget target) {
  const BlockDecoder dec(cfg);
  std::vector<float> out(codes.size());
  dec.decode(scale, codes, target, out);
  return out;
}

std::vector<float> dequantize_tensor(const PackedTensor& t, DequantTarget target) {
  const BlockDecoder dec(t.cfg);
  const auto bs = static_cast<std::size_t>(t.cfg.block_size);
  std::vector<float> out(t.logical_len);
  parallel_for(t.block_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto codes = t.block_codes(k);
      dec.decode(t.scales[k], codes, target,
                 std::span<float>(out).subspan(k * bs, t.block_length(k)));
    }
  });
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> matrix_dims(const PackedTensor& t, const char* which) {
  if (t.shape.size() != 2) {
    throw Error(Errc::shape_mismatch,
                fmt::format("operand {} must be 2-D, has {} dimensions", which, t.shape.size()));
  }
  return {t.shape[0], t.shape[1]};
}

Matrix multiply(std::span<const float> a, std::size_t m, std::size_t k, std::span<const float> b,
                std::size_t b_rows, std::size_t n) {
  if (k != b_rows) {
    throw Error(Errc::shape_mismatch,
                fmt::format("inner dimensions differ: {} vs {}", k, b_rows));
  }
  if (b.size() != b_rows * n) {
    throw Error(Errc::shape_mismatch, "right operand size does not match its shape");
  }
  Matrix c{m, n, std::vector<float>(m * n)};
  kernels::active().gemm_f32(a.data(), b.data(), c.data.data(), m, n, k);
  return c;
}

}  // namespace

Matrix gemm_dequant(const PackedTensor& a, const PackedTensor& b, DequantTarget target) {
  const auto [m, k] = matrix_dims(a, "a");
  const auto [kb, n] = matrix_dims(b, "b");
  const auto da = dequantize_tensor(a, target);
  const auto db = dequantize_tensor(b, target);
  return multiply(da, m, k, db, kb, n);
}

Matrix gemm_dequant(const PackedTensor& a, std::span<const float> b, std::size_t b_rows,
                    std::size_t b_cols, DequantTarget target) {
  const auto [m, k] = matrix_dims(a, "a");
  const auto da = dequantize_tensor(a, target);
  return multiply(da, m, k, b, b_rows, b_cols);
}

}  // namespace nxfp
