// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nxfp {

enum class DType { binary16, bfloat16, binary32 };

const char* to_string(DType d);
DType parse_dtype(const std::string& s);
std::size_t dtype_size(DType d);

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

enum class SynthModel { gaussian, outlier_injected, clustered_scattered_pairs };

SynthModel parse_synth_model(const std::string& s);
const char* to_string(SynthModel m);

struct TensorSource {
  enum class Kind { npy, safetensors, raw, synthetic };

  Kind kind = Kind::npy;
  std::filesystem::path path;
  std::optional<DType> dtype;       // required for raw
  std::vector<std::size_t> shape;   // required for raw; synthetic uses {n}
  std::string name;                 // tensor name inside a safetensors file
  SynthModel model = SynthModel::gaussian;
  std::uint64_t seed = 0;

  // npy / safetensors by extension, otherwise raw.
  static TensorSource from_path(const std::filesystem::path& p);
};

// Converts stored binary16 / bfloat16 / binary32 to binary32 exactly.
Tensor load_tensor(const TensorSource& src);

Tensor load_npy(std::span<const std::uint8_t> bytes);
Tensor load_safetensors(std::span<const std::uint8_t> bytes, const std::string& name);
Tensor load_raw(std::span<const std::uint8_t> bytes, DType dtype,
                std::span<const std::size_t> shape);

// Little-endian npy v1 with '<f4' or '<f2' payload.
std::vector<std::uint8_t> encode_npy(std::span<const std::size_t> shape,
                                     std::span<const float> values,
                                     DType dtype = DType::binary32);
void write_npy(const std::filesystem::path& path, std::span<const std::size_t> shape,
               std::span<const float> values, DType dtype = DType::binary32);

// Deterministic synthetic weights.
//   gaussian: i.i.d. N(0, 1).
//   outlier_injected: gaussian, then in every group of `group` elements the
//     largest magnitude is replaced by 1.9x the second largest (sign kept).
//   clustered_scattered_pairs: groups alternate; even groups are
//     value-clustered (|v| uniform in [0.5, 1) * A, random sign), odd groups
//     are value-scattered (N(0, 0.15) * A plus one outlier with |v| uniform
//     in [1, 1.9) * A). A = 2^u with u uniform in [-4, 4) per group.
std::vector<float> synth_weights(SynthModel model, std::size_t n, std::uint64_t seed,
                                 std::size_t group = 32);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace nxfp
