// SPDX-License-Identifier: Apache-2.0
#include "nxfp/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "nxfp/error.hpp"
#include "nxfp/numeric.hpp"

namespace nxfp {

const char* to_string(DType d) {
  switch (d) {
    case DType::binary16: return "f16";
    case DType::bfloat16: return "bf16";
    case DType::binary32: return "f32";
  }
  return "f32";
}

DType parse_dtype(const std::string& s) {
  if (s == "f16" || s == "F16" || s == "binary16") return DType::binary16;
  if (s == "bf16" || s == "BF16" || s == "bfloat16") return DType::bfloat16;
  if (s == "f32" || s == "F32" || s == "binary32") return DType::binary32;
  throw Error(Errc::dtype_mismatch, "unsupported dtype: " + s);
}

std::size_t dtype_size(DType d) { return d == DType::binary32 ? 4 : 2; }

SynthModel parse_synth_model(const std::string& s) {
  if (s == "gaussian") return SynthModel::gaussian;
  if (s == "outliers" || s == "outlier_injected") return SynthModel::outlier_injected;
  if (s == "pairs" || s == "clustered_scattered_pairs") return SynthModel::clustered_scattered_pairs;
  throw Error(Errc::invalid_argument, "unknown synthetic model: " + s);
}

const char* to_string(SynthModel m) {
  switch (m) {
    case SynthModel::gaussian: return "gaussian";
    case SynthModel::outlier_injected: return "outliers";
    case SynthModel::clustered_scattered_pairs: return "pairs";
  }
  return "gaussian";
}

TensorSource TensorSource::from_path(const std::filesystem::path& p) {
  TensorSource s;
  s.path = p;
  const auto ext = p.extension().string();
  if (ext == ".npy") {
    s.kind = Kind::npy;
  } else if (ext == ".safetensors") {
    s.kind = Kind::safetensors;
  } else {
    s.kind = Kind::raw;
  }
  return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

namespace {

std::size_t element_count(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::vector<float> convert(std::span<const std::uint8_t> data, DType dtype, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = data.data() + i * dtype_size(dtype);
    switch (dtype) {
      case DType::binary32: {
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                   static_cast<std::uint32_t>(p[1]) << 8 |
                                   static_cast<std::uint32_t>(p[2]) << 16 |
                                   static_cast<std::uint32_t>(p[3]) << 24;
        out[i] = std::bit_cast<float>(bits);
        break;
      }
      case DType::binary16:
        out[i] = f16_bits_to_f32(static_cast<std::uint16_t>(p[0] | p[1] << 8));
        break;
      case DType::bfloat16:
        out[i] = bf16_bits_to_f32(static_cast<std::uint16_t>(p[0] | p[1] << 8));
        break;
    }
  }
  return out;
}

// Value of `key` in a Python dict literal as written by numpy.
std::string dict_value(const std::string& header, const std::string& key) {
  const std::string quoted = "'" + key + "'";
  auto pos = header.find(quoted);
  if (pos == std::string::npos) throw Error(Errc::malformed_header, "npy header lacks " + key);
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string::npos) throw Error(Errc::malformed_header, "npy header: no ':' after " + key);
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  if (pos >= header.size()) throw Error(Errc::malformed_header, "npy header ends after " + key);
  if (header[pos] == '\'') {
    const auto end = header.find('\'', pos + 1);
    if (end == std::string::npos) throw Error(Errc::malformed_header, "npy header: unterminated string");
    return header.substr(pos + 1, end - pos - 1);
  }
  if (header[pos] == '(') {
    const auto end = header.find(')', pos);
    if (end == std::string::npos) throw Error(Errc::malformed_header, "npy header: unterminated tuple");
    return header.substr(pos + 1, end - pos - 1);
  }
  const auto end = header.find_first_of(",}", pos);
  return header.substr(pos, end - pos);
}

}  // namespace

Tensor load_npy(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0) {
    throw Error(Errc::bad_magic, "not an npy file");
  }
  if (bytes.size() < 10) throw Error(Errc::truncated, "npy header truncated");
  const int major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = bytes[8] | static_cast<std::size_t>(bytes[9]) << 8;
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error(Errc::truncated, "npy header truncated");
    header_len = bytes[8] | static_cast<std::size_t>(bytes[9]) << 8 |
                 static_cast<std::size_t>(bytes[10]) << 16 | static_cast<std::size_t>(bytes[11]) << 24;
    offset = 12;
  } else {
    throw Error(Errc::unsupported_version, fmt::format("unsupported npy version {}", major));
  }
  if (bytes.size() < offset + header_len) throw Error(Errc::truncated, "npy header truncated");
  const std::string header(reinterpret_cast<const char*>(bytes.data()) + offset, header_len);

  const std::string descr = dict_value(header, "descr");
  DType dtype;
  if (descr == "<f4") {
    dtype = DType::binary32;
  } else if (descr == "<f2") {
    dtype = DType::binary16;
  } else {
    throw Error(Errc::dtype_mismatch, "unsupported npy dtype '" + descr + "'");
  }
  if (dict_value(header, "fortran_order") != "False") {
    throw Error(Errc::malformed_header, "fortran-ordered npy arrays are not supported");
  }

  Tensor t;
  const std::string dims = dict_value(header, "shape");
  std::size_t pos = 0;
  while (pos < dims.size()) {
    const auto comma = dims.find(',', pos);
    std::string d = dims.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    d.erase(std::remove(d.begin(), d.end(), ' '), d.end());
    if (!d.empty()) {
      try {
        t.shape.push_back(std::stoull(d));
      } catch (const std::exception&) {
        throw Error(Errc::malformed_header, "bad npy shape: (" + dims + ")");
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  const std::size_t n = element_count(t.shape);
  const std::size_t data_at = offset + header_len;
  const std::size_t need = n * dtype_size(dtype);
  if (bytes.size() - data_at < need) {
    throw Error(Errc::truncated, fmt::format("npy data: need {} bytes, have {}", need,
                                             bytes.size() - data_at));
  }
  if (bytes.size() - data_at > need) {
    throw Error(Errc::length_mismatch, fmt::format("npy data: expected {} bytes, have {}", need,
                                                   bytes.size() - data_at));
  }
  t.values = convert(bytes.subspan(data_at, need), dtype, n);
  return t;
}

Tensor load_safetensors(std::span<const std::uint8_t> bytes, const std::string& name) {
  if (bytes.size() < 8) throw Error(Errc::truncated, "safetensors file shorter than 8 bytes");
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if (bytes.size() - 8 < header_len) throw Error(Errc::truncated, "safetensors header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8,
                                   bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_header, std::string("safetensors header: ") + e.what());
  }
  if (!header.is_object()) throw Error(Errc::malformed_header, "safetensors header is not an object");

  std::string key = name;
  if (key.empty()) {
    std::vector<std::string> names;
    for (const auto& [k, v] : header.items()) {
      if (k != "__metadata__") names.push_back(k);
    }
    if (names.size() != 1) {
      throw Error(Errc::unknown_tensor,
                  fmt::format("file holds {} tensors; pick one with a tensor name", names.size()));
    }
    key = names.front();
  }
  const auto it = header.find(key);
  if (it == header.end() || key == "__metadata__") {
    throw Error(Errc::unknown_tensor, "no tensor named '" + key + "'");
  }

  Tensor t;
  DType dtype;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  try {
    dtype = parse_dtype(it->at("dtype").get<std::string>());
    t.shape = it->at("shape").get<std::vector<std::size_t>>();
    const auto offsets = it->at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0]) {
      throw Error(Errc::malformed_header, "bad data_offsets for '" + key + "'");
    }
    begin = offsets[0];
    end = offsets[1];
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_header, "safetensors entry '" + key + "': " + e.what());
  }
  const std::size_t n = element_count(t.shape);
  if (end - begin != n * dtype_size(dtype)) {
    throw Error(Errc::length_mismatch,
                fmt::format("tensor '{}' declares {} bytes for {} {} elements", key, end - begin, n,
                            to_string(dtype)));
  }
  const std::uint64_t data_at = 8 + header_len;
  if (bytes.size() < data_at + end) throw Error(Errc::truncated, "safetensors data truncated");
  t.values = convert(bytes.subspan(data_at + begin, end - begin), dtype, n);
  return t;
}

Tensor load_raw(std::span<const std::uint8_t> bytes, DType dtype,
                std::span<const std::size_t> shape) {
  if (shape.empty()) throw Error(Errc::invalid_argument, "raw input needs a shape");
  const std::size_t n = element_count(shape);
  const std::size_t need = n * dtype_size(dtype);
  if (bytes.size() < need) {
    throw Error(Errc::truncated, fmt::format("raw data: need {} bytes, have {}", need, bytes.size()));
  }
  if (bytes.size() > need) {
    throw Error(Errc::length_mismatch,
                fmt::format("raw data: shape needs {} bytes, file has {}", need, bytes.size()));
  }
  return Tensor{{shape.begin(), shape.end()}, convert(bytes, dtype, n)};
}

Tensor load_tensor(const TensorSource& src) {
  try {
    switch (src.kind) {
      case TensorSource::Kind::synthetic: {
        if (src.shape.empty()) throw Error(Errc::invalid_argument, "synthetic source needs a size");
        const std::size_t n = element_count(src.shape);
        return Tensor{src.shape, synth_weights(src.model, n, src.seed)};
      }
      case TensorSource::Kind::raw: {
        if (!src.dtype) throw Error(Errc::invalid_argument, "raw input needs a dtype");
        return load_raw(read_file(src.path), *src.dtype, src.shape);
      }
      case TensorSource::Kind::npy: {
        Tensor t = load_npy(read_file(src.path));
        return t;
      }
      case TensorSource::Kind::safetensors:
        return load_safetensors(read_file(src.path), src.name);
    }
  } catch (const Error& e) {
    if (src.kind == TensorSource::Kind::synthetic) throw;
    throw Error(e.code(), src.path.string() + ": " + e.what());
  }
  throw Error(Errc::invalid_argument, "unknown source kind");
}

std::vector<std::uint8_t> encode_npy(std::span<const std::size_t> shape,
                                     std::span<const float> values, DType dtype) {
  if (dtype == DType::bfloat16) throw Error(Errc::dtype_mismatch, "npy has no bfloat16 dtype");
  if (element_count(shape) != values.size()) {
    throw Error(Errc::shape_mismatch, fmt::format("shape holds {} values, got {}", element_count(shape),
                                                  values.size()));
  }
  std::string dims;
  for (std::size_t d : shape) dims += std::to_string(d) + ", ";
  if (shape.size() > 1) dims.resize(dims.size() - 2);
  if (shape.size() == 1) dims.resize(dims.size() - 1);
  std::string header = fmt::format("{{'descr': '{}', 'fortran_order': False, 'shape': ({}), }}",
                                   dtype == DType::binary32 ? "<f4" : "<f2", dims);
  // Pad so that magic + version + length + header is a multiple of 64.
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<std::uint8_t> out = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  for (float v : values) {
    if (dtype == DType::binary32) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    } else {
      const auto bits = f32_to_f16_bits(v);
      out.push_back(static_cast<std::uint8_t>(bits & 0xFF));
      out.push_back(static_cast<std::uint8_t>(bits >> 8));
    }
  }
  return out;
}

void write_npy(const std::filesystem::path& path, std::span<const std::size_t> shape,
               std::span<const float> values, DType dtype) {
  const auto bytes = encode_npy(shape, values, dtype);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io, "write failed: " + path.string());
}

namespace {

// mt19937_64 is fully specified by the standard; the distributions in
// <random> are not, so uniform and normal draws are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586;
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  double sign() { return (gen_() >> 63) ? -1.0 : 1.0; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

std::vector<float> synth_weights(SynthModel model, std::size_t n, std::uint64_t seed,
                                 std::size_t group) {
  if (n == 0) throw Error(Errc::invalid_argument, "synthetic tensor needs n > 0");
  if (group == 0) throw Error(Errc::invalid_argument, "synthetic group size must be positive");
  Rng rng(seed);
  std::vector<float> out(n);
  switch (model) {
    case SynthModel::gaussian:
      for (float& v : out) v = static_cast<float>(rng.normal());
      break;
    case SynthModel::outlier_injected:
      for (float& v : out) v = static_cast<float>(rng.normal());
      for (std::size_t lo = 0; lo < n; lo += group) {
        const std::size_t hi = std::min(n, lo + group);
        if (hi - lo < 2) break;
        std::size_t first = lo;
        for (std::size_t i = lo; i < hi; ++i) {
          if (std::fabs(out[i]) > std::fabs(out[first])) first = i;
        }
        float second = 0.0f;
        for (std::size_t i = lo; i < hi; ++i) {
          if (i != first) second = std::max(second, std::fabs(out[i]));
        }
        out[first] = std::copysign(1.9f * second, out[first]);
      }
      break;
    case SynthModel::clustered_scattered_pairs:
      for (std::size_t lo = 0, g = 0; lo < n; lo += group, ++g) {
        const std::size_t hi = std::min(n, lo + group);
        const double amp = std::exp2(std::floor(rng.uniform() * 8.0) - 4.0);
        if (g % 2 == 0) {
          for (std::size_t i = lo; i < hi; ++i) {
            out[i] = static_cast<float>(rng.sign() * (0.5 + 0.5 * rng.uniform()) * amp);
          }
        } else {
          for (std::size_t i = lo; i < hi; ++i) out[i] = static_cast<float>(0.15 * rng.normal() * amp);
          const std::size_t at = lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo));
          out[at] = static_cast<float>(rng.sign() * (1.0 + 0.9 * rng.uniform()) * amp);
        }
      }
      break;
  }
  return out;
}

}  // namespace nxfp
