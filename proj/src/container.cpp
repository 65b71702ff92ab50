// SPDX-License-Identifier: Apache-2.0
#include "nxfp/container.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "nxfp/error.hpp"

namespace nxfp {

namespace bitpack {

void pack(std::span<const Code> codes, int bits, std::span<std::uint8_t> out,
          std::size_t bit_offset) {
  std::size_t pos = bit_offset;
  for (Code c : codes) {
    for (int b = 0; b < bits; ++b, ++pos) {
      const auto bit = static_cast<std::uint8_t>((c >> b) & 1u);
      out[pos >> 3] = static_cast<std::uint8_t>((out[pos >> 3] & ~(1u << (pos & 7))) |
                                                (bit << (pos & 7)));
    }
  }
}

void unpack(std::span<const std::uint8_t> in, int bits, std::size_t bit_offset,
            std::span<Code> codes) {
  std::size_t pos = bit_offset;
  for (Code& c : codes) {
    unsigned v = 0;
    for (int b = 0; b < bits; ++b, ++pos) v |= ((in[pos >> 3] >> (pos & 7)) & 1u) << b;
    c = static_cast<Code>(v);
  }
}

}  // namespace bitpack

std::size_t block_count_for(std::size_t logical_len, int block_size) {
  const auto bs = static_cast<std::size_t>(block_size);
  return (logical_len + bs - 1) / bs;
}

std::vector<Code> PackedTensor::block_codes(std::size_t k) const {
  const auto bs = static_cast<std::size_t>(cfg.block_size);
  std::vector<Code> out(bs);
  bitpack::unpack(payload, cfg.element_bits, k * bs * static_cast<std::size_t>(cfg.element_bits),
                  out);
  return out;
}

std::size_t PackedTensor::block_length(std::size_t k) const {
  const auto bs = static_cast<std::size_t>(cfg.block_size);
  return std::min(bs, logical_len - k * bs);
}

int scale_bits_per_block(const QuantConfig& cfg) {
  return 8 + (cfg.nano_enabled ? 2 : 0) + (cfg.adaptive_enabled ? 1 : 0);
}

double footprint_bits_per_element(const QuantConfig& cfg) {
  return cfg.element_bits + static_cast<double>(scale_bits_per_block(cfg)) / cfg.block_size;
}

std::uint64_t footprint_bits(const PackedTensor& t) {
  const std::uint64_t per_block =
      static_cast<std::uint64_t>(t.cfg.element_bits) * t.cfg.block_size + scale_bits_per_block(t.cfg);
  return per_block * t.block_count();
}

namespace {

constexpr char kMagic[4] = {'N', 'X', 'T', '1'};

std::size_t sidecar_bits(const QuantConfig& cfg, std::size_t blocks) {
  return blocks * static_cast<std::size_t>(scale_bits_per_block(cfg) - 8);
}

std::size_t payload_bytes(const QuantConfig& cfg, std::size_t blocks) {
  const std::size_t bits = blocks * static_cast<std::size_t>(cfg.block_size) *
                           static_cast<std::size_t>(cfg.element_bits);
  return (bits + 7) / 8;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

template <class T>
T parse_int(const std::string& key, const std::string& s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(Errc::malformed_header, fmt::format("header field {}: bad integer '{}'", key, s));
  }
  return v;
}

bool parse_flag(const std::string& key, const std::string& s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw Error(Errc::malformed_header, fmt::format("header field {}: expected 0 or 1, got '{}'", key, s));
}

PackedTensor parse_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::malformed_header, "header line without '=': " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(Errc::malformed_header, fmt::format("header lacks {}", key));
    return it->second;
  };

  PackedTensor t;
  {
    std::istringstream dims(need("shape"));
    std::string d;
    while (std::getline(dims, d, ',')) t.shape.push_back(parse_int<std::size_t>("shape", d));
    if (t.shape.empty()) throw Error(Errc::malformed_header, "empty shape");
  }
  t.logical_len = parse_int<std::size_t>("logical_len", need("logical_len"));
  QuantConfig& c = t.cfg;
  c.block_size = parse_int<int>("block_size", need("block_size"));
  c.element_bits = parse_int<int>("element_bits", need("element_bits"));
  c.microexp_bits = parse_int<int>("microexp_bits", need("microexp_bits"));
  c.nano_enabled = parse_flag("nano", need("nano"));
  c.adaptive_enabled = parse_flag("adaptive", need("adaptive"));
  c.recycle_enabled = parse_flag("recycle", need("recycle"));
  try {
    c.recycle_rule = RecycleRule::parse(need("recycle_rule"));
    c.nano_search = parse_nano_search(need("nano_search"));
    validate(c);
  } catch (const Error& e) {
    if (e.code() == Errc::malformed_header) throw;
    throw Error(Errc::malformed_header, e.what());
  }
  if (t.logical_len == 0) throw Error(Errc::malformed_header, "zero-length tensor");
  std::size_t product = 1;
  for (std::size_t d : t.shape) product *= d;
  if (product != t.logical_len) {
    throw Error(Errc::length_mismatch,
                fmt::format("shape holds {} elements, logical_len is {}", product, t.logical_len));
  }
  return t;
}

}  // namespace

std::string header_text(const PackedTensor& t) {
  std::string shape;
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) shape += ',';
    shape += std::to_string(t.shape[i]);
  }
  const QuantConfig& c = t.cfg;
  return fmt::format(
      "shape={}\nlogical_len={}\nblock_size={}\nelement_bits={}\nmicroexp_bits={}\nnano={}\n"
      "adaptive={}\nrecycle={}\nrecycle_rule={}\nnano_search={}\n",
      shape, t.logical_len, c.block_size, c.element_bits, c.microexp_bits, int{c.nano_enabled},
      int{c.adaptive_enabled}, int{c.recycle_enabled}, c.recycle_rule.to_string(),
      to_string(c.nano_search));
}

std::size_t serialized_size(const PackedTensor& t) {
  const std::size_t blocks = t.block_count();
  return 12 + header_text(t).size() + blocks + (sidecar_bits(t.cfg, blocks) + 7) / 8 +
         payload_bytes(t.cfg, blocks);
}

std::vector<std::uint8_t> serialize(const PackedTensor& t) {
  if (t.logical_len == 0 || t.scales.empty()) {
    throw Error(Errc::invalid_argument, "cannot serialize an empty tensor");
  }
  if (t.scales.size() != block_count_for(t.logical_len, t.cfg.block_size) ||
      t.payload.size() != payload_bytes(t.cfg, t.scales.size())) {
    throw Error(Errc::length_mismatch, "packed tensor is inconsistent with its configuration");
  }
  const std::string header = header_text(t);
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(t));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());

  for (const BlockScale& s : t.scales) {
    out.push_back(s.is_zero_block() ? std::uint8_t{0xFF}
                                    : static_cast<std::uint8_t>(s.e_shared + 127));
  }
  std::vector<std::uint8_t> side((sidecar_bits(t.cfg, t.scales.size()) + 7) / 8, 0);
  std::size_t pos = 0;
  for (const BlockScale& s : t.scales) {
    if (t.cfg.nano_enabled) {
      const Code m = s.m_nano;
      bitpack::pack(std::span<const Code>(&m, 1), 2, side, pos);
      pos += 2;
    }
    if (t.cfg.adaptive_enabled) {
      const Code f = s.fmt;
      bitpack::pack(std::span<const Code>(&f, 1), 1, side, pos);
      pos += 1;
    }
  }
  out.insert(out.end(), side.begin(), side.end());
  out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

PackedTensor deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(Errc::truncated, "stream shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(Errc::bad_magic, "not an NXT1 stream");
  if (bytes.size() < 12) throw Error(Errc::truncated, "stream shorter than fixed header");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kContainerVersion) {
    throw Error(Errc::unsupported_version, fmt::format("unsupported version {}", version));
  }
  const std::uint32_t header_len = get_u32(bytes, 8);
  if (bytes.size() - 12 < header_len) throw Error(Errc::truncated, "header runs past end of stream");
  PackedTensor t = parse_header(
      std::string(reinterpret_cast<const char*>(bytes.data()) + 12, header_len));

  const std::size_t blocks = block_count_for(t.logical_len, t.cfg.block_size);
  const std::size_t side_bytes = (sidecar_bits(t.cfg, blocks) + 7) / 8;
  const std::size_t body = blocks + side_bytes + payload_bytes(t.cfg, blocks);
  const std::size_t have = bytes.size() - 12 - header_len;
  if (have < body) {
    throw Error(Errc::truncated, fmt::format("expected {} body bytes, found {}", body, have));
  }
  if (have > body) {
    throw Error(Errc::length_mismatch,
                fmt::format("expected {} body bytes, found {} (trailing data)", body, have));
  }

  std::size_t at = 12 + header_len;
  const auto side = bytes.subspan(at + blocks, side_bytes);
  std::size_t pos = 0;
  t.scales.resize(blocks);
  for (std::size_t k = 0; k < blocks; ++k) {
    BlockScale& s = t.scales[k];
    const std::uint8_t e = bytes[at + k];
    s.e_shared = e == 0xFF ? BlockScale::kZeroBlockExponent : static_cast<int>(e) - 127;
    s.m_nano = 0;
    s.fmt = t.cfg.default_fmt();
    Code v = 0;
    if (t.cfg.nano_enabled) {
      bitpack::unpack(side, 2, pos, std::span<Code>(&v, 1));
      s.m_nano = v;
      pos += 2;
    }
    if (t.cfg.adaptive_enabled) {
      bitpack::unpack(side, 1, pos, std::span<Code>(&v, 1));
      s.fmt = v;
      pos += 1;
    }
  }
  at += blocks + side_bytes;
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.end());
  return t;
}

void write_nxt(const std::filesystem::path& path, const PackedTensor& t) {
  const auto bytes = serialize(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io, "write failed: " + path.string());
}

PackedTensor read_nxt(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace nxfp
