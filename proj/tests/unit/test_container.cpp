// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "nxfp/container.hpp"
#include "nxfp/error.hpp"
#include "nxfp/format_spec.hpp"
#include "nxfp/ingest.hpp"
#include "nxfp/quant.hpp"

using namespace nxfp;

namespace {

Errc error_of(std::span<const std::uint8_t> bytes) {
  try {
    deserialize(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::io;
}

PackedTensor sample(const char* spec, std::size_t n, std::uint64_t seed = 1) {
  return quantize_tensor(synth_weights(SynthModel::gaussian, n, seed), parse_format_spec(spec));
}

}  // namespace

TEST_CASE("footprint") {
  CHECK(footprint_bits_per_element(parse_format_spec("mxfp4")) == 4.25);
  CHECK(footprint_bits_per_element(parse_format_spec("nxfp4")) == 4.34375);
  CHECK(footprint_bits_per_element(parse_format_spec("bfp4")) == 4.25);
  CHECK(footprint_bits_per_element(parse_format_spec("nxfp5")) / footprint_bits_per_element(parse_format_spec("mxfp6")) ==
        doctest::Approx(0.855).epsilon(1e-12));
  double prev = 1e9;
  for (int bs : {8, 16, 32, 64, 128, 1024}) {
    QuantConfig c = parse_format_spec("nxfp4");
    c.block_size = bs;
    const double f = footprint_bits_per_element(c);
    CHECK(f < prev);
    CHECK(f > 4.0);
    prev = f;
  }
}

TEST_CASE("serialize round trip and layout") {
  for (const char* spec : {"mxfp4", "nxfp4", "bfp4", "nxfp5", "mxfp6-e3m2", "nxfp8", "nxfp3", "bfp7"}) {
    for (std::size_t n : {1u, 5u, 32u, 33u, 100u, 1000u}) {
      CAPTURE(spec);
      CAPTURE(n);
      const auto t = sample(spec, n, n);
      const auto bytes = serialize(t);
      CHECK(bytes.size() == serialized_size(t));
      const std::size_t blocks = (n + 31) / 32;
      const std::size_t scale_bits = blocks * static_cast<std::size_t>(scale_bits_per_block(t.cfg));
      const std::size_t payload_bits = blocks * 32 * static_cast<std::size_t>(t.cfg.element_bits);
      CHECK(footprint_bits(t) == scale_bits + payload_bits);
      CHECK(bytes.size() == 12 + header_text(t).size() + (scale_bits + 7) / 8 + (payload_bits + 7) / 8);
      const auto back = deserialize(bytes);
      CHECK(back == t);
      CHECK(serialize(back) == bytes);
      for (std::size_t k = 0; k < t.block_count(); ++k) CHECK(back.block_codes(k) == t.block_codes(k));
    }
  }
}

TEST_CASE("byte layout of a small tensor") {
  // Two blocks of 2 elements, NanoMantissa and adaptive bits on.
  PackedTensor t;
  t.shape = {3};
  t.logical_len = 3;
  t.cfg = parse_format_spec("nxfp4");
  t.cfg.block_size = 2;
  t.scales = {BlockScale{2, 1, 1}, BlockScale{BlockScale::kZeroBlockExponent, 0, 1}};
  const std::vector<Code> codes = {0xF, 0x3, 0x0, 0x0};
  t.payload.assign(2, 0);
  bitpack::pack(codes, 4, t.payload);
  CHECK(t.payload == std::vector<std::uint8_t>{0x3F, 0x00});

  const auto bytes = serialize(t);
  const std::string header = header_text(t);
  CHECK(header ==
        "shape=3\nlogical_len=3\nblock_size=2\nelement_bits=4\nmicroexp_bits=2\nnano=1\n"
        "adaptive=1\nrecycle=1\nrecycle_rule=half-smallest\nnano_search=alg1\n");
  REQUIRE(bytes.size() == 12 + header.size() + 2 + 1 + 2);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NXT1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == header.size());
  const std::size_t at = 12 + header.size();
  CHECK(bytes[at] == 129);
  CHECK(bytes[at + 1] == 0xFF);
  // m=1 (bits 0-1), fmt=1 (bit 2), m=0 (bits 3-4), fmt=1 (bit 5).
  CHECK(bytes[at + 2] == 0b100101);
  CHECK(bytes[at + 3] == 0x3F);
  CHECK(deserialize(bytes) == t);
}

TEST_CASE("bit packing") {
  std::mt19937_64 rng(3);
  for (int bits = 1; bits <= 8; ++bits) {
    std::vector<Code> codes(77);
    for (auto& c : codes) c = static_cast<Code>(rng() & ((1u << bits) - 1));
    std::vector<std::uint8_t> buf((77 * bits + 3 + 7) / 8, 0);
    bitpack::pack(codes, bits, buf, 3);
    std::vector<Code> back(77);
    bitpack::unpack(buf, bits, 3, back);
    CHECK(back == codes);
    // LSB-first: bit i of the stream is bit (i % 8) of byte i / 8.
    for (std::size_t i = 0; i < 77; ++i) {
      for (int b = 0; b < bits; ++b) {
        const std::size_t pos = 3 + i * bits + b;
        CHECK(((buf[pos / 8] >> (pos % 8)) & 1) == ((codes[i] >> b) & 1));
      }
    }
  }
}

TEST_CASE("distinct deserialization errors") {
  const auto t = sample("nxfp4", 70);
  const auto good = serialize(t);
  const std::size_t hlen = header_text(t).size();

  auto bad = good;
  bad[0] = 'X';
  CHECK(error_of(bad) == Errc::bad_magic);

  bad = good;
  bad[4] = 2;
  CHECK(error_of(bad) == Errc::unsupported_version);

  CHECK(error_of(std::span(good).first(3)) == Errc::truncated);
  CHECK(error_of(std::span(good).first(10)) == Errc::truncated);
  CHECK(error_of(std::span(good).first(12 + hlen / 2)) == Errc::truncated);
  CHECK(error_of(std::span(good).first(good.size() - 1)) == Errc::truncated);

  bad = good;
  bad.push_back(0);
  CHECK(error_of(bad) == Errc::length_mismatch);

  auto with_header = [&](std::string h) {
    std::vector<std::uint8_t> out(good.begin(), good.begin() + 4);
    out.insert(out.end(), good.begin() + 4, good.begin() + 8);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(h.size() >> (8 * i)));
    out.insert(out.end(), h.begin(), h.end());
    out.insert(out.end(), good.begin() + 12 + static_cast<std::ptrdiff_t>(hlen), good.end());
    return out;
  };
  std::string h = header_text(t);
  CHECK(deserialize(with_header(h)) == t);

  auto replace = [&](const std::string& from, const std::string& to) {
    std::string s = h;
    s.replace(s.find(from), from.size(), to);
    return with_header(s);
  };
  CHECK(error_of(replace("nano=1", "nano=2")) == Errc::malformed_header);
  CHECK(error_of(replace("block_size=32", "block_size=x")) == Errc::malformed_header);
  CHECK(error_of(replace("block_size=32", "block_size=1")) == Errc::malformed_header);
  CHECK(error_of(replace("element_bits=4", "element_bits=9")) == Errc::malformed_header);
  CHECK(error_of(replace("recycle_rule=half-smallest", "recycle_rule=bogus")) == Errc::malformed_header);
  CHECK(error_of(replace("nano_search=alg1\n", "")) == Errc::malformed_header);
  CHECK(error_of(replace("shape=70", "shape=71")) == Errc::length_mismatch);
  CHECK(error_of(replace("logical_len=70", "logical_len=69")) == Errc::length_mismatch);
  CHECK(error_of(replace("shape=70\n", "shape\n")) == Errc::malformed_header);
  // Header says 5 elements: the body is then too long.
  CHECK(error_of(replace("shape=70\nlogical_len=70", "shape=5\nlogical_len=5")) ==
        Errc::length_mismatch);
}

TEST_CASE("empty tensors are rejected") {
  PackedTensor t;
  t.cfg = parse_format_spec("mxfp4");
  CHECK_THROWS_AS(serialize(t), Error);

  const auto one = sample("mxfp4", 4);
  const auto bytes = serialize(one);
  std::string h = header_text(one);
  h.replace(h.find("shape=4\nlogical_len=4"), 22, "shape=0\nlogical_len=0");
  std::vector<std::uint8_t> zero(bytes.begin(), bytes.begin() + 8);
  for (int i = 0; i < 4; ++i) zero.push_back(static_cast<std::uint8_t>(h.size() >> (8 * i)));
  zero.insert(zero.end(), h.begin(), h.end());
  CHECK(error_of(zero) == Errc::malformed_header);
}

TEST_CASE("files") {
  const auto dir = std::filesystem::temp_directory_path() / "nxfp_container_test";
  std::filesystem::create_directories(dir);
  const auto t = sample("nxfp6", 300);
  write_nxt(dir / "a.nxt", t);
  CHECK(std::filesystem::file_size(dir / "a.nxt") == serialized_size(t));
  CHECK(read_nxt(dir / "a.nxt") == t);
  try {
    read_nxt(dir / "missing.nxt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::io);
  }
  std::filesystem::remove_all(dir);
}
