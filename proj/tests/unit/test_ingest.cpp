// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "nxfp/error.hpp"
#include "nxfp/ingest.hpp"

using namespace nxfp;

namespace {

using Bytes = std::vector<std::uint8_t>;

template <class F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::io;
}

Bytes npy_with_header(int major, const std::string& dict, const Bytes& payload) {
  Bytes out = {0x93, 'N', 'U', 'M', 'P', 'Y', static_cast<std::uint8_t>(major), 0};
  const std::size_t pre = major == 1 ? 10 : 12;
  std::string h = dict;
  while ((pre + h.size() + 1) % 64 != 0) h += ' ';
  h += '\n';
  const std::size_t n = major == 1 ? 2 : 4;
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(h.size() >> (8 * i)));
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bytes f32_bytes(const std::vector<float>& v) {
  Bytes b(v.size() * 4);
  std::memcpy(b.data(), v.data(), b.size());
  return b;
}

Bytes safetensors(const std::string& header, const Bytes& data) {
  Bytes out;
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(header.size()) >> (8 * i)));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

}  // namespace

TEST_CASE("npy round trip") {
  const std::size_t shape[] = {2, 3};
  const std::vector<float> v = {1, -2, 0.5f, 3.25f, -0.0f, 1e-3f};
  const Tensor t = load_npy(encode_npy(shape, v));
  CHECK(t.shape == std::vector<std::size_t>{2, 3});
  CHECK(t.values == v);
  const auto enc = encode_npy(shape, v);
  CHECK((enc.size() - f32_bytes(v).size()) % 64 == 0);

  const Tensor h = load_npy(encode_npy(shape, v, DType::binary16));
  CHECK(h.values[0] == 1.0f);
  CHECK(h.values[3] == 3.25f);
  CHECK(h.values[5] == doctest::Approx(1e-3).epsilon(1e-3));
  CHECK_THROWS_AS(encode_npy(shape, std::vector<float>(5)), Error);
}

TEST_CASE("npy header versions and errors") {
  const Bytes payload = f32_bytes({1, 2, 3, 4});
  const std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }";
  for (int major : {1, 2, 3}) {
    const Tensor t = load_npy(npy_with_header(major, dict, payload));
    CHECK(t.values == std::vector<float>{1, 2, 3, 4});
  }
  CHECK(load_npy(npy_with_header(1, "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }", payload))
            .shape == std::vector<std::size_t>{2, 2});

  auto bad = npy_with_header(1, dict, payload);
  bad[1] = 'X';
  CHECK(error_of([&] { load_npy(bad); }) == Errc::bad_magic);
  CHECK(error_of([&] { load_npy(npy_with_header(4, dict, payload)); }) == Errc::unsupported_version);
  CHECK(error_of([&] {
          load_npy(npy_with_header(1, "{'descr': '<f8', 'fortran_order': False, 'shape': (4,), }", payload));
        }) == Errc::dtype_mismatch);
  CHECK(error_of([&] {
          load_npy(npy_with_header(1, "{'descr': '<f4', 'fortran_order': True, 'shape': (4,), }", payload));
        }) == Errc::malformed_header);
  CHECK(error_of([&] {
          load_npy(npy_with_header(1, "{'descr': '<f4', 'fortran_order': False, 'shape': (5,), }", payload));
        }) == Errc::truncated);
  CHECK(error_of([&] {
          load_npy(npy_with_header(1, "{'descr': '<f4', 'fortran_order': False, 'shape': (3,), }", payload));
        }) == Errc::length_mismatch);
  CHECK(error_of([&] { load_npy(Bytes(5, 0)); }) == Errc::bad_magic);
  const auto good = npy_with_header(1, dict, payload);
  CHECK(error_of([&] { load_npy(std::span(good).first(8)); }) == Errc::truncated);
  CHECK(error_of([&] { load_npy(std::span(good).first(40)); }) == Errc::truncated);
}

TEST_CASE("safetensors selects tensors by name") {
  const Bytes data = [] {
    Bytes d = f32_bytes({1, 2, 3, 4, 5, 6});
    d.push_back(0x00);  // binary16 1.0
    d.push_back(0x3C);
    d.push_back(0x80);  // bfloat16 1.0
    d.push_back(0x3F);
    return d;
  }();
  const std::string header =
      R"({"__metadata__":{"k":"v"},"w":{"dtype":"F32","shape":[2,3],"data_offsets":[0,24]},)"
      R"("h":{"dtype":"F16","shape":[1],"data_offsets":[24,26]},)"
      R"("b":{"dtype":"BF16","shape":[1],"data_offsets":[26,28]}})";
  const Bytes file = safetensors(header, data);
  const Tensor w = load_safetensors(file, "w");
  CHECK(w.shape == std::vector<std::size_t>{2, 3});
  CHECK(w.values == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(load_safetensors(file, "h").values == std::vector<float>{1.0f});
  CHECK(load_safetensors(file, "b").values == std::vector<float>{1.0f});
  CHECK(error_of([&] { load_safetensors(file, "missing"); }) == Errc::unknown_tensor);
  CHECK(error_of([&] { load_safetensors(file, ""); }) == Errc::unknown_tensor);

  const std::string one = R"({"w":{"dtype":"F32","shape":[2,3],"data_offsets":[0,24]}})";
  CHECK(load_safetensors(safetensors(one, f32_bytes({1, 2, 3, 4, 5, 6})), "").values.size() == 6);
  CHECK(error_of([&] { load_safetensors(safetensors(one, f32_bytes({1, 2, 3})), "w"); }) == Errc::truncated);
  CHECK(error_of([&] {
          load_safetensors(safetensors(R"({"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,24]}})",
                                       f32_bytes({1, 2, 3, 4, 5, 6})),
                           "w");
        }) == Errc::length_mismatch);
  CHECK(error_of([&] {
          load_safetensors(safetensors(R"({"w":{"dtype":"I8","shape":[6],"data_offsets":[0,6]}})", Bytes(6)), "w");
        }) == Errc::dtype_mismatch);
  CHECK(error_of([&] { load_safetensors(safetensors("{not json", Bytes{}), "w"); }) == Errc::malformed_header);
}

TEST_CASE("raw buffers") {
  const std::size_t one[] = {1};
  CHECK(load_raw(Bytes{0x00, 0x3C}, DType::binary16, one).values == std::vector<float>{1.0f});
  CHECK(load_raw(Bytes{0x80, 0x3F}, DType::bfloat16, one).values == std::vector<float>{1.0f});
  CHECK(load_raw(Bytes{0x00, 0xC0}, DType::binary16, one).values == std::vector<float>{-2.0f});
  const std::size_t two[] = {2};
  CHECK(error_of([&] { load_raw(Bytes{0x00, 0x3C}, DType::binary16, two); }) == Errc::truncated);
  CHECK(error_of([&] { load_raw(Bytes{0, 0, 0}, DType::binary16, one); }) == Errc::length_mismatch);
  CHECK(parse_dtype("f16") == DType::binary16);
  CHECK(parse_dtype("bf16") == DType::bfloat16);
  CHECK(parse_dtype("f32") == DType::binary32);
  CHECK_THROWS_AS(parse_dtype("f64"), Error);
}

TEST_CASE("files and sources") {
  const auto dir = std::filesystem::temp_directory_path() / "nxfp_ingest_test";
  std::filesystem::create_directories(dir);
  const std::size_t shape[] = {4};
  write_npy(dir / "a.npy", shape, std::vector<float>{1, 2, 3, 4});
  const auto src = TensorSource::from_path(dir / "a.npy");
  CHECK(src.kind == TensorSource::Kind::npy);
  CHECK(load_tensor(src).values == std::vector<float>{1, 2, 3, 4});
  CHECK(TensorSource::from_path("x.safetensors").kind == TensorSource::Kind::safetensors);
  CHECK(TensorSource::from_path("x.bin").kind == TensorSource::Kind::raw);

  TensorSource missing = TensorSource::from_path(dir / "missing.npy");
  CHECK(error_of([&] { load_tensor(missing); }) == Errc::io);

  TensorSource raw = TensorSource::from_path(dir / "a.npy");
  raw.kind = TensorSource::Kind::raw;
  CHECK(error_of([&] { load_tensor(raw); }) == Errc::invalid_argument);  // dtype and shape missing
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic weights") {
  for (SynthModel m : {SynthModel::gaussian, SynthModel::outlier_injected, SynthModel::clustered_scattered_pairs}) {
    CAPTURE(to_string(m));
    const auto a = synth_weights(m, 1000, 3);
    CHECK(a == synth_weights(m, 1000, 3));
    CHECK(a != synth_weights(m, 1000, 4));
    CHECK(std::all_of(a.begin(), a.end(), [](float x) { return std::isfinite(x); }));
    CHECK(parse_synth_model(to_string(m)) == m);
  }
  CHECK(synth_weights(SynthModel::gaussian, 1, 0).size() == 1);
  CHECK_THROWS_AS(synth_weights(SynthModel::gaussian, 0, 0), Error);

  const auto g = synth_weights(SynthModel::gaussian, 200000, 11);
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
  double var = 0;
  for (float x : g) var += (x - mean) * (x - mean);
  var /= g.size();
  CHECK(std::fabs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));

  // Outlier groups: the largest magnitude is 1.9x the second largest.
  const auto o = synth_weights(SynthModel::outlier_injected, 320, 5);
  for (std::size_t g0 = 0; g0 < 320; g0 += 32) {
    std::vector<float> m;
    for (std::size_t i = g0; i < g0 + 32; ++i) m.push_back(std::fabs(o[i]));
    std::sort(m.rbegin(), m.rend());
    CHECK(m[0] == doctest::Approx(1.9 * m[1]).epsilon(1e-6));
  }

  // Pairs: clustered groups stay within [0.5, 1) of their amplitude.
  const auto p = synth_weights(SynthModel::clustered_scattered_pairs, 64 * 50, 9);
  for (std::size_t g0 = 0; g0 < p.size(); g0 += 64) {
    float lo = INFINITY, hi = 0;
    for (std::size_t i = g0; i < g0 + 32; ++i) {
      lo = std::min(lo, std::fabs(p[i]));
      hi = std::max(hi, std::fabs(p[i]));
    }
    CHECK(hi < 2 * lo);
  }
}
