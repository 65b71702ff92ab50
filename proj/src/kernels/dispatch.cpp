// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string_view>

#include "nxfp/error.hpp"
#include "nxfp/kernels.hpp"

namespace nxfp::kernels {

namespace {

constexpr KernelTable kScalar{&scalar::nearest_index, &scalar::scale_lookup, &scalar::gemm_f32};
#if defined(NXFP_HAVE_AVX2)
constexpr KernelTable kAvx2{&avx2::nearest_index, &avx2::scale_lookup, &avx2::gemm_f32};
#endif

Isa detect() {
  if (const char* env = std::getenv("NXFP_KERNELS")) {
    const std::string_view want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(NXFP_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
#if defined(NXFP_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

const KernelTable& active() { return table_for(current().load(std::memory_order_relaxed)); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error(Errc::invalid_argument, std::string("kernel ISA not supported: ") + to_string(isa));
  }
  current().store(isa, std::memory_order_relaxed);
}

}  // namespace nxfp::kernels
