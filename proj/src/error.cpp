// SPDX-License-Identifier: Apache-2.0
#include "nxfp/error.hpp"

namespace nxfp {

const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::non_finite: return "non-finite input";
    case Errc::bad_magic: return "bad magic";
    case Errc::unsupported_version: return "unsupported version";
    case Errc::truncated: return "truncated stream";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::malformed_header: return "malformed header";
    case Errc::dtype_mismatch: return "dtype mismatch";
    case Errc::unknown_tensor: return "unknown tensor";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace nxfp
