// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nxfp {

enum class Errc {
  invalid_argument,
  non_finite,
  bad_magic,
  unsupported_version,
  truncated,
  length_mismatch,
  malformed_header,
  dtype_mismatch,
  unknown_tensor,
  shape_mismatch,
  io,
};

const char* errc_name(Errc c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace nxfp
