// SPDX-License-Identifier: Apache-2.0
#include "nxfp/config.hpp"

#include <fmt/format.h>

#include "nxfp/error.hpp"

namespace nxfp {

void validate(const QuantConfig& cfg) {
  if (cfg.block_size < 2) {
    throw Error(Errc::invalid_argument, fmt::format("block size {} < 2", cfg.block_size));
  }
  if (cfg.element_bits < 3 || cfg.element_bits > 8) {
    throw Error(Errc::invalid_argument,
                fmt::format("element bits {} outside [3, 8]", cfg.element_bits));
  }
  if (cfg.microexp_bits < 0 || cfg.microexp_bits > cfg.element_bits - 2) {
    throw Error(Errc::invalid_argument,
                fmt::format("microexponent bits {} outside [0, {}]", cfg.microexp_bits,
                            cfg.element_bits - 2));
  }
}

const char* to_string(NanoSearch s) {
  return s == NanoSearch::exhaustive4 ? "exhaustive" : "alg1";
}

NanoSearch parse_nano_search(const std::string& s) {
  if (s == "alg1") return NanoSearch::as_algorithm1;
  if (s == "exhaustive") return NanoSearch::exhaustive4;
  throw Error(Errc::invalid_argument, "unknown nano search mode: " + s);
}

TablePair::TablePair(const QuantConfig& cfg) {
  validate(cfg);
  mx_ = build_level_table(cfg.mx_format(), cfg.recycle_enabled, cfg.recycle_rule);
  bfp_ = build_level_table(cfg.bfp_format(), cfg.recycle_enabled, cfg.recycle_rule, mx_.emax());
}

}  // namespace nxfp
