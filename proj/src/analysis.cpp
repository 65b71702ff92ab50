// SPDX-License-Identifier: Apache-2.0
#include "nxfp/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "nxfp/error.hpp"
#include "nxfp/format_spec.hpp"
#include "nxfp/numeric.hpp"

namespace nxfp {

ErrorStats aggregate(std::span<const BlockReport> reports) {
  ErrorStats s;
  CompensatedSum sq;
  CompensatedSum abs;
  for (const BlockReport& r : reports) {
    const auto n = static_cast<double>(r.count);
    sq.add(r.mse * n);
    abs.add(r.l1 * n);
    s.max_abs = std::max(s.max_abs, r.max_abs);
    s.elements += r.count;
    ++s.blocks;
    if (r.fmt == 0) ++s.bfp_blocks;
  }
  if (s.elements) {
    s.mse = sq.value() / static_cast<double>(s.elements);
    s.l1 = abs.value() / static_cast<double>(s.elements);
  }
  return s;
}

ErrorStats measure_error(std::span<const float> original, const PackedTensor& t) {
  if (original.size() != t.logical_len) {
    throw Error(Errc::length_mismatch,
                fmt::format("original has {} values, packed tensor {}", original.size(),
                            t.logical_len));
  }
  const TablePair tables(t.cfg);
  const auto bs = static_cast<std::size_t>(t.cfg.block_size);
  ErrorStats s;
  CompensatedSum sq;
  CompensatedSum abs;
  for (std::size_t k = 0; k < t.block_count(); ++k) {
    const auto codes = t.block_codes(k);
    const auto rec = reconstruct(t.scales[k], codes, tables);
    for (std::size_t i = 0; i < t.block_length(k); ++i) {
      const double err = static_cast<double>(original[k * bs + i]) - rec[i];
      sq.add(err * err);
      abs.add(std::fabs(err));
      s.max_abs = std::max(s.max_abs, std::fabs(err));
    }
    ++s.blocks;
    if (t.scales[k].fmt == 0) ++s.bfp_blocks;
  }
  s.elements = t.logical_len;
  s.mse = sq.value() / static_cast<double>(s.elements);
  s.l1 = abs.value() / static_cast<double>(s.elements);
  return s;
}

const TechniqueResult& ErrorReport::at(const std::string& label) const {
  for (const auto& r : rows) {
    if (r.label == label) return r;
  }
  throw Error(Errc::invalid_argument, "no report row '" + label + "'");
}

namespace {

QuantizeResult quantize_flat(std::span<const float> values, const QuantConfig& cfg) {
  const std::size_t n = values.size();
  return quantize_tensor_with_report(values, std::span<const std::size_t>(&n, 1), cfg);
}

double mse_of(std::span<const float> values, const QuantConfig& cfg) {
  return aggregate(quantize_flat(values, cfg).reports).mse;
}

}  // namespace

ErrorReport error_report(std::span<const float> values, std::span<const LabeledConfig> configs) {
  if (configs.empty()) throw Error(Errc::invalid_argument, "no configurations to report");
  ErrorReport report;
  for (const auto& [label, cfg] : configs) {
    auto q = quantize_flat(values, cfg);
    TechniqueResult row;
    row.label = label;
    row.cfg = cfg;
    row.bits_per_element = footprint_bits_per_element(cfg);
    row.stats = aggregate(q.reports);
    row.blocks = std::move(q.reports);
    report.rows.push_back(std::move(row));
  }
  const double base = report.rows.front().stats.mse;
  for (auto& row : report.rows) {
    row.reduction = base > 0.0 ? (base - row.stats.mse) / base : 0.0;
  }
  return report;
}

ErrorReport ablation_sweep(std::span<const float> values, int element_bits, int block_size,
                           NanoSearch search) {
  QuantConfig mx;
  mx.element_bits = element_bits;
  mx.microexp_bits = default_microexp_bits(element_bits);
  mx.block_size = block_size;
  mx.nano_search = search;

  QuantConfig nm = mx;
  nm.nano_enabled = true;
  QuantConfig am = nm;
  am.adaptive_enabled = true;
  QuantConfig cr = am;
  cr.recycle_enabled = true;
  QuantConfig bfp = mx;
  bfp.microexp_bits = 0;

  const LabeledConfig configs[] = {
      {"baseline", mx}, {"NM", nm}, {"NM+AM", am}, {"NM+AM+CR", cr}, {"BFP", bfp}};
  return error_report(values, configs);
}

ScaledHistogram profile_scaled_distribution(std::span<const float> values,
                                            const QuantConfig& cfg, int bins) {
  validate(cfg);
  if (bins < 1) throw Error(Errc::invalid_argument, "histogram needs at least one bin");
  for (float v : values) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "profiled tensor is not finite");
  }
  const TablePair tables(cfg);
  const LevelTable& table = tables.for_fmt(cfg.default_fmt());
  const int emax = tables.emax();

  ScaledHistogram h;
  h.range = std::ldexp(1.0, emax + 1);
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = -h.range + 2.0 * h.range * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  h.levels.assign(table.sorted_values().begin(), table.sorted_values().end());
  const auto mags = table.magnitudes();
  h.vacant_hi = mags[mags.size() - 1];
  h.vacant_lo = mags.size() > 1 ? mags[mags.size() - 2] : 0.0;

  const auto bs = static_cast<std::size_t>(cfg.block_size);
  std::size_t outliers = 0;
  std::size_t vacant = 0;
  for (std::size_t lo = 0; lo < values.size(); lo += bs) {
    const auto block = values.subspan(lo, std::min(bs, values.size() - lo));
    const auto e = shared_exponent(block);
    const int shift = e ? emax - std::clamp(*e, BlockScale::kMinExponent,
                                            BlockScale::kMaxExponent)
                        : 0;
    for (float v : block) {
      const double s = std::ldexp(static_cast<double>(v), shift);
      const double a = std::fabs(s);
      const auto bin = static_cast<std::ptrdiff_t>(std::floor((s + h.range) / (2.0 * h.range) * bins));
      ++h.counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(bin, 0, bins - 1))];
      if (a > h.vacant_hi && a < h.range) ++outliers;
      if (a > h.vacant_lo && a < h.vacant_hi) ++vacant;
    }
  }
  h.total = values.size();
  if (h.total) {
    h.outlier_gap_fraction = static_cast<double>(outliers) / static_cast<double>(h.total);
    h.vacant_gap_fraction = static_cast<double>(vacant) / static_cast<double>(h.total);
  }
  return h;
}

std::vector<RecycleRule> default_recycle_candidates(const QuantConfig& cfg) {
  const TablePair tables(cfg);
  const auto mags = tables.for_fmt(cfg.default_fmt()).magnitudes();
  std::vector<RecycleRule> out{RecycleRule::half_smallest()};
  for (int k = 1; k + 1 < static_cast<int>(mags.size()); ++k) out.push_back(RecycleRule::midpoint(k));
  return out;
}

std::vector<RecycleSweepRow> recycled_value_sweep(std::span<const float> values,
                                                  const QuantConfig& cfg,
                                                  std::span<const RecycleRule> candidates) {
  if (!cfg.recycle_enabled) {
    throw Error(Errc::invalid_argument, "recycled-value sweep needs code recycling enabled");
  }
  if (candidates.empty()) throw Error(Errc::invalid_argument, "no recycle candidates");
  std::vector<RecycleSweepRow> rows;
  for (const RecycleRule& rule : candidates) {
    QuantConfig c = cfg;
    c.recycle_rule = rule;
    const TablePair tables(c);
    RecycleSweepRow row;
    row.rule = rule;
    row.value = resolve_recycled_value(tables.for_fmt(c.default_fmt()).magnitudes(), rule);
    row.mse = mse_of(values, c);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RecycleSweepRow& a, const RecycleSweepRow& b) { return a.mse < b.mse; });
  return rows;
}

std::vector<BlockSizeRow> block_size_sweep(std::span<const float> values, int element_bits,
                                           std::span<const int> sizes) {
  if (sizes.empty()) throw Error(Errc::invalid_argument, "no block sizes to sweep");
  std::vector<BlockSizeRow> rows;
  for (int bs : sizes) {
    QuantConfig mx;
    mx.element_bits = element_bits;
    mx.microexp_bits = default_microexp_bits(element_bits);
    mx.block_size = bs;
    QuantConfig bfp = mx;
    bfp.microexp_bits = 0;
    QuantConfig nx = mx;
    nx.nano_enabled = nx.adaptive_enabled = nx.recycle_enabled = true;
    for (const auto& [name, cfg] : {std::pair<const char*, QuantConfig>{"mxfp", mx},
                                    {"bfp", bfp},
                                    {"nxfp", nx}}) {
      rows.push_back({bs, fmt::format("{}{}", name, element_bits),
                      footprint_bits_per_element(cfg), mse_of(values, cfg)});
    }
  }
  return rows;
}

std::vector<MicroexpRow> microexp_config_sweep(std::span<const float> values,
                                               const QuantConfig& base) {
  validate(base);
  std::vector<MicroexpRow> rows;
  for (int eb = 0; eb <= base.element_bits - 2; ++eb) {
    QuantConfig c = base;
    c.microexp_bits = eb;
    rows.push_back({eb, c.mx_format().name(), mse_of(values, c)});
  }
  return rows;
}

void write_csv(std::ostream& os, const ErrorReport& r) {
  os << "technique,element_bits,microexp_bits,block_size,nano,adaptive,recycle,"
        "bits_per_element,mse,l1,max_abs,bfp_fraction,reduction\n";
  for (const auto& row : r.rows) {
    const QuantConfig& c = row.cfg;
    fmt::print(os, "{},{},{},{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", row.label,
               c.element_bits, c.microexp_bits, c.block_size, int{c.nano_enabled},
               int{c.adaptive_enabled}, int{c.recycle_enabled}, row.bits_per_element,
               row.stats.mse, row.stats.l1, row.stats.max_abs, row.stats.bfp_fraction(),
               row.reduction);
  }
}

void write_csv(std::ostream& os, const ScaledHistogram& h) {
  os << "bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    fmt::print(os, "{:.9g},{:.9g},{}\n", h.edges[i], h.edges[i + 1], h.counts[i]);
  }
}

void write_csv(std::ostream& os, std::span<const RecycleSweepRow> rows) {
  os << "rule,value,mse\n";
  for (const auto& r : rows) fmt::print(os, "{},{:.9g},{:.9g}\n", r.rule.to_string(), r.value, r.mse);
}

void write_csv(std::ostream& os, std::span<const BlockSizeRow> rows) {
  os << "block_size,format,bits_per_element,mse\n";
  for (const auto& r : rows) {
    fmt::print(os, "{},{},{:.9g},{:.9g}\n", r.block_size, r.format, r.bits_per_element, r.mse);
  }
}

void write_csv(std::ostream& os, std::span<const MicroexpRow> rows) {
  os << "microexp_bits,element_format,mse\n";
  for (const auto& r : rows) fmt::print(os, "{},{},{:.9g}\n", r.microexp_bits, r.element_format, r.mse);
}

}  // namespace nxfp
