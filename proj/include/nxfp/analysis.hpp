// SPDX-License-Identifier: Apache-2.0
//
// Error metrics, scaled-value profiling and parameter sweeps. Every sweep
// quantizes the same flattened tensor; aggregates use compensated summation in
// block order, so reports do not depend on the thread count.
#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nxfp/config.hpp"
#include "nxfp/container.hpp"
#include "nxfp/quant.hpp"

namespace nxfp {

struct ErrorStats {
  double mse = 0.0;
  double l1 = 0.0;
  double max_abs = 0.0;
  std::size_t elements = 0;
  std::size_t blocks = 0;
  std::size_t bfp_blocks = 0;  // blocks stored with fmt = 0

  double bfp_fraction() const {
    return blocks ? static_cast<double>(bfp_blocks) / static_cast<double>(blocks) : 0.0;
  }
};

// Element-count-weighted mean of the per-block figures.
ErrorStats aggregate(std::span<const BlockReport> reports);
// Recomputed from scratch: exact reconstruction of `t` against `original`.
ErrorStats measure_error(std::span<const float> original, const PackedTensor& t);

struct TechniqueResult {
  std::string label;
  QuantConfig cfg;
  double bits_per_element = 0.0;
  ErrorStats stats;
  double reduction = 0.0;  // relative MSE reduction vs the first row
  std::vector<BlockReport> blocks;
};

struct ErrorReport {
  std::vector<TechniqueResult> rows;

  // Throws Errc::invalid_argument for an unknown label.
  const TechniqueResult& at(const std::string& label) const;
};

struct LabeledConfig {
  std::string label;
  QuantConfig cfg;
};

// Quantizes `values` under every config; reductions are relative to configs[0].
ErrorReport error_report(std::span<const float> values, std::span<const LabeledConfig> configs);

// Rows: baseline (MxFP), NM, NM+AM, NM+AM+CR (NxFP), BFP.
ErrorReport ablation_sweep(std::span<const float> values, int element_bits, int block_size,
                           NanoSearch search = NanoSearch::as_algorithm1);

struct ScaledHistogram {
  std::vector<double> edges;          // bins + 1 entries
  std::vector<std::uint64_t> counts;  // bins entries
  std::vector<double> levels;         // signed levels of the profiled table
  double vacant_lo = 0.0;             // the two largest magnitude levels
  double vacant_hi = 0.0;
  double range = 0.0;                 // 2^(emax + 1)
  std::size_t total = 0;
  double outlier_gap_fraction = 0.0;  // |s| in (largest level, range)
  double vacant_gap_fraction = 0.0;   // |s| in (vacant_lo, vacant_hi)
};

// Divides each block by 2^(e_shared - emax) and histograms the result over
// [-range, range). The levels are those of the config's default format.
ScaledHistogram profile_scaled_distribution(std::span<const float> values,
                                            const QuantConfig& cfg, int bins = 64);

struct RecycleSweepRow {
  RecycleRule rule;
  double value = 0.0;  // signed recycled level, scaled space
  double mse = 0.0;
};

// Half the smallest level, then the midpoints between every higher pair of
// adjacent magnitude levels. (The midpoint between 0 and the smallest level is
// the half-smallest candidate itself.)
std::vector<RecycleRule> default_recycle_candidates(const QuantConfig& cfg);

// Sorted by MSE, ties in candidate order. Requires cfg.recycle_enabled.
std::vector<RecycleSweepRow> recycled_value_sweep(std::span<const float> values,
                                                  const QuantConfig& cfg,
                                                  std::span<const RecycleRule> candidates);

struct BlockSizeRow {
  int block_size = 0;
  std::string format;
  double bits_per_element = 0.0;
  double mse = 0.0;
};

inline constexpr int kDefaultBlockSizes[] = {8, 16, 32, 64, 128};

// MxFP, BFP and NxFP at every size.
std::vector<BlockSizeRow> block_size_sweep(std::span<const float> values, int element_bits,
                                           std::span<const int> sizes = kDefaultBlockSizes);

struct MicroexpRow {
  int microexp_bits = 0;
  std::string element_format;
  double mse = 0.0;
};

// Every microexponent width in [0, B - 2] on top of `base` (features kept).
std::vector<MicroexpRow> microexp_config_sweep(std::span<const float> values,
                                               const QuantConfig& base);

// CSV with a header row and 9 significant digits.
void write_csv(std::ostream& os, const ErrorReport& r);
void write_csv(std::ostream& os, const ScaledHistogram& h);
void write_csv(std::ostream& os, std::span<const RecycleSweepRow> rows);
void write_csv(std::ostream& os, std::span<const BlockSizeRow> rows);
void write_csv(std::ostream& os, std::span<const MicroexpRow> rows);

}  // namespace nxfp
