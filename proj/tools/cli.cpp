// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "nxfp/analysis.hpp"
#include "nxfp/container.hpp"
#include "nxfp/dequant.hpp"
#include "nxfp/error.hpp"
#include "nxfp/format_spec.hpp"
#include "nxfp/ingest.hpp"
#include "nxfp/quant.hpp"

namespace nxfp::cli {

namespace {

// Raised for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputOptions {
  std::string in;
  std::string synth;
  std::optional<std::uint64_t> seed;
  std::size_t n = 4096;
  std::string tensor_name;
  std::string dtype;
  std::string shape;
};

struct FormatOptions {
  std::string format = "nxfp4";
  std::optional<int> block_size;
  bool no_nano = false;
  bool no_adaptive = false;
  bool no_recycle = false;
  std::string recycle_rule;
  std::string nano_search;
};

void add_input(CLI::App* app, InputOptions& o) {
  app->add_option("--in", o.in, "Input tensor (.npy, .safetensors or raw)");
  app->add_option("--synth", o.synth, "Synthetic input model")
      ->check(CLI::IsMember({"gaussian", "outliers", "pairs"}));
  app->add_option("--seed", o.seed, "Seed for synthetic input");
  app->add_option("--n", o.n, "Synthetic element count")->check(CLI::PositiveNumber);
  app->add_option("--tensor-name", o.tensor_name, "Tensor inside a safetensors file");
  app->add_option("--dtype", o.dtype, "Raw input dtype")->check(CLI::IsMember({"f16", "bf16", "f32"}));
  app->add_option("--shape", o.shape, "Tensor shape, e.g. 64x128");
}

void add_format(CLI::App* app, FormatOptions& o, bool list) {
  app->add_option("--format", o.format,
                  list ? "Comma-separated format specs" : "Format spec, e.g. nxfp4, mxfp6-e2m3, bfp5");
  app->add_option("--block-size", o.block_size, "Elements per block")->check(CLI::Range(2, 1 << 20));
  app->add_flag("--no-nano", o.no_nano, "Disable NanoMantissa");
  app->add_flag("--no-adaptive", o.no_adaptive, "Disable adaptive format selection");
  app->add_flag("--no-recycle", o.no_recycle, "Disable code recycling");
  app->add_option("--recycle-rule", o.recycle_rule,
                  "half-smallest, midpoint-top, midpoint:K or value:V");
  app->add_option("--nano-search", o.nano_search, "NanoMantissa search")
      ->check(CLI::IsMember({"alg1", "exhaustive"}));
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> shape;
  std::string cur;
  auto flush = [&] {
    if (cur.empty() || cur.find_first_not_of("0123456789") != std::string::npos) {
      throw UsageError("bad --shape '" + s + "'");
    }
    shape.push_back(std::stoull(cur));
    cur.clear();
  };
  for (char c : s) {
    if (c == 'x' || c == ',') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return shape;
}

QuantConfig make_config(const std::string& spec, const FormatOptions& o) {
  QuantConfig cfg = parse_format_spec(spec);
  if (o.block_size) cfg.block_size = *o.block_size;
  if (o.no_nano) cfg.nano_enabled = false;
  if (o.no_adaptive) cfg.adaptive_enabled = false;
  if (o.no_recycle) cfg.recycle_enabled = false;
  if (!o.recycle_rule.empty()) cfg.recycle_rule = RecycleRule::parse(o.recycle_rule);
  if (!o.nano_search.empty()) cfg.nano_search = parse_nano_search(o.nano_search);
  validate(cfg);
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty format list");
  return out;
}

Tensor load_input(const InputOptions& o) {
  if (o.in.empty() == o.synth.empty()) throw UsageError("give exactly one of --in and --synth");
  TensorSource src;
  if (!o.synth.empty()) {
    if (!o.seed) throw UsageError("--synth requires --seed");
    src.kind = TensorSource::Kind::synthetic;
    src.model = parse_synth_model(o.synth);
    src.seed = *o.seed;
    src.shape = o.shape.empty() ? std::vector<std::size_t>{o.n} : parse_shape(o.shape);
  } else {
    src = TensorSource::from_path(o.in);
    src.name = o.tensor_name;
    if (src.kind == TensorSource::Kind::raw) {
      if (o.dtype.empty() || o.shape.empty()) throw UsageError("raw input needs --dtype and --shape");
      src.dtype = parse_dtype(o.dtype);
      src.shape = parse_shape(o.shape);
    }
  }
  return load_tensor(src);
}

std::string g9(double v) { return fmt::format("{:.9g}", v); }

std::string shape_text(std::span<const std::size_t> shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

// Writes to `path`, or to `out` when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(out);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io, "cannot open " + path + " for writing");
  fn(f);
  if (!f) throw Error(Errc::io, "write failed: " + path);
}

int cmd_quantize(const InputOptions& in, const FormatOptions& fo, const std::string& out_path,
                 std::ostream& out) {
  if (out_path.empty()) throw UsageError("quantize needs --out");
  const QuantConfig cfg = make_config(fo.format, fo);
  const Tensor t = load_input(in);
  const auto q = quantize_tensor_with_report(t.values, t.shape, cfg);
  write_nxt(out_path, q.tensor);
  const ErrorStats s = aggregate(q.reports);
  fmt::print(out, "wrote {}\n", out_path);
  fmt::print(out, "shape: {}\nelements: {}\nblocks: {}\n", shape_text(t.shape), s.elements, s.blocks);
  fmt::print(out, "bits_per_element: {}\nfootprint_bits: {}\nfile_bytes: {}\n",
             g9(footprint_bits_per_element(cfg)), footprint_bits(q.tensor), serialized_size(q.tensor));
  fmt::print(out, "mse: {}\nbfp_fraction: {}\n", g9(s.mse), g9(s.bfp_fraction()));
  return kOk;
}

int cmd_dequantize(const std::string& in_path, const std::string& target_name,
                   const std::string& out_path, std::ostream& out) {
  if (in_path.empty() || out_path.empty()) throw UsageError("dequantize needs --in and --out");
  const DequantTarget target = parse_target(target_name);
  const PackedTensor t = read_nxt(in_path);
  const auto values = dequantize_tensor(t, target);
  write_npy(out_path, t.shape, values,
            target == DequantTarget::binary16 ? DType::binary16 : DType::binary32);
  fmt::print(out, "wrote {} ({} {} values)\n", out_path, values.size(), to_string(target));
  return kOk;
}

int cmd_inspect(const std::string& in_path, std::ostream& out) {
  if (in_path.empty()) throw UsageError("inspect needs --in");
  const PackedTensor t = read_nxt(in_path);
  const QuantConfig& c = t.cfg;
  out << header_text(t);
  fmt::print(out, "element_formats: mx={} bfp={}\n", c.mx_format().name(), c.bfp_format().name());
  fmt::print(out, "blocks: {}\n", t.block_count());

  std::size_t zero = 0;
  std::size_t fmt0 = 0;
  int emin = BlockScale::kMaxExponent;
  int emax = BlockScale::kMinExponent;
  std::size_t nano[4] = {0, 0, 0, 0};
  std::map<int, std::size_t> exps;
  for (const BlockScale& s : t.scales) {
    if (s.is_zero_block()) {
      ++zero;
      continue;
    }
    emin = std::min(emin, s.e_shared);
    emax = std::max(emax, s.e_shared);
    ++exps[s.e_shared];
    ++nano[s.m_nano];
    if (s.fmt == 0) ++fmt0;
  }
  const std::size_t live = t.block_count() - zero;
  fmt::print(out, "zero_blocks: {}\n", zero);
  if (live) {
    fmt::print(out, "e_shared_min: {}\ne_shared_max: {}\n", emin, emax);
  } else {
    out << "e_shared_min: -\ne_shared_max: -\n";
  }
  out << "e_shared_hist:";
  for (const auto& [e, n] : exps) fmt::print(out, " {}:{}", e, n);
  out << '\n';
  fmt::print(out, "m_nano_hist: 0:{} 1:{} 2:{} 3:{}\n", nano[0], nano[1], nano[2], nano[3]);
  fmt::print(out, "fmt0_fraction: {}\n",
             g9(live ? static_cast<double>(fmt0) / static_cast<double>(live) : 0.0));
  fmt::print(out, "bits_per_element: {}\nfile_bytes: {}\n", g9(footprint_bits_per_element(c)),
             serialized_size(t));
  return kOk;
}

int cmd_analyze(const InputOptions& in, const FormatOptions& fo, const std::string& out_path,
                const std::string& hist_path, std::ostream& out) {
  const QuantConfig cfg = make_config(fo.format, fo);
  const Tensor t = load_input(in);
  const ErrorReport r = ablation_sweep(t.values, cfg.element_bits, cfg.block_size, cfg.nano_search);
  emit(out_path, out, [&](std::ostream& os) { write_csv(os, r); });
  if (!hist_path.empty()) {
    const ScaledHistogram h = profile_scaled_distribution(t.values, cfg);
    emit(hist_path, out, [&](std::ostream& os) { write_csv(os, h); });
  }
  return kOk;
}

int cmd_sweep(const InputOptions& in, const FormatOptions& fo, const std::string& kind,
              const std::string& out_path, std::ostream& out) {
  QuantConfig cfg = make_config(fo.format, fo);
  const Tensor t = load_input(in);
  if (kind == "ablation") {
    const ErrorReport r = ablation_sweep(t.values, cfg.element_bits, cfg.block_size, cfg.nano_search);
    emit(out_path, out, [&](std::ostream& os) { write_csv(os, r); });
  } else if (kind == "block-size") {
    const auto rows = block_size_sweep(t.values, cfg.element_bits);
    emit(out_path, out, [&](std::ostream& os) { write_csv(os, rows); });
  } else if (kind == "recycled-value") {
    cfg.recycle_enabled = true;
    const auto candidates = default_recycle_candidates(cfg);
    const auto rows = recycled_value_sweep(t.values, cfg, candidates);
    emit(out_path, out, [&](std::ostream& os) { write_csv(os, rows); });
  } else {
    const auto rows = microexp_config_sweep(t.values, cfg);
    emit(out_path, out, [&](std::ostream& os) { write_csv(os, rows); });
  }
  return kOk;
}

int cmd_compare(const InputOptions& in, const FormatOptions& fo, const std::string& out_path,
                std::ostream& out) {
  std::vector<LabeledConfig> configs;
  for (const auto& spec : split_list(fo.format)) configs.push_back({spec, make_config(spec, fo)});
  const Tensor t = load_input(in);
  const ErrorReport r = error_report(t.values, configs);
  emit(out_path, out, [&](std::ostream& os) { write_csv(os, r); });
  return kOk;
}

int exit_code(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return kUsage;
    case Errc::non_finite: return kNonFinite;
    default: return kIoFormat;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block-scaled minifloat codec: BFP, MxFP and NxFP"};
  app.name("nxfp");
  app.require_subcommand(1);

  InputOptions in;
  FormatOptions fo;
  std::string out_path;
  std::string hist_path;
  std::string target = "f32";
  std::string sweep_kind;
  std::string nxt_in;

  auto* quantize = app.add_subcommand("quantize", "Quantize a tensor into an .nxt file");
  add_input(quantize, in);
  add_format(quantize, fo, false);
  quantize->add_option("--out", out_path, "Output .nxt path");

  auto* dequantize = app.add_subcommand("dequantize", "Decode an .nxt file to .npy");
  dequantize->add_option("--in", nxt_in, "Input .nxt path");
  dequantize->add_option("--out", out_path, "Output .npy path");
  dequantize->add_option("--target", target, "Output precision")
      ->check(CLI::IsMember({"f16", "bf16", "f32"}));

  auto* inspect = app.add_subcommand("inspect", "Print the header and block statistics of an .nxt file");
  inspect->add_option("--in", nxt_in, "Input .nxt path");

  auto* analyze = app.add_subcommand("analyze", "Error report and scaled-value histogram");
  add_input(analyze, in);
  add_format(analyze, fo, false);
  analyze->add_option("--out", out_path, "Error report CSV (default stdout)");
  analyze->add_option("--hist", hist_path, "Histogram CSV");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  add_input(sweep, in);
  add_format(sweep, fo, false);
  sweep->add_option("--sweep", sweep_kind, "Sweep kind")
      ->required()
      ->check(CLI::IsMember({"ablation", "block-size", "recycled-value", "microexp"}));
  sweep->add_option("--out", out_path, "CSV output (default stdout)");

  auto* compare = app.add_subcommand("compare", "Compare several formats on one tensor");
  add_input(compare, in);
  add_format(compare, fo, true);
  compare->add_option("--out", out_path, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*quantize) return cmd_quantize(in, fo, out_path, out);
    if (*dequantize) return cmd_dequantize(nxt_in, target, out_path, out);
    if (*inspect) return cmd_inspect(nxt_in, out);
    if (*analyze) return cmd_analyze(in, fo, out_path, hist_path, out);
    if (*sweep) return cmd_sweep(in, fo, sweep_kind, out_path, out);
    if (*compare) return cmd_compare(in, fo, out_path, out);
  } catch (const UsageError& e) {
    fmt::print(err, "nxfp: error: {}\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    fmt::print(err, "nxfp: error: {}: {}\n", errc_name(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    fmt::print(err, "nxfp: error: {}\n", e.what());
    return kIoFormat;
  }
  return kUsage;
}

}  // namespace nxfp::cli
