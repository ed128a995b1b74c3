// SPDX-License-Identifier: Apache-2.0
#include "hbvla/tools/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hbvla/attention.hpp"
#include "hbvla/linalg.hpp"
#include "hbvla/npy.hpp"
#include "hbvla/pipeline.hpp"
#include "hbvla/rng.hpp"
#include "hbvla/serialize.hpp"
#include "hbvla/tools/bench.hpp"
#include "hbvla/tools/config_json.hpp"

namespace hbvla::tools {

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::configuration:
      return kExitUsage;
    case ErrorCode::numerical:
    case ErrorCode::singular:
    case ErrorCode::degenerate_input:
    case ErrorCode::domain:
      return kExitNumerical;
    case ErrorCode::dimension:
    case ErrorCode::format:
    case ErrorCode::truncation:
    case ErrorCode::inconsistent:
    case ErrorCode::permutation:
    case ErrorCode::size_limit:
    case ErrorCode::io:
      return kExitInput;
  }
  return kExitNumerical;
}

namespace {

void record(std::ostream& err, int exit_code, std::string_view code, std::string_view message) {
  std::string esc;
  for (char ch : message) {
    if (ch == '"' || ch == '\\') {
      esc += '\\';
      esc += ch;
    } else if (ch == '\n' || ch == '\r') {
      esc += ' ';
    } else {
      esc += ch;
    }
  }
  err << "hbvla-error exit=" << exit_code << " code=" << code << " message=\"" << esc << "\"\n";
}

std::vector<double> read_vector(const std::string& path) {
  const Matrix v = read_tensor(path);
  if (v.rows() != 1 && v.cols() != 1) {
    fail(ErrorCode::dimension, path + ": expected a vector, got " + std::to_string(v.rows()) + "x" +
                                   std::to_string(v.cols()));
  }
  return {v.data().begin(), v.data().end()};
}

QuantConfig config_or_default(const std::string& path) {
  return path.empty() ? QuantConfig{} : load_config(path);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
  f << text;
  if (!f) fail(ErrorCode::io, "write failed: " + path);
}

struct QuantizeArgs {
  std::string weights, calib, importance, config, out, report;
};

int cmd_quantize(const QuantizeArgs& a, std::ostream& out) {
  const QuantConfig cfg = config_or_default(a.config);
  const Matrix w = read_tensor(a.weights);
  Calibration calib;
  if (!a.calib.empty()) calib.x = read_tensor(a.calib);
  if (!a.importance.empty()) calib.importance = read_vector(a.importance);
  const auto q = quantize_layer(w, calib, cfg);
  write_layer(a.out, q.layer);
  if (!a.report.empty()) write_text(a.report, report_to_json(q).dump(2) + "\n", out);
  out << "fro_error=" << format_double(q.report.fro_error)
      << " avg_bits=" << format_double(q.report.avg_bits)
      << " salient=" << q.report.salient_count << "\n";
  return kExitOk;
}

struct DequantizeArgs {
  std::string in, out, dtype = "f32";
};

int cmd_dequantize(const DequantizeArgs& a) {
  Matrix w = reconstruct(read_layer(a.in));
  w.set_precision(a.dtype == "f64" ? Precision::f64 : Precision::f32);
  write_tensor(a.out, w);
  return kExitOk;
}

struct AnalyzeArgs {
  std::string weights, calib, importance, config, out;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  QuantConfig cfg = config_or_default(a.config);
  const Matrix w = read_tensor(a.weights);
  Calibration calib;
  if (!a.calib.empty()) calib.x = read_tensor(a.calib);
  if (!a.importance.empty()) calib.importance = read_vector(a.importance);
  if (!calib.x) cfg.hessian_mode = HessianSource::standard;

  std::ostringstream csv;
  csv << "metric,index,value\n";
  auto row = [&](std::string_view metric, std::optional<std::size_t> index, double value) {
    csv << metric << ',' << (index ? std::to_string(*index) : "") << ',' << format_double(value) << "\n";
  };

  const RectifiedHessian h = saliency_hessian(w, calib, cfg);
  const auto scores = column_scores(w, h, cfg.score_rule);
  for (std::size_t j = 0; j < scores.size(); ++j) row("column_score", j, scores[j]);
  const std::size_t budget = w.rows() < 2 || w.cols() < 2 ? 0 : std::min(cfg.candidate_budget, w.cols() - 1);
  const auto part = select_salient(w, scores, budget);
  for (std::size_t c : part.salient) row("salient_column", c, scores[c]);

  row("hessian_mean_diag", std::nullopt, mean_diagonal(h.h));
  constexpr std::size_t kMaxEigenDim = 1024;
  if (h.h.rows() <= kMaxEigenDim) {
    const auto ev = symmetric_eigenvalues(h.h);
    const auto [lo, hi] = std::minmax_element(ev.begin(), ev.end());
    row("hessian_condition", std::nullopt, *lo > 0.0 ? *hi / *lo : INFINITY);
  } else {
    err << "analyze: skipping hessian_condition for " << h.h.rows() << " columns\n";
  }

  if (w.cols() >= 2) {
    const HaarBands b = haar_forward_rows(w, cfg.normalization);
    const double elo = frobenius_norm(b.lo), ehi = frobenius_norm(b.hi);
    row("band_energy_lo", std::nullopt, elo * elo);
    row("band_energy_hi", std::nullopt, ehi * ehi);
    const auto dist = pairwise_distances(w, cfg.effective_neighbors(w.cols()));
    const auto order = greedy_pair_and_chain(dist, column_norms(w, cfg.seed_norm));
    row("highpass_energy_identity", std::nullopt, highpass_energy(w, ColumnOrdering::identity(w.cols())));
    row("highpass_energy_ordered", std::nullopt, highpass_energy(w, order));
  }
  write_text(a.out, csv.str(), out);
  return kExitOk;
}

struct BenchArgs {
  std::string suite, out, svg, config;
  bool timing = false;
  std::size_t threads = 0;
};

int cmd_bench(const BenchArgs& a, std::uint64_t seed, std::ostream& out) {
  const QuantConfig cfg = config_or_default(a.config);
  const auto cases = load_suite(a.suite);
  const std::size_t threads = a.threads > 0 ? a.threads : thread_budget();
  const auto rows = run_suite(cases, cfg, seed, threads);
  std::ostringstream csv;
  write_csv(csv, rows, a.timing);
  write_text(a.out, csv.str(), out);
  if (!a.svg.empty()) write_svg(a.svg, rows);
  return kExitOk;
}

struct ProbeArgs {
  std::vector<std::string> attn;
  std::string x, config, out = ".";
  std::size_t heads = 1;
  std::size_t fd_samples = 16;
};

constexpr double kProbeTolerance = 1e-3;

int cmd_probe(const ProbeArgs& a, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  QuantConfig cfg = config_or_default(a.config);
  // Importance is what the probe produces, so the probe itself uses the plain Hessian.
  cfg.hessian_mode = HessianSource::standard;

  AttentionBlockWeights full;
  full.wq = read_tensor(a.attn[0]);
  full.wk = read_tensor(a.attn[1]);
  full.wv = read_tensor(a.attn[2]);
  full.wo = read_tensor(a.attn[3]);
  full.heads = a.heads;
  full.validate();
  const Matrix x = read_tensor(a.x);
  if (x.rows() != full.dim()) {
    fail(ErrorCode::dimension, "probe: X has " + std::to_string(x.rows()) + " rows, weights are " +
                                   std::to_string(full.dim()) + "-dimensional");
  }

  const AttentionResult ref = attention_forward(full, x);
  AttentionBlockWeights quant = full;
  for (Projection p : kProjections) {
    Calibration calib;
    calib.x = p == Projection::o ? ref.cache.concat : x;
    quant.get(p) = quantize_layer(full.get(p), calib, cfg).w_hat;
  }
  const Matrix z_hat = attention_forward(quant, x).z;
  const ProjectionGradients grads = projection_gradients(full, quant, x);

  std::filesystem::create_directories(a.out);
  double worst = 0.0;
  const Rng base(seed);
  for (Projection p : kProjections) {
    const Matrix& g = grads[p];
    const TokenImportance imp = token_importance(g, full.dim(), p);
    Matrix row(1, imp.a.size(), imp.a);
    write_tensor(std::filesystem::path(a.out) / (std::string("importance_") + to_string(p) + ".npy"), row);

    std::array<Matrix, 4> y = ref.cache.y;
    auto loss = [&]() {
      const Matrix z = p == Projection::o
                           ? x + y[3]
                           : attention_from_projections(x, y[0], y[1], y[2], full.wo, full.heads);
      return block_loss(z, z_hat);
    };
    Matrix& target = y[static_cast<std::size_t>(p)];
    const double gmax = max_abs(g);
    const std::size_t total = target.size();
    const std::size_t samples = std::min(a.fd_samples, total);
    Rng rng = base.split(static_cast<std::uint64_t>(p));
    double worst_p = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t idx = samples == total ? s : rng.below(total);
      double& v = target.data()[idx];
      const double v0 = v;
      const double h = 1e-5 * std::max(1.0, std::abs(v0));
      v = v0 + h;
      const double lp = loss();
      v = v0 - h;
      const double lm = loss();
      v = v0;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = g.data()[idx];
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-6 * gmax, 1e-300});
      worst_p = std::max(worst_p, std::abs(an - fd) / denom);
    }
    out << "projection=" << to_string(p) << " samples=" << samples
        << " max_rel_err=" << format_double(worst_p) << "\n";
    worst = std::max(worst, worst_p);
  }
  out << "fd_max_rel_err=" << format_double(worst) << "\n";
  if (worst > kProbeTolerance) {
    record(err, kExitNumerical, "finite_difference",
           "gradient check failed: max relative error " + format_double(worst));
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-training 1-bit weight binarization", "hbvla"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for generators and sampling");

  QuantizeArgs qa;
  auto* quantize = app.add_subcommand("quantize", "Binarize one weight matrix into an .hbq file");
  quantize->add_option("--weights", qa.weights, "Weight matrix (NPY, n x m)")->required();
  quantize->add_option("--calib", qa.calib, "Calibration activations (NPY, m x N)");
  quantize->add_option("--importance", qa.importance, "Per-token importance (NPY vector, length N)");
  quantize->add_option("--config", qa.config, "Quantizer config (JSON, every field optional)");
  quantize->add_option("--out", qa.out, "Output .hbq file")->required();
  quantize->add_option("--report", qa.report, "Report JSON");

  DequantizeArgs da;
  auto* dequantize = app.add_subcommand("dequantize", "Rebuild a dense matrix from an .hbq file");
  dequantize->add_option("--in", da.in, "Input .hbq file")->required();
  dequantize->add_option("--out", da.out, "Output NPY file")->required();
  dequantize->add_option("--dtype", da.dtype, "Output dtype")->check(CLI::IsMember({"f32", "f64"}));

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Saliency scores, Hessian conditioning and band energies as CSV");
  analyze->add_option("--weights", aa.weights, "Weight matrix (NPY)")->required();
  analyze->add_option("--calib", aa.calib, "Calibration activations (NPY)");
  analyze->add_option("--importance", aa.importance, "Per-token importance (NPY vector)");
  analyze->add_option("--config", aa.config, "Quantizer config (JSON)");
  analyze->add_option("--out", aa.out, "Output CSV (default: stdout)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Compare methods over a suite of synthetic cases");
  bench->add_option("--suite", ba.suite, "Suite JSON")->required();
  bench->add_option("--out", ba.out, "Output CSV")->required();
  bench->add_option("--svg", ba.svg, "Directory for SVG charts");
  bench->add_option("--config", ba.config, "Quantizer config (JSON)");
  bench->add_flag("--timing", ba.timing, "Fill the ms column (makes output run-dependent)");
  bench->add_option("--threads", ba.threads, "Worker threads (default: HBVLA_THREADS or all cores)");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Token importance from an attention block probe");
  probe->add_option("--attn", pa.attn, "Wq Wk Wv Wo (NPY, d x d each)")->expected(4)->required();
  probe->add_option("--x", pa.x, "Block input (NPY, d x N, tokens as columns)")->required();
  probe->add_option("--heads", pa.heads, "Attention heads")->check(CLI::PositiveNumber);
  probe->add_option("--config", pa.config, "Quantizer config (JSON)");
  probe->add_option("--out", pa.out, "Directory for importance_{q,k,v,o}.npy");
  probe->add_option("--fd-samples", pa.fd_samples, "Finite-difference samples per projection");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  if (argv.empty()) argv.push_back("hbvla");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success&) {
    out << app.help();
    for (auto* sub : app.get_subcommands()) out << sub->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    record(err, kExitUsage, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (quantize->parsed()) return cmd_quantize(qa, out);
    if (dequantize->parsed()) return cmd_dequantize(da);
    if (analyze->parsed()) return cmd_analyze(aa, out, err);
    if (bench->parsed()) return cmd_bench(ba, seed, out);
    if (probe->parsed()) return cmd_probe(pa, seed, out, err);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    record(err, code, to_string(e.code()), e.what());
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    record(err, kExitInput, "io", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    record(err, kExitNumerical, "internal", e.what());
    return kExitNumerical;
  }
  err << app.help();
  record(err, kExitUsage, "usage", "no subcommand");
  return kExitUsage;
}

}  // namespace hbvla::tools
