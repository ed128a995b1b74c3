// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: hbvla_acceptance <path-to-hbvla-binary> <suite.json> <scratch-dir>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "hbvla/attention.hpp"
#include "hbvla/haar.hpp"
#include "hbvla/permute.hpp"
#include "hbvla/pipeline.hpp"
#include "hbvla/rng.hpp"
#include "hbvla/saliency.hpp"
#include "hbvla/serialize.hpp"
#include "hbvla/tools/bench.hpp"

using namespace hbvla;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = s < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++g_failures;
  std::printf("criterion %2d %s: %s | %s | %.2fs (limit %.0fs%s)\n", id, pass ? "PASS" : "FAIL",
              title, o.detail.c_str(), s, limit_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

void info(const std::string& line) {
  std::printf("  info: %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

ColumnOrdering random_ordering(Rng& rng, std::size_t m) {
  ColumnOrdering p = ColumnOrdering::identity(m);
  for (std::size_t i = m; i > 1; --i) std::swap(p.order[i - 1], p.order[rng.below(i)]);
  return p;
}

QuantConfig standard_cfg() {
  QuantConfig c;
  c.hessian_mode = HessianSource::standard;
  return c;
}

// --- 1 ---------------------------------------------------------------------
Outcome haar_round_trip() {
  Rng rng(1001);
  double worst = 0.0;
  int count = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.below(31), m = 2 + rng.below(31);
    const Matrix w = oracle::random_matrix(rng, n, m);
    const auto norm = i % 2 ? HaarNorm::orthonormal : HaarNorm::average;
    const Matrix back = (i / 2) % 2 ? haar_inverse_cols(haar_forward_cols(w, norm))
                                    : haar_inverse_rows(haar_forward_rows(w, norm));
    worst = std::max(worst, oracle::max_abs_diff(back, w));
    ++count;
  }
  return {worst <= 1e-12, fmt("%d matrices, max |error| %.3g <= 1e-12", count, worst)};
}

// --- 2 ---------------------------------------------------------------------
Outcome energy_identity() {
  Rng rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng.below(16), m = 2 + rng.below(40);
    const Matrix w = oracle::random_matrix(rng, n, m, 2.0);
    const auto p = random_ordering(rng, m);
    worst = std::max(worst, std::abs(highpass_energy(w, p) - highpass_energy_via_transform(w, p)));
  }
  return {worst <= 1e-10, fmt("100 pairs, max |difference| %.3g <= 1e-10", worst)};
}

// --- 3 ---------------------------------------------------------------------
Outcome greedy_vs_oracle() {
  Rng rng(1003);
  const std::size_t sizes[] = {4, 6, 8, 10};
  int lower_bound_ok = 0;
  double ratio_sum = 0.0;
  int ratio_n = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t m = sizes[i % 4];
    const Matrix w = oracle::random_matrix(rng, 8, m);
    const auto d = pairwise_distances(w);
    const double opt = optimal_pairing_oracle(d).cost;
    const double g = within_pair_cost(d, greedy_pair_and_chain(d, column_norms(w, SeedNorm::l2)));
    lower_bound_ok += g >= opt - 1e-12;
    if (opt > 0.0) {
      ratio_sum += g / opt;
      ++ratio_n;
    }
  }
  // Two-cluster trials over the same column counts. Clusters are interleaved
  // (alternating columns), the arrangement that pairs every identity window
  // across clusters.
  auto beats_identity = [&](std::uint64_t stream, tools::ClusterLayout layout, bool exact) {
    int beats = 0;
    for (int i = 0; i < 100; ++i) {
      Rng r = Rng(stream).split(static_cast<std::uint64_t>(i));
      const std::size_t m = sizes[i % 4];
      const Matrix w = tools::two_cluster_weights(16, m, r, 10.0, layout);
      const auto d = pairwise_distances(w);
      const double ident = within_pair_cost(d, ColumnOrdering::identity(m));
      const double cost = exact ? optimal_pairing_oracle(d).cost
                                : within_pair_cost(d, greedy_pair_and_chain(
                                                          d, column_norms(w, SeedNorm::l2)));
      beats += cost < ident;
    }
    return beats;
  };
  const int beats = beats_identity(1103, tools::ClusterLayout::alternating, false);
  // Informational: random cluster positions. At these sizes identity is often
  // already an optimal pairing, so even the exact matching cannot beat it.
  const int beats_shuffled = beats_identity(1203, tools::ClusterLayout::shuffled, false);
  const int exact_shuffled = beats_identity(1203, tools::ClusterLayout::shuffled, true);
  int beats_large = 0;
  for (int i = 0; i < 100; ++i) {
    Rng rl = Rng(1303).split(static_cast<std::uint64_t>(i));
    const Matrix wl = tools::two_cluster_weights(64, 128, rl);
    const auto dl = pairwise_distances(wl);
    const auto pl = greedy_pair_and_chain(dl, column_norms(wl, SeedNorm::l2));
    beats_large += within_pair_cost(dl, pl) < within_pair_cost(dl, ColumnOrdering::identity(128));
  }
  info(fmt("random cluster positions, m in {4,6,8,10}: greedy beats identity %d/100, exact "
           "matching beats identity %d/100; 64x128: greedy beats identity %d/100",
           beats_shuffled, exact_shuffled, beats_large));
  const bool pass = lower_bound_ok == 100 && beats >= 95;
  return {pass, fmt("greedy >= optimal in %d/100, mean greedy/optimal %.4f; interleaved "
                    "two-cluster greedy beats identity %d/100 (need >= 95)",
                    lower_bound_ok, ratio_sum / ratio_n, beats)};
}

// --- 4 ---------------------------------------------------------------------
Outcome quantizer_optimality() {
  Rng rng(1004);
  int ok = 0;
  double worst_steps = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> u(2 + rng.below(200));
    for (double& v : u) v = (i % 3 == 0 ? 5.0 : 1.0) * rng.normal() + 0.3;
    const auto p = quantize_group(u);
    double maxdev = 0.0;
    for (double v : u) maxdev = std::max(maxdev, std::abs(v - p.mu));
    const int points = 10000;
    const double step = maxdev / (points - 1);
    double best_a = 0.0, best_e = INFINITY;
    for (int k = 0; k < points; ++k) {
      const double a = k * step;
      double e = 0.0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        const double q = p.signs[j] ? p.mu + a : p.mu - a;
        e += (u[j] - q) * (u[j] - q);
      }
      if (e < best_e) best_e = e, best_a = a;
    }
    const double steps = std::abs(best_a - p.alpha) / step;
    worst_steps = std::max(worst_steps, steps);
    ok += steps <= 1.0;
  }
  return {ok == 100, fmt("%d/100 within one grid step (worst %.3f steps)", ok, worst_steps)};
}

// --- 5 ---------------------------------------------------------------------
Outcome gradient_probe() {
  Rng rng(1005);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t heads = 1 + inst % 2;
    const std::size_t d = heads * (1 + rng.below(8 / heads));
    const std::size_t n = 1 + rng.below(6);
    AttentionBlockWeights full;
    full.heads = heads;
    for (auto p : kProjections) full.get(p) = oracle::random_matrix(rng, d, d, 0.7);
    AttentionBlockWeights quant = full;
    for (auto p : kProjections)
      for (double& v : quant.get(p).data()) v = v >= 0.0 ? 0.5 : -0.5;
    const Matrix x = oracle::random_matrix(rng, d, n);
    const Matrix z_hat = attention_forward(quant, x).z;
    const auto fwd = attention_forward(full, x);
    const auto grads = projection_gradients(full, quant, x);
    const auto& y = fwd.cache;
    for (auto p : kProjections) {
      std::function<double(const Matrix&)> f;
      if (p == Projection::o) {
        f = [&](const Matrix& yo) { return block_loss(x + yo, z_hat); };
      } else {
        f = [&, p](const Matrix& yp) {
          const Matrix& yq = p == Projection::q ? yp : y.proj(Projection::q);
          const Matrix& yk = p == Projection::k ? yp : y.proj(Projection::k);
          const Matrix& yv = p == Projection::v ? yp : y.proj(Projection::v);
          return block_loss(attention_from_projections(x, yq, yk, yv, full.wo, heads), z_hat);
        };
      }
      const Matrix fd = oracle::finite_difference(y.proj(p), f);
      const Matrix& an = grads[p];
      const double gmax = max_abs(an);
      for (std::size_t i = 0; i < an.size(); ++i) {
        const double a = an.data()[i], b = fd.data()[i];
        const double denom = std::max({std::abs(a), std::abs(b), 1e-6 * gmax, 1e-300});
        worst = std::max(worst, std::abs(a - b) / denom);
      }
    }
  }
  return {worst <= 1e-4, fmt("20 instances, max relative error %.3g <= 1e-4", worst)};
}

// --- 6 ---------------------------------------------------------------------
Outcome first_order_law() {
  double worst_out = INFINITY, worst_w = INFINITY;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(2000 + seed);
    const std::size_t d = 8, n = 6, heads = 2;
    AttentionBlockWeights full;
    full.heads = heads;
    for (auto p : kProjections) full.get(p) = oracle::random_matrix(rng, d, d, 0.6);
    AttentionBlockWeights quant = full;
    for (auto p : kProjections)
      for (double& v : quant.get(p).data()) v += 0.1 * rng.normal();
    const Matrix x = oracle::random_matrix(rng, d, n);
    const Matrix z_hat = attention_forward(quant, x).z;
    const auto fwd = attention_forward(full, x);
    const auto grads = projection_gradients(full, quant, x);

    // Block-output form: p = dL/dz = 2 (z - z_hat).
    const Matrix dz = oracle::random_matrix(rng, d, n);
    const Matrix pz = 2.0 * (fwd.z - z_hat);
    auto residual_out = [&](double eps) {
      const Matrix step = eps * dz;
      double lin = 0.0;
      for (std::size_t i = 0; i < step.size(); ++i) lin += step.data()[i] * pz.data()[i];
      return std::abs(block_loss(fwd.z + step, z_hat) - grads.loss - lin);
    };
    worst_out = std::min(worst_out, residual_out(1e-2) / residual_out(5e-3));

    // Through the block: perturb every projection weight along a random
    // direction, first-order term from the assembled weight gradients.
    std::array<Matrix, 4> dir, gw;
    for (auto p : kProjections) {
      dir[static_cast<std::size_t>(p)] = oracle::random_matrix(rng, d, d);
      gw[static_cast<std::size_t>(p)] = weight_gradient(grads, fwd.cache, x, p);
    }
    auto residual_w = [&](double eps) {
      AttentionBlockWeights b = full;
      double lin = 0.0;
      for (auto p : kProjections) {
        const std::size_t k = static_cast<std::size_t>(p);
        b.get(p) = full.get(p) + eps * dir[k];
        for (std::size_t i = 0; i < dir[k].size(); ++i) lin += eps * dir[k].data()[i] * gw[k].data()[i];
      }
      return std::abs(block_loss(attention_forward(b, x).z, z_hat) - grads.loss - lin);
    };
    worst_w = std::min(worst_w, residual_w(1e-2) / residual_w(5e-3));
  }
  const bool pass = worst_out >= 3.5 && worst_w >= 3.5;
  return {pass, fmt("10 seeds, min shrink ratio %.3f at the block output, %.3f through the "
                    "projection weights (need >= 3.5)",
                    worst_out, worst_w)};
}

// --- 7 ---------------------------------------------------------------------
Outcome update_vs_elimination() {
  Rng rng(1007);
  double worst_constraint = 0.0, worst_obj = 0.0, worst_coef = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t m = 3 + rng.below(8), n = m + 2 + rng.below(20);
    const Matrix x = oracle::random_matrix(rng, m, n);
    std::vector<double> g(n), r(n), w(m);
    for (double& v : g) v = 0.05 + 2.0 * rng.uniform();
    for (double& v : r) v = rng.normal();
    for (double& v : w) v = rng.normal();
    const std::size_t q = rng.below(m);
    const double wq_hat = w[q] >= 0.0 ? 0.7 : -0.7;
    const auto dw = obq_update(w, q, wq_hat, x, g, r, 0.0);
    worst_constraint = std::max(worst_constraint, std::abs(dw[q] + w[q] - wq_hat));
    const auto ref = oracle::constrained_update(x, g, r, q, wq_hat - w[q]);
    auto objective = [&](const std::vector<double>& v) {
      long double s = 0.0L;
      for (std::size_t t = 0; t < n; ++t) {
        long double e = -r[t];
        for (std::size_t j = 0; j < m; ++j) e += static_cast<long double>(v[j]) * x(j, t);
        s += g[t] * e * e;
      }
      return static_cast<double>(s);
    };
    for (std::size_t j = 0; j < m; ++j)
      worst_coef = std::max(worst_coef, std::abs(dw[j] - ref[j]) / std::max(1.0, std::abs(ref[j])));
    const double a = objective(dw), b = objective(ref);
    worst_obj = std::max(worst_obj, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  info(fmt("max coefficient difference to the elimination solve %.3g", worst_coef));
  const bool pass = worst_constraint < 1e-12 && worst_obj <= 1e-8;
  return {pass, fmt("50 instances, max constraint residual %.3g < 1e-12, max objective "
                    "difference %.3g <= 1e-8",
                    worst_constraint, worst_obj)};
}

// --- 8 ---------------------------------------------------------------------
Outcome error_ordering() {
  tools::BenchCase c{"two-cluster", tools::Generator::two_cluster, 64, 128, 0, {}, 256};
  const QuantConfig cfg;
  int fro_ok = 0, proxy_ok = 0;
  double sum[3] = {0, 0, 0};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    c.seed = seed;
    const auto inst = tools::generate_instance(c);
    Calibration cal;
    cal.x = inst.x;
    double fro[3], prox[3];
    const tools::Method methods[] = {tools::Method::hbvla, tools::Method::haar_noperm,
                                     tools::Method::plain_sign};
    for (int k = 0; k < 3; ++k) {
      const auto r = tools::run_method(methods[k], inst.w, cal, cfg);
      fro[k] = frobenius_distance(inst.w, r.w_hat);
      prox[k] = proxy_error(inst.w, r.w_hat, inst.x, cfg.proxy_tokens);
      sum[k] += fro[k];
    }
    fro_ok += fro[0] < fro[1] && fro[1] < fro[2];
    proxy_ok += prox[0] < prox[1] && prox[1] < prox[2];
  }
  info(fmt("mean fro_error hbvla %.4f, haar-noperm %.4f, plain-sign %.4f", sum[0] / 100,
           sum[1] / 100, sum[2] / 100));
  return {fro_ok >= 90 && proxy_ok >= 85,
          fmt("fro ordering %d/100 (need >= 90), proxy ordering %d/100 (need >= 85)", fro_ok,
              proxy_ok)};
}

// --- 9 ---------------------------------------------------------------------
Outcome hessian_ablation() {
  const std::size_t n = 64, m = 128, tokens = 256, task_channels = 16;
  int ok = 0, strictly = 0;
  double sum_r = 0.0, sum_s = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Rng base = Rng(9000).split(seed);
    Rng wr = base.split(0), xr = base.split(1);
    const Matrix w = tools::heavy_tail_col_weights(n, m, wr);
    // 10% of the tokens carry importance 10. A random set of task channels is
    // active only on those tokens; the remaining channels carry the bulk of
    // the (larger) background activity on every other token.
    std::vector<bool> is_task(m, false);
    for (std::size_t k = 0; k < task_channels;) {
      const std::size_t c = xr.below(m);
      if (!is_task[c]) is_task[c] = true, ++k;
    }
    Matrix x(m, tokens);
    std::vector<double> importance(tokens, 1.0);
    for (std::size_t t = 0; t < tokens; ++t) {
      const bool task = t % 10 == 0;
      if (task) importance[t] = 10.0;
      for (std::size_t c = 0; c < m; ++c)
        x(c, t) = task == is_task[c] ? (is_task[c] ? 1.0 : 3.0) * xr.normal() : 0.0;
    }
    Calibration cal;
    cal.x = x;
    cal.importance = importance;
    QuantConfig rect;
    rect.hessian_mode = HessianSource::rectified;
    const double er = *quantize_layer(w, cal, rect).report.weighted_proxy_error;
    const double es = *quantize_layer(w, cal, standard_cfg()).report.weighted_proxy_error;
    ok += er <= es;
    strictly += er < es;
    sum_r += er;
    sum_s += es;
  }
  return {ok >= 90, fmt("rectified <= standard (importance-weighted proxy) in %d/100 (need >= "
                        "90), strictly lower in %d; means %.4f vs %.4f",
                        ok, strictly, sum_r / 100, sum_s / 100)};
}

// --- 10 --------------------------------------------------------------------
Outcome seed_norm_ablation() {
  tools::BenchCase c{"two-cluster", tools::Generator::two_cluster, 64, 128, 0, {}, 256};
  double sum1 = 0.0, sum2 = 0.0;
  int runs = 0, l1_better = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = 500 + seed;
    const auto inst = tools::generate_instance(c);
    Calibration cal;
    cal.x = inst.x;
    QuantConfig a, b;
    a.seed_norm = SeedNorm::l1;
    b.seed_norm = SeedNorm::l2;
    const double e1 = quantize_layer(inst.w, cal, a).report.fro_error;
    const double e2 = quantize_layer(inst.w, cal, b).report.fro_error;
    sum1 += e1;
    sum2 += e2;
    l1_better += e1 < e2;
    ++runs;
  }
  return {runs == 20, fmt("l1 and l2 seeds completed %d/20 runs each; mean fro_error l1 %.4f, "
                          "l2 %.4f; l1 lower in %d/20",
                          runs, sum1 / runs, sum2 / runs, l1_better)};
}

// --- 11 --------------------------------------------------------------------
Outcome bit_budget_check() {
  Rng rng(1011);
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 1 + rng.below(80), m = 2 + rng.below(150);
    Matrix w = rng.normal_matrix(n, m);
    for (std::size_t r = 0; r < n; ++r) w(r, rng.below(m) % m) *= 1.0 + 20.0 * (i % 2);
    QuantConfig c = standard_cfg();
    c.max_groups = 1 + i % 2;
    c.group_window = 8 + rng.below(128);
    c.salient_bitplanes = 1 + i % 3;
    c.split_scope = i % 5 == 0 ? SplitScope::row : SplitScope::window;
    const auto q = quantize_layer(w, {}, c);
    const auto bytes = serialize_layer(q.layer);
    const double analytic = bit_budget(q.layer) * static_cast<double>(n * m);
    exact += static_cast<double>(payload_bits(bytes)) == analytic &&
             payload_bits(bytes) == q.report.bits.total();
  }
  Rng big(4096);
  const Matrix w = big.normal_matrix(4096, 4096);
  const auto q = quantize_layer(w, {}, standard_cfg());
  const auto& b = q.report.bits;
  const double per = 4096.0 * 4096.0;
  info(fmt("4096x4096 bits/weight: signs %.4f scales %.4f means %.4f split_flags %.4f "
           "membership %.4f ordering %.4f indices %.4f",
           b.signs / per, b.scales / per, b.means / per, b.split_flags / per, b.membership / per,
           b.ordering / per, b.indices / per));
  QuantConfig one = standard_cfg();
  one.max_groups = 1;
  const Matrix ws = Rng(4097).normal_matrix(512, 512);
  info(fmt("max_groups=1 on 512x512: avg_bits %.4f", quantize_layer(ws, {}, one).report.avg_bits));
  return {exact == 20 && q.report.avg_bits <= 1.15,
          fmt("serialized == analytic on %d/20 layers; 4096x4096 default avg_bits %.4f (need "
              "<= 1.15), %.4f without layout bits",
              exact, q.report.avg_bits, q.report.avg_bits_without_layout)};
}

// --- 12 --------------------------------------------------------------------
Outcome bench_determinism(const std::string& cli, const std::string& suite, const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path a = dir / "run_a.csv", b = dir / "run_b.csv";
  auto bench = [&](const fs::path& out) {
    const std::string cmd = "\"" + cli + "\" --seed 42 bench --suite \"" + suite + "\" --out \"" +
                            out.string() + "\"";
    return std::system(cmd.c_str());
  };
  if (bench(a) != 0 || bench(b) != 0) return {false, "bench exited with an error"};
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const std::string x = slurp(a), y = slurp(b);
  return {!x.empty() && x == y,
          fmt("two runs, %zu bytes each, %s", x.size(), x == y ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: hbvla_acceptance <hbvla-binary> <suite.json> <scratch-dir>\n";
    return 2;
  }
  run(1, "Haar round trip", 5, haar_round_trip);
  run(2, "high-pass energy identity", 5, energy_identity);
  run(3, "greedy pairing vs exact matching", 30, greedy_vs_oracle);
  run(4, "group scale optimality", 10, quantizer_optimality);
  run(5, "projection gradients vs finite differences", 20, gradient_probe);
  run(6, "first-order loss law", 5, first_order_law);
  run(7, "importance-weighted update vs elimination", 5, update_vs_elimination);
  run(8, "end-to-end error ordering", 120, error_ordering);
  run(9, "Hessian formulation ablation", 120, hessian_ablation);
  run(10, "seed norm ablation", 60, seed_norm_ablation);
  run(11, "bit budget", 60, bit_budget_check);
  run(12, "bench determinism", 120,
      [&] { return bench_determinism(argv[1], argv[2], fs::path(argv[3])); });
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
