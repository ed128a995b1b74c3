// SPDX-License-Identifier: Apache-2.0
#include "hbvla/tools/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace hbvla::tools {

namespace {

constexpr Method kMethods[] = {Method::plain_sign, Method::haar_noperm, Method::hbvla};

}  // namespace

std::string_view to_string(Generator g) noexcept {
  switch (g) {
    case Generator::gaussian: return "gaussian";
    case Generator::two_cluster: return "two-cluster";
    case Generator::heavy_tail_cols: return "heavy-tail-cols";
    case Generator::fixture: return "fixture";
  }
  return "?";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::plain_sign: return "plain-sign";
    case Method::haar_noperm: return "haar-noperm";
    case Method::hbvla: return "hbvla";
  }
  return "?";
}

Generator parse_generator(std::string_view s) {
  for (auto g : {Generator::gaussian, Generator::two_cluster, Generator::heavy_tail_cols, Generator::fixture})
    if (to_string(g) == s) return g;
  fail(ErrorCode::format, "unknown generator '" + std::string(s) + "'");
}

Method parse_method(std::string_view s) {
  for (auto m : kMethods)
    if (to_string(m) == s) return m;
  fail(ErrorCode::format, "unknown method '" + std::string(s) + "'");
}

Matrix baseline_plain_sign(const Matrix& w) {
  Matrix out(w.rows(), w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double alpha = 0.0;
    for (double v : row) alpha += std::abs(v);
    alpha /= static_cast<double>(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out(r, c) = row[c] >= 0.0 ? alpha : -alpha;
  }
  return out;
}

double plain_sign_bits(std::size_t n, std::size_t m) noexcept {
  return static_cast<double>(n * m + 16 * n) / static_cast<double>(n * m);
}

QuantizedLayer baseline_haar_noperm(const Matrix& w, const Calibration& calib, QuantConfig cfg) {
  cfg.permute = false;
  return quantize_layer(w, calib, cfg);
}

MethodResult run_method(Method method, const Matrix& w, const Calibration& calib,
                        const QuantConfig& cfg) {
  switch (method) {
    case Method::plain_sign:
      return {baseline_plain_sign(w), plain_sign_bits(w.rows(), w.cols())};
    case Method::haar_noperm: {
      auto q = baseline_haar_noperm(w, calib, cfg);
      return {std::move(q.w_hat), q.report.avg_bits};
    }
    case Method::hbvla: {
      auto q = quantize_layer(w, calib, cfg);
      return {std::move(q.w_hat), q.report.avg_bits};
    }
  }
  fail(ErrorCode::configuration, "unknown method");
}

std::size_t thread_budget() {
  if (const char* env = std::getenv("HBVLA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::vector<BenchRow> run_case(const BenchCase& c, const QuantConfig& cfg, std::uint64_t run_seed) {
  const BenchInstance inst = generate_instance(c, run_seed);
  Calibration calib;
  calib.x = inst.x;
  std::vector<BenchRow> rows;
  for (Method method : c.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    const MethodResult res = run_method(method, inst.w, calib, cfg);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    BenchRow row;
    row.case_name = c.name;
    row.method = method;
    row.fro_error = frobenius_distance(inst.w, res.w_hat);
    row.proxy_error = proxy_error(inst.w, res.w_hat, inst.x, cfg.proxy_tokens);
    row.avg_bits = res.avg_bits;
    row.ms = ms;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<BenchRow> run_suite(const std::vector<BenchCase>& cases, const QuantConfig& cfg,
                                std::uint64_t run_seed, std::size_t threads) {
  cfg.validate();
  std::vector<std::vector<BenchRow>> per_case(cases.size());
  std::vector<std::exception_ptr> errors(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        per_case[i] = run_case(cases[i], cfg, run_seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(cases.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<BenchRow> rows;
  for (auto& v : per_case) std::move(v.begin(), v.end(), std::back_inserter(rows));
  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    if (a.case_name != b.case_name) return a.case_name < b.case_name;
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });
  return rows;
}

std::vector<BenchCase> parse_suite(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("suite: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("cases") || !j["cases"].is_array()) {
      fail(ErrorCode::format, "suite: expected an object with a 'cases' array");
    }
    std::vector<BenchCase> cases;
    for (const auto& jc : j["cases"]) {
      BenchCase c;
      c.name = jc.at("name").get<std::string>();
      c.generator = parse_generator(jc.at("generator").get<std::string>());
      const auto dims = jc.at("dims");
      if (!dims.is_array() || dims.size() != 2) fail(ErrorCode::format, "suite: dims must be [n, m]");
      c.n = dims[0].get<std::size_t>();
      c.m = dims[1].get<std::size_t>();
      if (c.n == 0 || c.m == 0) fail(ErrorCode::format, "suite: case " + c.name + " has zero dims");
      c.seed = jc.at("seed").get<std::uint64_t>();
      if (jc.contains("methods")) {
        for (const auto& m : jc["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
      } else {
        c.methods.assign(std::begin(kMethods), std::end(kMethods));
      }
      if (jc.contains("calib_tokens")) c.calib_tokens = jc["calib_tokens"].get<std::size_t>();
      cases.push_back(std::move(c));
    }
    std::vector<std::string> names;
    for (const auto& c : cases) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
      fail(ErrorCode::format, "suite: case names must be unique");
    }
    return cases;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("suite: ") + e.what());
  }
}

std::vector<BenchCase> load_suite(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::io, "cannot open suite " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_suite(ss.str());
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_timing) {
  out << kCsvHeader << "\r\n";
  for (const auto& r : rows) {
    out << csv_field(r.case_name) << ',' << to_string(r.method) << ',' << format_double(r.fro_error)
        << ',' << (r.proxy_error ? format_double(*r.proxy_error) : "") << ','
        << format_double(r.avg_bits) << ',' << (with_timing ? format_double(r.ms) : "") << "\r\n";
  }
}

}  // namespace hbvla::tools
