// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hbvla/matrix.hpp"
#include "hbvla/pipeline.hpp"
#include "hbvla/rng.hpp"

namespace hbvla::tools {

enum class Generator { gaussian, two_cluster, heavy_tail_cols, fixture };
enum class Method { plain_sign, haar_noperm, hbvla };

std::string_view to_string(Generator g) noexcept;
std::string_view to_string(Method m) noexcept;
Generator parse_generator(std::string_view s);
Method parse_method(std::string_view s);

struct BenchCase {
  std::string name;
  Generator generator = Generator::gaussian;
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::vector<Method> methods;
  std::size_t calib_tokens = 256;
};

struct BenchInstance {
  Matrix w;  // n x m
  Matrix x;  // m x calib_tokens
};

/// Built-in 4x4 matrix used by the `fixture` generator.
Matrix fixture_matrix();

Matrix gaussian_weights(std::size_t n, std::size_t m, Rng& rng);
/// Column positions of the two clusters: a random balanced assignment, or
/// strict alternation (even columns in one cluster, odd in the other).
enum class ClusterLayout { shuffled, alternating };

/// Columns drawn from N(mu1, I) or N(mu2, I), ||mu1 - mu2|| = separation, with
/// balanced cluster sizes.
Matrix two_cluster_weights(std::size_t n, std::size_t m, Rng& rng, double separation = 10.0,
                           ClusterLayout layout = ClusterLayout::shuffled);
/// Gaussian with 5% of the columns (at least one) scaled by 10.
Matrix heavy_tail_col_weights(std::size_t n, std::size_t m, Rng& rng);

/// Seed actually used for a case: the case seed mixed with the run seed.
std::uint64_t case_seed(const BenchCase& c, std::uint64_t run_seed) noexcept;
BenchInstance generate_instance(const BenchCase& c, std::uint64_t run_seed = 0);

/// alpha * sign(w) per row, alpha = mean |w_row|, sign(0) = +1.
Matrix baseline_plain_sign(const Matrix& w);
/// 1 sign bit per weight plus one 16-bit scale per row.
double plain_sign_bits(std::size_t n, std::size_t m) noexcept;

/// Full pipeline with the column ordering forced to identity.
QuantizedLayer baseline_haar_noperm(const Matrix& w, const Calibration& calib, QuantConfig cfg);

struct MethodResult {
  Matrix w_hat;
  double avg_bits = 0.0;
};

MethodResult run_method(Method method, const Matrix& w, const Calibration& calib,
                        const QuantConfig& cfg);

struct BenchRow {
  std::string case_name;
  Method method = Method::hbvla;
  double fro_error = 0.0;
  std::optional<double> proxy_error;
  double avg_bits = 0.0;
  double ms = 0.0;
};

/// Worker count from HBVLA_THREADS (positive integer), else the hardware
/// concurrency.
std::size_t thread_budget();

/// Runs every (case, method). Rows come back sorted by case name, then
/// method, regardless of scheduling.
std::vector<BenchRow> run_suite(const std::vector<BenchCase>& cases, const QuantConfig& cfg,
                                std::uint64_t run_seed = 0, std::size_t threads = 1);

std::vector<BenchCase> load_suite(const std::filesystem::path& path);
std::vector<BenchCase> parse_suite(std::string_view json_text);

inline constexpr std::string_view kCsvHeader = "case,method,fro_error,proxy_error,avg_bits,ms";

/// RFC-4180 CSV. The ms column is left empty unless `with_timing`, so output
/// is byte-stable across runs.
void write_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_timing = false);

/// Grouped bar charts (one SVG per metric) into `dir`.
void write_svg(const std::filesystem::path& dir, const std::vector<BenchRow>& rows);

std::string csv_field(std::string_view s);
std::string format_double(double v);

}  // namespace hbvla::tools
