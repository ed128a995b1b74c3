// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "hbvla/pipeline.hpp"
#include "hbvla/rng.hpp"
#include "hbvla/serialize.hpp"
#include "hbvla/tools/bench.hpp"
#include "oracles.hpp"

using namespace hbvla;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

QuantConfig standard_cfg() {
  QuantConfig c;
  c.hessian_mode = HessianSource::standard;
  return c;
}

// Reference values from tests/fixtures/fixture_reference.py (independent
// numpy reproduction), frozen here.
struct FixtureExpectation {
  std::size_t max_groups;
  std::uint64_t bits;
  double fro_error;
  std::vector<std::vector<double>> w_hat;
};

const FixtureExpectation kFixture[] = {
    {2,
     652,
     0.0009790246467523917,
     {{0.89990234375, -1.30029296875, 0.40007781982421875, 2.1004607677459717},
      {-0.699920654296875, 0.199981689453125, 1.6000595092773438, -0.5004608631134033},
      {1.099853515625, -0.800048828125, -1.8999710083007812, 0.30042725801467896},
      {0.050048828125, 1.449951171875, -0.6001663208007812, -1.200427234172821}}},
    {1,
     480,
     0.0014668482734624731,
     {{0.8994140625, -1.2998046875, 0.40026092529296875, 2.0997314453125},
      {-0.699920654296875, 0.199981689453125, 1.5999984741210938, -0.499359130859375},
      {1.100341796875, -0.800048828125, -1.9000320434570312, 0.2994384765625},
      {0.04931640625, 1.44970703125, -0.6002273559570312, -1.1995849609375}}},
};

void check_round_trip(const QuantizedLayer& q) {
  const auto bytes = serialize_layer(q.layer);
  CHECK(payload_bits(bytes) == bit_breakdown(q.layer).total());
  const auto back = deserialize_layer(bytes);
  CHECK(reconstruct(back) == q.w_hat);
  CHECK(serialize_layer(back) == bytes);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config validation") {
  QuantConfig c;
  CHECK_NOTHROW(c.validate());
  c.group_window = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::configuration);
  c = {};
  c.max_groups = 3;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::configuration);
  c = {};
  c.salient_bitplanes = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::configuration);
  c = {};
  c.damping = -1.0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::configuration);
}

TEST_CASE("neighbour pruning only above the exact-search limit") {
  QuantConfig c;
  CHECK_FALSE(c.effective_neighbors(512).has_value());
  CHECK(c.effective_neighbors(1024) == std::optional<std::size_t>(32));
  c.k_neighbors = 0;
  CHECK_FALSE(c.effective_neighbors(4096).has_value());
  c.k_neighbors = 5000;
  CHECK(c.effective_neighbors(1024) == std::optional<std::size_t>(1023));
}

TEST_CASE("fixture layer matches the frozen reference") {
  const Matrix w = tools::fixture_matrix();
  for (const auto& e : kFixture) {
    CAPTURE(e.max_groups);
    QuantConfig c = standard_cfg();
    c.max_groups = e.max_groups;
    const auto q = quantize_layer(w, {}, c);
    CHECK(q.layer.salient == std::vector<std::size_t>{2, 3});
    CHECK(q.layer.ordering.order == std::vector<std::size_t>{2, 3, 1, 0});
    CHECK(q.report.bits.total() == e.bits);
    CHECK(q.report.avg_bits == static_cast<double>(e.bits) / 16.0);
    CHECK(std::abs(q.report.fro_error - e.fro_error) <= 1e-9);
    CHECK(oracle::max_abs_diff(q.w_hat, Matrix::from_rows(e.w_hat)) <= 1e-9);
    check_round_trip(q);
  }
}

TEST_CASE("Hessian source selection") {
  const Matrix w = tools::fixture_matrix();
  QuantConfig c;
  CHECK(code_of([&] { quantize_layer(w, {}, c); }) == ErrorCode::configuration);
  Calibration cal;
  Rng rng(61);
  cal.x = oracle::random_matrix(rng, 4, 10);
  CHECK(saliency_hessian(w, cal, c).source == HessianSource::standard);
  cal.importance.assign(10, 2.0);
  CHECK(saliency_hessian(w, cal, c).source == HessianSource::rectified);
  const auto id = saliency_hessian(w, {}, standard_cfg());
  CHECK(id.h == Matrix::identity(4));
  cal.x = oracle::random_matrix(rng, 5, 10);
  CHECK(code_of([&] { saliency_hessian(w, cal, c); }) == ErrorCode::dimension);
}

TEST_CASE("fill rules") {
  const Matrix w = Matrix::from_rows({{1, 100, 3, 200}, {5, 100, 7, 200}});
  SaliencyPartition p;
  p.m = 4;
  p.salient = {1, 3};
  p.nonsalient = {0, 2};
  const Matrix f = fill_salient_columns(w, p);
  CHECK(f == Matrix::from_rows({{1, 2, 3, 3}, {5, 6, 7, 7}}));
  const Matrix r = fill_salient_columns(w, p, FillRule::row_mean);
  CHECK(r == Matrix::from_rows({{1, 2, 3, 2}, {5, 6, 7, 6}}));
  p.salient = {0, 1, 2, 3};
  p.nonsalient = {};
  CHECK(code_of([&] { fill_salient_columns(w, p); }) == ErrorCode::degenerate_input);
}

TEST_CASE("salient columns lead the ordering, then the non-salient chain") {
  Rng rng(62);
  Matrix w = oracle::random_matrix(rng, 8, 12);
  for (std::size_t r = 0; r < 8; ++r) w(r, 7) *= 30.0, w(r, 2) *= 30.0;
  const auto q = quantize_layer(w, {}, standard_cfg());
  REQUIRE(q.layer.salient == std::vector<std::size_t>{2, 7});
  CHECK(q.layer.ordering.order[0] == 2);
  CHECK(q.layer.ordering.order[1] == 7);
  CHECK(q.report.salient_count == 2);
  check_round_trip(q);
}

TEST_CASE("reconstruction decomposes into non-salient and salient parts") {
  Rng rng(63);
  Matrix w = oracle::random_matrix(rng, 10, 14);
  for (std::size_t r = 0; r < 10; ++r) w(r, 5) *= 25.0, w(r, 9) *= 25.0;
  const auto cfg = standard_cfg();
  const auto q = quantize_layer(w, {}, cfg);
  REQUIRE_FALSE(q.partition.salient.empty());
  const Matrix filled = fill_salient_columns(w, q.partition, cfg.fill_rule);
  const auto ns = quantize_nonsalient(filled, cfg, q.partition.salient);
  const auto sal = quantize_salient_residual(w, ns.w_hat, q.partition, cfg);
  CHECK(oracle::max_abs_diff(ns.w_hat + sal.w_hat, q.w_hat) <= 1e-12);
  for (std::size_t c : q.partition.nonsalient)
    for (std::size_t r = 0; r < 10; ++r) CHECK(sal.w_hat(r, c) == 0.0);
  CHECK(oracle::max_abs_diff(reconstruct_nonsalient(q.layer), ns.w_hat) <= 1e-12);
  // The residual pass improves the salient columns.
  const Matrix ws = gather_columns(w, q.partition.salient);
  CHECK(frobenius_distance(ws, gather_columns(q.w_hat, q.partition.salient)) <
        frobenius_distance(ws, gather_columns(ns.w_hat, q.partition.salient)));
  CHECK(q.report.fro_error < q.report.nonsalient_fro_error);
}

TEST_CASE("orthonormal transform: band error equals spatial error") {
  Rng rng(64);
  for (std::size_t m : {16, 17}) {
    const Matrix w = oracle::random_matrix(rng, 6, m);
    QuantConfig c = standard_cfg();
    c.normalization = HaarNorm::orthonormal;
    const auto ns = quantize_nonsalient(w, c);
    CHECK(std::abs(ns.haar_domain_error - frobenius_distance(w, ns.w_hat)) <= 1e-10);
  }
}

TEST_CASE("permutation never increases high-pass energy on two-cluster weights") {
  Rng rng(65);
  const Matrix w = tools::two_cluster_weights(16, 64, rng);
  QuantConfig c = standard_cfg();
  const auto on = quantize_nonsalient(w, c);
  c.permute = false;
  const auto off = quantize_nonsalient(w, c);
  CHECK(off.ordering.is_identity());
  CHECK(on.highpass_ordered < on.highpass_identity);
  CHECK(off.highpass_ordered == off.highpass_identity);
}

TEST_CASE("serialization round trip across configurations and shapes") {
  Rng rng(66);
  struct Variant {
    std::size_t n, m;
    std::size_t max_groups, planes, window;
    SplitScope scope;
    HaarNorm norm;
  };
  const Variant variants[] = {
      {4, 4, 2, 1, 128, SplitScope::window, HaarNorm::average},
      {7, 9, 2, 1, 4, SplitScope::window, HaarNorm::average},
      {9, 7, 1, 2, 3, SplitScope::window, HaarNorm::orthonormal},
      {16, 33, 2, 3, 5, SplitScope::row, HaarNorm::average},
      {2, 2, 2, 1, 1, SplitScope::window, HaarNorm::average},
      {1, 6, 2, 1, 128, SplitScope::window, HaarNorm::average},
      {33, 64, 2, 2, 16, SplitScope::window, HaarNorm::orthonormal},
  };
  for (const auto& v : variants) {
    CAPTURE(v.n);
    CAPTURE(v.m);
    Matrix w = oracle::random_matrix(rng, v.n, v.m);
    for (std::size_t r = 0; r < v.n; ++r) w(r, v.m / 2) *= 20.0;
    QuantConfig c = standard_cfg();
    c.max_groups = v.max_groups;
    c.salient_bitplanes = v.planes;
    c.group_window = v.window;
    c.split_scope = v.scope;
    c.normalization = v.norm;
    const auto q = quantize_layer(w, {}, c);
    CHECK(q.report.avg_bits ==
          static_cast<double>(q.report.bits.total()) / static_cast<double>(v.n * v.m));
    check_round_trip(q);
  }
}

TEST_CASE("more salient planes do not increase error") {
  Rng rng(67);
  Matrix w = oracle::random_matrix(rng, 16, 24);
  for (std::size_t r = 0; r < 16; ++r) w(r, 3) *= 20.0, w(r, 4) *= 20.0;
  QuantConfig c = standard_cfg();
  double prev = INFINITY;
  for (std::size_t planes = 1; planes <= 3; ++planes) {
    c.salient_bitplanes = planes;
    const auto q = quantize_layer(w, {}, c);
    CHECK(q.report.fro_error <= prev + 1e-12);
    prev = q.report.fro_error;
  }
}

TEST_CASE("deserialization rejects corrupt input") {
  Rng rng(68);
  const auto q = quantize_layer(oracle::random_matrix(rng, 6, 10), {}, standard_cfg());
  const auto good = serialize_layer(q.layer);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { deserialize_layer(bad_magic); }) == ErrorCode::format);

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  const auto c = code_of([&] { deserialize_layer(flipped); });
  CHECK((c == ErrorCode::format || c == ErrorCode::truncation));

  const std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<long>(good.size() - 7));
  const auto ct = code_of([&] { deserialize_layer(cut); });
  CHECK((ct == ErrorCode::truncation || ct == ErrorCode::format));
  CHECK(code_of([&] { deserialize_layer(std::vector<std::uint8_t>(good.begin(), good.begin() + 5)); }) ==
        ErrorCode::truncation);

  auto extra = good;
  extra.push_back(0);
  CHECK(code_of([&] { deserialize_layer(extra); }) == ErrorCode::format);
}

TEST_CASE("CRC32 matches the standard check value") {
  const std::string s = "123456789";
  CHECK(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xCBF43926u);
}

TEST_CASE("proxy error") {
  Rng rng(69);
  const Matrix w = oracle::random_matrix(rng, 3, 4);
  const Matrix wh = oracle::random_matrix(rng, 3, 4);
  const Matrix x = oracle::random_matrix(rng, 4, 10);
  const double full = frobenius_norm(oracle::naive_matmul(w - wh, x));
  CHECK(proxy_error(w, wh, x, 100) == doctest::Approx(full).epsilon(1e-12));
  CHECK(proxy_error(w, wh, x, 10, std::vector<double>(10, 4.0)) ==
        doctest::Approx(2.0 * full).epsilon(1e-12));
  CHECK(proxy_error(w, w, x, 10) == 0.0);
  CHECK(code_of([&] { proxy_error(w, wh, Matrix(3, 10), 10); }) == ErrorCode::dimension);
}

TEST_CASE("rectified mode with calibration reports both proxy errors") {
  Rng rng(70);
  const Matrix w = oracle::random_matrix(rng, 8, 16);
  Calibration cal;
  cal.x = oracle::random_matrix(rng, 16, 40);
  cal.importance.assign(40, 1.0);
  const auto q = quantize_layer(w, cal, QuantConfig{});
  REQUIRE(q.report.proxy_error.has_value());
  REQUIRE(q.report.weighted_proxy_error.has_value());
  CHECK(*q.report.weighted_proxy_error == doctest::Approx(*q.report.proxy_error).epsilon(1e-12));
  for (const char* stage : {"saliency", "nonsalient", "salient", "reconstruct"})
    CHECK(q.report.timing_ms.count(stage) == 1);
}

TEST_CASE("quantization is deterministic") {
  Rng rng(71);
  const Matrix w = oracle::random_matrix(rng, 12, 20);
  const auto a = quantize_layer(w, {}, standard_cfg());
  const auto b = quantize_layer(w, {}, standard_cfg());
  CHECK(a.w_hat == b.w_hat);
  CHECK(serialize_layer(a.layer) == serialize_layer(b.layer));
}

TEST_CASE("degenerate layers") {
  CHECK(code_of([&] { quantize_layer(Matrix(3, 1), {}, standard_cfg()); }) ==
        ErrorCode::degenerate_input);
  CHECK(code_of([&] { quantize_layer(Matrix(), {}, standard_cfg()); }) ==
        ErrorCode::degenerate_input);
  // A single row keeps every column non-salient.
  Rng rng(72);
  const auto q = quantize_layer(oracle::random_matrix(rng, 1, 8), {}, standard_cfg());
  CHECK(q.layer.salient.empty());
  check_round_trip(q);
}

}  // TEST_SUITE
