// SPDX-License-Identifier: Apache-2.0
#include "hbvla/tools/config_json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace hbvla::tools {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  fail(ErrorCode::configuration, "config field '" + key + "': " + what);
}

std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) bad(key, "expected a non-negative integer");
  return j.get<std::size_t>();
}

template <typename E>
E get_enum(const json& j, const std::string& key, std::initializer_list<std::pair<const char*, E>> opts) {
  if (!j.is_string()) bad(key, "expected a string");
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : opts)
    if (s == name) return value;
  bad(key, "unknown value '" + s + "'");
}

const char* name_of(SeedNorm v) { return v == SeedNorm::l1 ? "l1" : "l2"; }
const char* name_of(HessianSource v) { return v == HessianSource::standard ? "standard" : "rectified"; }
const char* name_of(HaarNorm v) { return v == HaarNorm::average ? "average" : "orthonormal"; }
const char* name_of(ScoreRule v) { return v == ScoreRule::inverse_diag ? "inverse_diag" : "hessian_diag"; }
const char* name_of(FillRule v) { return v == FillRule::flanking ? "flanking" : "row_mean"; }
const char* name_of(SplitScope v) { return v == SplitScope::window ? "window" : "row"; }

}  // namespace

QuantConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::configuration, "config must be a JSON object");
  QuantConfig c;
  static const std::set<std::string> known = {
      "candidate_budget", "group_window", "max_groups", "seed_norm", "hessian_mode",
      "normalization", "k_neighbors", "exact_pairing_max_cols", "damping", "salient_bitplanes",
      "score_rule", "fill_rule", "split_scope", "permute", "proxy_tokens"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) bad(key, "unknown field");
    if (key == "candidate_budget") c.candidate_budget = get_count(value, key);
    else if (key == "group_window") c.group_window = get_count(value, key);
    else if (key == "max_groups") c.max_groups = get_count(value, key);
    else if (key == "exact_pairing_max_cols") c.exact_pairing_max_cols = get_count(value, key);
    else if (key == "salient_bitplanes") c.salient_bitplanes = get_count(value, key);
    else if (key == "proxy_tokens") c.proxy_tokens = get_count(value, key);
    else if (key == "k_neighbors") c.k_neighbors = value.is_null() ? 0 : get_count(value, key);
    else if (key == "damping") {
      if (!value.is_number()) bad(key, "expected a number");
      c.damping = value.get<double>();
    } else if (key == "permute") {
      if (!value.is_boolean()) bad(key, "expected a boolean");
      c.permute = value.get<bool>();
    } else if (key == "seed_norm") {
      c.seed_norm = get_enum<SeedNorm>(value, key, {{"l1", SeedNorm::l1}, {"l2", SeedNorm::l2}});
    } else if (key == "hessian_mode") {
      c.hessian_mode = get_enum<HessianSource>(
          value, key, {{"standard", HessianSource::standard}, {"rectified", HessianSource::rectified}});
    } else if (key == "normalization") {
      c.normalization = get_enum<HaarNorm>(
          value, key, {{"average", HaarNorm::average}, {"orthonormal", HaarNorm::orthonormal}});
    } else if (key == "score_rule") {
      c.score_rule = get_enum<ScoreRule>(
          value, key, {{"inverse_diag", ScoreRule::inverse_diag}, {"hessian_diag", ScoreRule::hessian_diag}});
    } else if (key == "fill_rule") {
      c.fill_rule = get_enum<FillRule>(value, key, {{"flanking", FillRule::flanking}, {"row_mean", FillRule::row_mean}});
    } else if (key == "split_scope") {
      c.split_scope = get_enum<SplitScope>(value, key, {{"window", SplitScope::window}, {"row", SplitScope::row}});
    }
  }
  c.validate();
  return c;
}

QuantConfig parse_config(std::string_view json_text) {
  try {
    return config_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    fail(ErrorCode::configuration, std::string("config: ") + e.what());
  }
}

QuantConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

json config_to_json(const QuantConfig& c) {
  json j;
  j["candidate_budget"] = c.candidate_budget;
  j["group_window"] = c.group_window;
  j["max_groups"] = c.max_groups;
  j["seed_norm"] = name_of(c.seed_norm);
  j["hessian_mode"] = name_of(c.hessian_mode);
  j["normalization"] = name_of(c.normalization);
  j["k_neighbors"] = c.k_neighbors == 0 ? json(nullptr) : json(c.k_neighbors);
  j["exact_pairing_max_cols"] = c.exact_pairing_max_cols;
  j["damping"] = c.damping;
  j["salient_bitplanes"] = c.salient_bitplanes;
  j["score_rule"] = name_of(c.score_rule);
  j["fill_rule"] = name_of(c.fill_rule);
  j["split_scope"] = name_of(c.split_scope);
  j["permute"] = c.permute;
  j["proxy_tokens"] = c.proxy_tokens;
  return j;
}

json report_to_json(const QuantizedLayer& q) {
  const auto& r = q.report;
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["shape"] = {q.layer.n, q.layer.m};
  j["config"] = config_to_json(r.config);
  j["fro_error"] = r.fro_error;
  j["proxy_error"] = r.proxy_error ? json(*r.proxy_error) : json(nullptr);
  j["weighted_proxy_error"] = r.weighted_proxy_error ? json(*r.weighted_proxy_error) : json(nullptr);
  j["avg_bits"] = r.avg_bits;
  j["avg_bits_without_layout"] = r.avg_bits_without_layout;
  j["bits"] = {{"signs", r.bits.signs},           {"scales", r.bits.scales},
               {"means", r.bits.means},           {"split_flags", r.bits.split_flags},
               {"membership", r.bits.membership}, {"ordering", r.bits.ordering},
               {"indices", r.bits.indices},       {"total", r.bits.total()}};
  j["salient_columns"] = q.layer.salient;
  j["nonsalient_fro_error"] = r.nonsalient_fro_error;
  j["haar_domain_error"] = r.haar_domain_error;
  j["highpass_energy"] = {{"identity", r.highpass_identity}, {"ordered", r.highpass_ordered}};
  j["timing_ms"] = r.timing_ms;
  return j;
}

}  // namespace hbvla::tools
