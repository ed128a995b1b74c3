// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string_view>

#include "hbvla/pipeline.hpp"
#include "json.hpp"

namespace hbvla::tools {

inline constexpr int kReportSchemaVersion = 1;

/// Every field is optional; missing fields keep their defaults. Unknown keys
/// and ill-typed values raise ErrorCode::configuration.
QuantConfig config_from_json(const nlohmann::json& j);
QuantConfig parse_config(std::string_view json_text);
QuantConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const QuantConfig& cfg);

nlohmann::json report_to_json(const QuantizedLayer& q);

}  // namespace hbvla::tools
