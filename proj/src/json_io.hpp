#pragma once

// JSON readers shared by the config loaders.

#include "ema/locator.hpp"
#include "ema/schedule.hpp"
#include "json.hpp"

namespace ema::detail {

// `prompt` block: interval_hours, window_start, window_end, timezone, anchor.
PromptPolicy policy_from_json(const nlohmann::json& block);
RateLimit rate_limit_from_json(const nlohmann::json& block);
// Inline zone map object or path (resolved against base_dir).
ZoneMap zone_map_from_json(const nlohmann::json& value, const std::string& base_dir);
std::string resolve_path(const std::string& path, const std::string& base_dir);
nlohmann::json parse_json_document(std::string_view text, const char* what);
std::string read_text_file(const std::string& path, const char* what);

}  // namespace ema::detail
