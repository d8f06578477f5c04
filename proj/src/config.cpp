#include "ema/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ema/error.hpp"
#include "json_io.hpp"

namespace ema {

namespace detail {

using nlohmann::json;

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

json parse_json_document(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed ") + what + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("cannot read ") + what + " '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PromptPolicy policy_from_json(const json& block) {
  PromptPolicy policy;
  if (!block.is_object()) throw ParseError("prompt block must be an object", "prompt");
  try {
    if (block.contains("interval_hours")) policy.interval_hours = block.at("interval_hours").get<int>();
    if (block.contains("window_start")) {
      policy.window_start = TimeOfDay::parse(block.at("window_start").get<std::string>());
    }
    if (block.contains("window_end")) policy.window_end = TimeOfDay::parse(block.at("window_end").get<std::string>());
    if (block.contains("timezone")) policy.timezone = TimeZone::locate(block.at("timezone").get<std::string>());
    if (block.contains("anchor")) {
      const auto anchor = block.at("anchor").get<std::string>();
      if (anchor == "prompt") {
        policy.anchor = PromptAnchor::Prompt;
      } else if (anchor == "response") {
        policy.anchor = PromptAnchor::Response;
      } else {
        throw ParseError("prompt.anchor must be \"prompt\" or \"response\"", "prompt.anchor");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid prompt block: ") + e.what(), "prompt");
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), "prompt.timezone");
  }
  try {
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), "prompt");
  }
  return policy;
}

RateLimit rate_limit_from_json(const json& block) {
  RateLimit limit;
  try {
    if (block.contains("min_gap_minutes")) {
      limit.min_gap = std::chrono::minutes(block.at("min_gap_minutes").get<int>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid rate_limit block: ") + e.what(), "rate_limit");
  }
  if (limit.min_gap <= Millis::zero()) throw ParseError("rate_limit.min_gap_minutes must be positive", "rate_limit");
  return limit;
}

ZoneMap zone_map_from_json(const json& value, const std::string& base_dir) {
  if (value.is_string()) return ZoneMap::load(resolve_path(value.get<std::string>(), base_dir));
  return ZoneMap::parse(value.dump());
}

}  // namespace detail

ServiceConfig parse_service_config(std::string_view json_text, const std::string& base_dir) {
  using nlohmann::json;
  const json doc = detail::parse_json_document(json_text, "service config");
  if (!doc.is_object()) throw ParseError("service config must be a JSON object");
  ServiceConfig config;
  try {
    if (doc.contains("flows")) {
      for (const auto& f : doc.at("flows")) config.flow_paths.push_back(detail::resolve_path(f.get<std::string>(), base_dir));
    }
    if (doc.contains("zone_map") && !doc.at("zone_map").is_null()) {
      config.zone_map_path = detail::resolve_path(doc.at("zone_map").get<std::string>(), base_dir);
    }
    if (doc.contains("store_dir")) config.store_dir = detail::resolve_path(doc.at("store_dir").get<std::string>(), base_dir);
    if (doc.contains("host")) config.host = doc.at("host").get<std::string>();
    if (doc.contains("port")) config.port = doc.at("port").get<int>();
    if (doc.contains("active_flow")) config.active_flow = doc.at("active_flow").get<std::string>();
    if (doc.contains("sync_writes")) config.sync_writes = doc.at("sync_writes").get<bool>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid service config: ") + e.what());
  }
  if (doc.contains("prompt")) config.policy = detail::policy_from_json(doc.at("prompt"));
  if (doc.contains("rate_limit")) config.rate_limit = detail::rate_limit_from_json(doc.at("rate_limit"));
  if (config.port < 0 || config.port > 65535) throw ParseError("port out of range", "port");
  return config;
}

ServiceConfig load_service_config(const std::string& path) {
  const std::string text = detail::read_text_file(path, "config file");
  return parse_service_config(text, std::filesystem::path(path).parent_path().string());
}

FlowRegistry build_registry(const ServiceConfig& config) {
  FlowRegistry registry = FlowRegistry::with_canonical_flows();
  for (const auto& path : config.flow_paths) registry.add(load_flow_file(path));
  return registry;
}

ZoneMap load_zone_map(const ServiceConfig& config) {
  if (!config.zone_map_path) return ZoneMap{};
  return ZoneMap::load(*config.zone_map_path);
}

std::string effective_store_dir(const ServiceConfig& config) {
  if (const char* env = std::getenv("EMA_STORE_DIR"); env != nullptr && *env != '\0') return env;
  return config.store_dir;
}

}  // namespace ema
