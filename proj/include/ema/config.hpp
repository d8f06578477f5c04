#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ema/flow.hpp"
#include "ema/locator.hpp"
#include "ema/schedule.hpp"

namespace ema {

// Service configuration file (JSON). Relative paths resolve against the
// directory holding the config file.
struct ServiceConfig {
  std::vector<std::string> flow_paths;  // added on top of the bundled flows
  std::optional<std::string> zone_map_path;
  std::string store_dir = "ema-store";
  std::string host = "127.0.0.1";
  int port = 8080;
  PromptPolicy policy;
  RateLimit rate_limit;
  std::string active_flow = "infection_risk";
  bool sync_writes = true;
};

ServiceConfig parse_service_config(std::string_view json_text, const std::string& base_dir = ".");
ServiceConfig load_service_config(const std::string& path);

// Bundled flows plus every file in config.flow_paths.
FlowRegistry build_registry(const ServiceConfig& config);
// Empty map when no zone map is configured.
ZoneMap load_zone_map(const ServiceConfig& config);

// EMA_STORE_DIR, when set and non-empty, overrides config.store_dir.
std::string effective_store_dir(const ServiceConfig& config);

}  // namespace ema
