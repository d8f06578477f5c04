#include "ema/locator.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ema/error.hpp"
#include "json.hpp"

namespace ema {

using nlohmann::json;

std::string_view to_string(Ventilation v) { return v == Ventilation::Natural ? "natural" : "mechanical"; }

Ventilation parse_ventilation(std::string_view text) {
  if (text == "natural") return Ventilation::Natural;
  if (text == "mechanical") return Ventilation::Mechanical;
  throw ParseError("ventilation must be \"natural\" or \"mechanical\", got '" + std::string(text) + "'",
                   "ventilation");
}

std::string_view to_string(Confidence c) { return c == Confidence::High ? "high" : "low"; }

ZoneMap::ZoneMap(std::vector<Zone> zones) : zones_(std::move(zones)) {
  std::sort(zones_.begin(), zones_.end(), [](const Zone& a, const Zone& b) { return a.zone_id < b.zone_id; });
  for (std::size_t i = 0; i < zones_.size(); ++i) {
    const Zone& zone = zones_[i];
    if (zone.zone_id.empty()) throw std::invalid_argument("zone id must not be empty");
    if (zone.beacon_ids.empty()) throw std::invalid_argument("zone '" + zone.zone_id + "' has no beacons");
    if (!by_id_.emplace(zone.zone_id, i).second) {
      throw std::invalid_argument("zone '" + zone.zone_id + "' defined twice");
    }
    for (const auto& beacon : zone.beacon_ids) {
      if (!by_beacon_.emplace(beacon, i).second) {
        throw std::invalid_argument("beacon '" + beacon + "' assigned to more than one zone");
      }
    }
  }
}

ZoneMap ZoneMap::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed zone map: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("zones") || !doc["zones"].is_array()) {
    throw ParseError("zone map must be an object with a 'zones' array", "/zones");
  }
  std::vector<Zone> zones;
  for (std::size_t i = 0; i < doc["zones"].size(); ++i) {
    const json& z = doc["zones"][i];
    const std::string where = "/zones/" + std::to_string(i);
    try {
      Zone zone;
      zone.zone_id = z.at("zone_id").get<std::string>();
      zone.name = z.value("name", zone.zone_id);
      zone.ventilation = parse_ventilation(z.at("ventilation").get<std::string>());
      zone.space_type = z.value("space_type", std::string{});
      for (const auto& b : z.at("beacon_ids")) zone.beacon_ids.insert(b.get<std::string>());
      zones.push_back(std::move(zone));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid zone entry: ") + e.what(), where);
    }
  }
  try {
    return ZoneMap(std::move(zones));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), "/zones");
  }
}

ZoneMap ZoneMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read zone map '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ZoneMap::to_json() const {
  nlohmann::ordered_json doc;
  doc["zones"] = nlohmann::ordered_json::array();
  for (const auto& zone : zones_) {
    nlohmann::ordered_json z;
    z["zone_id"] = zone.zone_id;
    z["name"] = zone.name;
    z["ventilation"] = to_string(zone.ventilation);
    z["space_type"] = zone.space_type;
    z["beacon_ids"] = zone.beacon_ids;
    doc["zones"].push_back(std::move(z));
  }
  return doc.dump(2) + "\n";
}

const Zone* ZoneMap::find(std::string_view zone_id) const {
  auto it = by_id_.find(zone_id);
  return it == by_id_.end() ? nullptr : &zones_[it->second];
}

const Zone* ZoneMap::zone_of_beacon(std::string_view beacon_id) const {
  auto it = by_beacon_.find(beacon_id);
  return it == by_beacon_.end() ? nullptr : &zones_[it->second];
}

std::optional<LocationFix> resolve_zone(std::span<const BeaconObservation> observations, Timestamp at,
                                        const ZoneMap& map, Millis window) {
  const Timestamp from = at - window;
  struct Sum {
    long long total = 0;
    long long count = 0;
  };
  std::map<std::string_view, Sum> sums;  // ordered, so ties resolve to the smallest id
  for (const auto& obs : observations) {
    if (obs.observed_at < from || obs.observed_at > at) continue;
    Sum& s = sums[obs.beacon_id];
    s.total += obs.rssi;
    s.count += 1;
  }
  if (sums.empty()) return std::nullopt;

  std::string_view best_id;
  double best = 0.0;
  double runner_up = 0.0;
  bool have_runner_up = false;
  bool first = true;
  for (const auto& [beacon, s] : sums) {
    const double mean = static_cast<double>(s.total) / static_cast<double>(s.count);
    if (first) {
      best_id = beacon;
      best = mean;
      first = false;
    } else if (mean > best) {
      runner_up = best;
      have_runner_up = true;
      best_id = beacon;
      best = mean;
    } else if (!have_runner_up || mean > runner_up) {
      runner_up = mean;
      have_runner_up = true;
    }
  }

  const Zone* zone = map.zone_of_beacon(best_id);
  if (zone == nullptr) throw UnknownBeaconError(std::string(best_id));
  LocationFix fix;
  fix.zone_id = zone->zone_id;
  fix.confidence = (!have_runner_up || best - runner_up >= kHighConfidenceMarginDb) ? Confidence::High : Confidence::Low;
  fix.window_start = from;
  fix.window_end = at;
  return fix;
}

Ventilation zone_ventilation(const ZoneMap& map, std::string_view zone_id) {
  const Zone* zone = map.find(zone_id);
  if (zone == nullptr) throw UnknownZoneError(std::string(zone_id));
  return zone->ventilation;
}

std::string zone_attribute(const ZoneMap& map, std::string_view zone_id, ZoneAttributeKind attribute) {
  const Zone* zone = map.find(zone_id);
  if (zone == nullptr) throw UnknownZoneError(std::string(zone_id));
  if (attribute == ZoneAttributeKind::Ventilation) return std::string(to_string(zone->ventilation));
  return zone->space_type;
}

BeaconObservation parse_observation_line(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed observation: ") + e.what());
  }
  BeaconObservation obs;
  try {
    obs.participant_id = doc.at("participant_id").get<std::string>();
    obs.beacon_id = doc.at("beacon_id").get<std::string>();
    obs.rssi = doc.at("rssi").get<int>();
    obs.observed_at = parse_timestamp(doc.at("observed_at").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid observation: ") + e.what());
  }
  if (obs.beacon_id.empty()) throw ParseError("beacon_id must not be empty", "beacon_id");
  if (obs.rssi > 0) throw ParseError("rssi must be <= 0 dBm", "rssi");
  return obs;
}

std::string observation_to_json(const BeaconObservation& obs) {
  nlohmann::ordered_json doc;
  doc["participant_id"] = obs.participant_id;
  doc["beacon_id"] = obs.beacon_id;
  doc["rssi"] = obs.rssi;
  doc["observed_at"] = format_timestamp(obs.observed_at);
  return doc.dump();
}

}  // namespace ema
