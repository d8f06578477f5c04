#pragma once

// Zone attribution from BLE beacon sightings: the beacon with the strongest
// mean RSSI over a short window decides the zone.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ema/time.hpp"

namespace ema {

enum class Ventilation { Natural, Mechanical };

std::string_view to_string(Ventilation v);
Ventilation parse_ventilation(std::string_view text);

struct BeaconObservation {
  std::string participant_id;
  std::string beacon_id;
  int rssi = 0;  // dBm, <= 0
  Timestamp observed_at;

  friend bool operator==(const BeaconObservation&, const BeaconObservation&) = default;
};

struct Zone {
  std::string zone_id;
  std::string name;
  Ventilation ventilation = Ventilation::Mechanical;
  std::string space_type;
  std::set<std::string> beacon_ids;
};

class UnknownZoneError : public std::out_of_range {
 public:
  explicit UnknownZoneError(const std::string& zone_id)
      : std::out_of_range("unknown zone '" + zone_id + "'") {}
};

class UnknownBeaconError : public std::out_of_range {
 public:
  explicit UnknownBeaconError(const std::string& beacon_id)
      : std::out_of_range("beacon '" + beacon_id + "' is not assigned to any zone") {}
};

class ZoneMap {
 public:
  ZoneMap() = default;
  // Throws std::invalid_argument if a zone has no beacons, a zone id repeats,
  // or a beacon is listed under two zones.
  explicit ZoneMap(std::vector<Zone> zones);

  static ZoneMap parse(std::string_view json_text);
  static ZoneMap load(const std::string& path);
  std::string to_json() const;

  const std::vector<Zone>& zones() const { return zones_; }
  const Zone* find(std::string_view zone_id) const;
  const Zone* zone_of_beacon(std::string_view beacon_id) const;
  bool empty() const { return zones_.empty(); }

 private:
  std::vector<Zone> zones_;  // sorted by zone_id
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::string, std::size_t, std::less<>> by_beacon_;
};

enum class Confidence { High, Low };

std::string_view to_string(Confidence c);

struct LocationFix {
  std::string zone_id;
  Confidence confidence = Confidence::Low;
  Timestamp window_start;
  Timestamp window_end;

  friend bool operator==(const LocationFix&, const LocationFix&) = default;
};

constexpr std::chrono::seconds kDefaultFixWindow{30};
constexpr double kHighConfidenceMarginDb = 5.0;

// Considers observations with observed_at in [at - window, at]. Returns
// nullopt (Unknown) when the window is empty. Ties on mean RSSI go to the
// lexicographically smallest beacon id. Throws UnknownBeaconError if the
// winning beacon is not in `map`.
std::optional<LocationFix> resolve_zone(std::span<const BeaconObservation> observations, Timestamp at,
                                        const ZoneMap& map, Millis window = kDefaultFixWindow);

enum class ZoneAttributeKind { Ventilation, SpaceType };

// String form of the attribute (`natural`/`mechanical`, or the space type).
std::string zone_attribute(const ZoneMap& map, std::string_view zone_id, ZoneAttributeKind attribute);
Ventilation zone_ventilation(const ZoneMap& map, std::string_view zone_id);

// JSON lines of `{participant_id, beacon_id, rssi, observed_at}`.
BeaconObservation parse_observation_line(std::string_view line);
std::string observation_to_json(const BeaconObservation& obs);

}  // namespace ema
