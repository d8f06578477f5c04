#pragma once

// Seeded synthetic cohorts: Markov zone movement, Bernoulli prompt
// compliance, categorical answers and uniform completion times.
//
// One std::mt19937_64 stream per run, seeded with SimConfig::seed. For each
// participant in config order, for each prompt instant in time order, draws
// are taken in a fixed order: movement (zone transitions up to the prompt),
// compliance, one per answered question, duration, then beacon RSSI noise.
// docs/simulator.md spells the draw layout out.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ema/flow.hpp"
#include "ema/locator.hpp"
#include "ema/record.hpp"
#include "ema/schedule.hpp"

namespace ema {

using Distribution = std::map<std::string, double>;

struct MovementModel {
  std::string initial_zone;  // empty: first zone of the transition matrix
  std::map<std::string, Distribution> transitions;
  double dwell_mean_minutes = 45.0;
};

struct ParticipantProfile {
  std::string participant_id;
  // Questions without an entry are answered uniformly.
  std::map<QuestionId, Distribution> answer_distributions;
  MovementModel movement;
  double compliance = 1.0;
  double duration_min_seconds = 3.0;
  double duration_max_seconds = 9.0;
};

struct SimConfig {
  std::uint64_t seed = 42;
  int days = 30;
  std::string start_date = "2026-03-02";  // local date of the first day
  std::string active_flow = "privacy_distraction";
  PromptPolicy policy;
  ZoneMap zone_map;
  std::vector<ParticipantProfile> participants;
};

class InvalidConfigError : public std::invalid_argument {
 public:
  explicit InvalidConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Six participants, thirty days, hourly prompts, full compliance,
// Asia/Singapore, privacy flow, default_zone_map().
SimConfig default_sim_config();
ZoneMap default_zone_map();

// JSON config file. "zone_map" may be an inline object or a path relative to
// `base_dir`. "participant_template" + "participant_count" expand to ids
// p01, p02, ...
SimConfig parse_sim_config(std::string_view json_text, const std::string& base_dir = ".");
SimConfig load_sim_config(const std::string& path);

// Throws InvalidConfigError naming the offending field.
void validate_sim_config(const SimConfig& config, const SurveyFlow& flow);

struct SimOutput {
  std::vector<ResponseRecord> records;
  std::vector<BeaconObservation> observations;
};

SimOutput simulate(const SimConfig& config, const FlowRegistry& flows);
SimOutput simulate(const SimConfig& config);

// [start, end) of the simulated horizon.
std::pair<Timestamp, Timestamp> sim_horizon(const SimConfig& config);

struct ExpectedQuestion {
  double expected_reached = 0.0;  // expected number of records reaching it
  double reach_probability = 0.0;
  Distribution shares;  // conditional on reaching
};

// Closed form: branch probabilities multiplied along the flow graph, pooled
// over participants by their expected response counts.
std::map<QuestionId, ExpectedQuestion> expected_shares(const SimConfig& config, const SurveyFlow& flow);

// Per-question reach probability for one answer profile.
std::map<QuestionId, double> reach_probabilities(const SurveyFlow& flow,
                                                 const std::map<QuestionId, Distribution>& distributions);

// Option probability used by the generator (explicit or uniform).
double option_probability(const QuestionDef& question, const std::map<QuestionId, Distribution>& distributions,
                          std::string_view code);

}  // namespace ema
