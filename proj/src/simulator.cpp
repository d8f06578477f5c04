#include "ema/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>

#include "ema/error.hpp"
#include "json_io.hpp"

namespace ema {

namespace {

using namespace std::chrono;

constexpr double kSumTolerance = 1e-9;

// 53 high bits of one mt19937_64 output, in [0, 1).
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

const OptionDef& draw_option(const QuestionDef& q, const std::map<QuestionId, Distribution>& dists, double u) {
  double cumulative = 0.0;
  const OptionDef* last_positive = nullptr;
  for (const auto& option : q.options) {
    const double p = option_probability(q, dists, option.code);
    if (p <= 0.0) continue;
    cumulative += p;
    last_positive = &option;
    if (u < cumulative) return option;
  }
  return *last_positive;  // u within rounding of 1
}

const std::string& draw_zone(const Distribution& row, double u) {
  double cumulative = 0.0;
  const std::string* last_positive = nullptr;
  for (const auto& [zone, p] : row) {
    if (p <= 0.0) continue;
    cumulative += p;
    last_positive = &zone;
    if (u < cumulative) return zone;
  }
  return *last_positive;
}

Millis dwell_time(double mean_minutes, double u) {
  const double minutes_drawn = -mean_minutes * std::log1p(-u);
  return Millis(std::max<long long>(1, std::llround(minutes_drawn * 60000.0)));
}

std::string two_digit_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%02zu", i);
  return buf;
}

std::string record_id_for(const std::string& participant, std::size_t seq) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%06zu", seq);
  return participant + buf;
}

void check_distribution(const Distribution& d, const std::string& where) {
  double sum = 0.0;
  for (const auto& [key, p] : d) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidConfigError(where + ": probability of '" + key + "' outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", sum);
    throw InvalidConfigError(where + ": row sums to " + buf + ", expected 1");
  }
}

struct MovementState {
  std::string zone;
  Timestamp next_transition;
};

year_month_day parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw InvalidConfigError("start_date must be YYYY-MM-DD, got '" + text + "'");
  }
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw InvalidConfigError("start_date '" + text + "' is not a calendar date");
  return ymd;
}

}  // namespace

double option_probability(const QuestionDef& question, const std::map<QuestionId, Distribution>& distributions,
                          std::string_view code) {
  auto it = distributions.find(question.id);
  if (it == distributions.end()) return 1.0 / static_cast<double>(question.options.size());
  auto p = it->second.find(std::string(code));
  return p == it->second.end() ? 0.0 : p->second;
}

ZoneMap default_zone_map() {
  return ZoneMap({
      {"atrium", "Atrium", Ventilation::Natural, "circulation", {"b-atrium-1", "b-atrium-2"}},
      {"courtyard_cafe", "Courtyard cafe", Ventilation::Natural, "social", {"b-cafe-1"}},
      {"lab_2", "Lab 2", Ventilation::Mechanical, "laboratory", {"b-lab2-1"}},
      {"lib_quiet", "Library quiet room", Ventilation::Mechanical, "quiet", {"b-lib-1", "b-lib-2"}},
      {"office_open", "Open-plan office", Ventilation::Mechanical, "office", {"b-office-1", "b-office-2"}},
      {"studio", "Design studio", Ventilation::Natural, "studio", {"b-studio-1"}},
  });
}

SimConfig default_sim_config() {
  SimConfig config;
  config.seed = 42;
  config.days = 30;
  config.active_flow = "privacy_distraction";
  config.policy.interval_hours = 1;
  config.policy.timezone = TimeZone::locate("Asia/Singapore");
  config.zone_map = default_zone_map();

  MovementModel movement;
  movement.initial_zone = "office_open";
  movement.dwell_mean_minutes = 45.0;
  for (const auto& from : config.zone_map.zones()) {
    Distribution row;
    for (const auto& to : config.zone_map.zones()) {
      row[to.zone_id] = to.zone_id == from.zone_id ? 0.5 : 0.1;
    }
    movement.transitions[from.zone_id] = row;
  }

  for (std::size_t i = 1; i <= 6; ++i) {
    ParticipantProfile p;
    p.participant_id = two_digit_id(i);
    p.movement = movement;
    p.answer_distributions = {
        {"alone_or_group", {{"alone", 0.8}, {"group", 0.2}}},
        {"activity", {{"focus", 0.6}, {"collaborate", 0.15}, {"leisure", 0.15}, {"call", 0.1}}},
        {"distracted", {{"no", 0.6}, {"yes", 0.4}}},
        {"distraction_cause", {{"noise", 0.6}, {"visual", 0.25}, {"both", 0.15}}},
        {"need_privacy", {{"no", 0.94}, {"yes", 0.06}}},
        {"privacy_concern", {{"seen", 0.6}, {"heard", 0.25}, {"both", 0.15}}},
        {"privacy_about", {{"appearance", 0.2}, {"work", 0.6}, {"behavior", 0.2}}},
    };
    config.participants.push_back(std::move(p));
  }
  return config;
}

namespace {

Distribution distribution_from_json(const nlohmann::json& obj, const std::string& where) {
  if (!obj.is_object()) throw InvalidConfigError(where + " must be an object of probabilities");
  Distribution d;
  for (const auto& [key, value] : obj.items()) {
    if (!value.is_number()) throw InvalidConfigError(where + "." + key + " must be a number");
    d[key] = value.get<double>();
  }
  return d;
}

ParticipantProfile profile_from_json(const nlohmann::json& obj, const std::string& where) {
  if (!obj.is_object()) throw InvalidConfigError(where + " must be an object");
  ParticipantProfile p;
  try {
    p.participant_id = obj.value("participant_id", std::string{});
    if (obj.contains("answer_distributions")) {
      for (const auto& [qid, dist] : obj.at("answer_distributions").items()) {
        p.answer_distributions[qid] = distribution_from_json(dist, where + ".answer_distributions." + qid);
      }
    }
    if (obj.contains("movement")) {
      const auto& m = obj.at("movement");
      p.movement.initial_zone = m.value("initial_zone", std::string{});
      p.movement.dwell_mean_minutes = m.value("dwell_mean_minutes", p.movement.dwell_mean_minutes);
      if (m.contains("transitions")) {
        for (const auto& [zone, row] : m.at("transitions").items()) {
          p.movement.transitions[zone] = distribution_from_json(row, where + ".movement.transitions." + zone);
        }
      }
    }
    p.compliance = obj.value("compliance", p.compliance);
    if (obj.contains("duration_seconds")) {
      const auto& range = obj.at("duration_seconds");
      if (!range.is_array() || range.size() != 2) throw InvalidConfigError(where + ".duration_seconds must be [min, max]");
      p.duration_min_seconds = range[0].get<double>();
      p.duration_max_seconds = range[1].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(where + ": " + e.what());
  }
  return p;
}

}  // namespace

SimConfig parse_sim_config(std::string_view json_text, const std::string& base_dir) {
  const nlohmann::json doc = detail::parse_json_document(json_text, "simulation config");
  if (!doc.is_object()) throw InvalidConfigError("simulation config must be a JSON object");
  SimConfig config;
  config.participants.clear();
  try {
    config.seed = doc.value("seed", config.seed);
    config.days = doc.value("days", config.days);
    config.start_date = doc.value("start_date", config.start_date);
    config.active_flow = doc.value("active_flow", config.active_flow);
    if (doc.contains("prompt")) config.policy = detail::policy_from_json(doc.at("prompt"));
    config.zone_map = doc.contains("zone_map") ? detail::zone_map_from_json(doc.at("zone_map"), base_dir)
                                               : default_zone_map();
    if (doc.contains("participants")) {
      const auto& list = doc.at("participants");
      for (std::size_t i = 0; i < list.size(); ++i) {
        config.participants.push_back(profile_from_json(list[i], "participants[" + std::to_string(i) + "]"));
        if (config.participants.back().participant_id.empty()) {
          config.participants.back().participant_id = two_digit_id(config.participants.size());
        }
      }
    }
    if (doc.contains("participant_template")) {
      const int count = doc.value("participant_count", 1);
      const ParticipantProfile tmpl = profile_from_json(doc.at("participant_template"), "participant_template");
      for (int i = 0; i < count; ++i) {
        ParticipantProfile p = tmpl;
        p.participant_id = two_digit_id(config.participants.size() + 1);
        config.participants.push_back(std::move(p));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(std::string("invalid simulation config: ") + e.what());
  } catch (const ParseError& e) {
    throw InvalidConfigError(e.what());
  }
  return config;
}

SimConfig load_sim_config(const std::string& path) {
  const std::string text = detail::read_text_file(path, "simulation config");
  return parse_sim_config(text, std::filesystem::path(path).parent_path().string());
}

void validate_sim_config(const SimConfig& config, const SurveyFlow& flow) {
  if (config.days < 1) throw InvalidConfigError("days must be at least 1");
  parse_date(config.start_date);
  try {
    config.policy.validate();
  } catch (const std::invalid_argument& e) {
    throw InvalidConfigError(e.what());
  }
  if (!validate_flow(flow).ok()) throw InvalidConfigError("active flow '" + flow.flow_id + "' does not validate");
  if (config.participants.empty()) throw InvalidConfigError("no participants configured");
  if (config.zone_map.empty()) throw InvalidConfigError("zone map has no zones");

  std::set<std::string> ids;
  for (const auto& p : config.participants) {
    const std::string where = "participant '" + p.participant_id + "'";
    if (p.participant_id.empty() || !ids.insert(p.participant_id).second) {
      throw InvalidConfigError(where + ": participant ids must be unique and non-empty");
    }
    if (!(p.compliance >= 0.0 && p.compliance <= 1.0)) throw InvalidConfigError(where + ": compliance outside [0, 1]");
    if (!(p.duration_min_seconds >= 0.0 && p.duration_min_seconds <= p.duration_max_seconds)) {
      throw InvalidConfigError(where + ": duration range must satisfy 0 <= min <= max");
    }
    for (const auto& [qid, dist] : p.answer_distributions) {
      const QuestionDef* q = flow.find(qid);
      if (q == nullptr) throw InvalidConfigError(where + ": no question '" + qid + "' in flow '" + flow.flow_id + "'");
      for (const auto& [code, prob] : dist) {
        if (q->find_option(code) == nullptr) {
          throw InvalidConfigError(where + ": question '" + qid + "' has no option '" + code + "'");
        }
      }
      check_distribution(dist, where + " answer distribution '" + qid + "'");
    }
    const MovementModel& m = p.movement;
    if (m.transitions.empty()) throw InvalidConfigError(where + ": movement.transitions is empty");
    if (!(m.dwell_mean_minutes > 0.0)) throw InvalidConfigError(where + ": dwell_mean_minutes must be positive");
    if (!m.initial_zone.empty() && !m.transitions.contains(m.initial_zone)) {
      throw InvalidConfigError(where + ": initial_zone '" + m.initial_zone + "' has no transition row");
    }
    for (const auto& [from, row] : m.transitions) {
      if (config.zone_map.find(from) == nullptr) throw InvalidConfigError(where + ": unknown zone '" + from + "'");
      check_distribution(row, where + " transition matrix row '" + from + "'");
      for (const auto& [to, prob] : row) {
        if (prob > 0.0 && !m.transitions.contains(to)) {
          throw InvalidConfigError(where + ": zone '" + to + "' is reachable but has no transition row");
        }
      }
    }
  }
}

std::pair<Timestamp, Timestamp> sim_horizon(const SimConfig& config) {
  const year_month_day ymd = parse_date(config.start_date);
  const LocalTime first_midnight{local_days{ymd}.time_since_epoch()};
  return {config.policy.timezone.to_utc(first_midnight),
          config.policy.timezone.to_utc(first_midnight + days(config.days))};
}

SimOutput simulate(const SimConfig& config, const FlowRegistry& flows) {
  const auto flow = flows.latest(config.active_flow);
  if (!flow) throw InvalidConfigError("active_flow '" + config.active_flow + "' is not a known flow");
  validate_sim_config(config, *flow);

  const auto [start, end] = sim_horizon(config);
  const std::vector<Timestamp> prompts = prompts_between(config.policy, start, end);
  const auto& zones = config.zone_map.zones();

  std::mt19937_64 rng(config.seed);
  SimOutput out;
  for (const auto& profile : config.participants) {
    const MovementModel& m = profile.movement;
    MovementState state;
    state.zone = m.initial_zone.empty() ? m.transitions.begin()->first : m.initial_zone;
    state.next_transition = start + dwell_time(m.dwell_mean_minutes, uniform01(rng));
    std::size_t seq = 0;

    for (const Timestamp prompt : prompts) {
      while (state.next_transition <= prompt) {
        state.zone = draw_zone(m.transitions.at(state.zone), uniform01(rng));
        state.next_transition += dwell_time(m.dwell_mean_minutes, uniform01(rng));
      }
      const bool responds = uniform01(rng) < profile.compliance;
      if (!responds) continue;

      std::vector<const QuestionDef*> asked;
      std::vector<std::string> chosen;
      for (const QuestionDef* q = flow->find(flow->start); q != nullptr;) {
        const OptionDef& option = draw_option(*q, profile.answer_distributions, uniform01(rng));
        asked.push_back(q);
        chosen.push_back(option.code);
        q = option.next.is_end() ? nullptr : flow->find(option.next.target());
      }
      const double duration_s = profile.duration_min_seconds +
                                uniform01(rng) * (profile.duration_max_seconds - profile.duration_min_seconds);
      const long long total_ms = std::llround(duration_s * 1000.0);

      ResponseRecord r;
      r.record_id = record_id_for(profile.participant_id, ++seq);
      r.participant_id = profile.participant_id;
      r.flow_id = flow->flow_id;
      r.flow_version = flow->version;
      r.started_at = prompt;
      for (std::size_t i = 0; i < asked.size(); ++i) {
        const long long at = total_ms * static_cast<long long>(i + 1) / static_cast<long long>(asked.size());
        r.answers.push_back({asked[i]->id, chosen[i], prompt + Millis(at)});
      }
      r.completed_at = r.answers.back().answered_at;
      r.zone_id = state.zone;
      r.prompted = true;
      r.device_info = {{"source", "simulator"}};

      // Sightings: every beacon of the current zone strong, plus the first
      // beacon of the next zone (by id, cyclic) weak.
      const Zone* zone = config.zone_map.find(state.zone);
      const std::size_t zone_index = static_cast<std::size_t>(zone - zones.data());
      const Zone* neighbour = zones.size() > 1 ? &zones[(zone_index + 1) % zones.size()] : nullptr;
      for (int k = 0; k < 3; ++k) {
        const Timestamp at = r.completed_at - seconds(20 - 10 * k);
        for (const auto& beacon : zone->beacon_ids) {
          const int rssi = -50 - static_cast<int>(uniform01(rng) * 15.0);
          out.observations.push_back({profile.participant_id, beacon, rssi, at});
        }
        if (neighbour != nullptr) {
          const int rssi = -76 - static_cast<int>(uniform01(rng) * 20.0);
          out.observations.push_back({profile.participant_id, *neighbour->beacon_ids.begin(), rssi, at});
        }
      }
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

SimOutput simulate(const SimConfig& config) { return simulate(config, FlowRegistry::with_canonical_flows()); }

std::map<QuestionId, double> reach_probabilities(const SurveyFlow& flow,
                                                 const std::map<QuestionId, Distribution>& distributions) {
  // Propagate mass in topological order (reverse DFS post-order).
  std::vector<const QuestionDef*> order;
  std::set<std::string> done;
  std::function<void(const QuestionDef&)> visit = [&](const QuestionDef& q) {
    if (!done.insert(q.id).second) return;
    for (const auto& option : q.options) {
      if (!option.next.is_end()) visit(*flow.find(option.next.target()));
    }
    order.push_back(&q);
  };
  visit(*flow.find(flow.start));

  std::map<QuestionId, double> reach;
  for (const auto& q : flow.questions) reach[q.id] = 0.0;
  reach[flow.start] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const QuestionDef& q = **it;
    for (const auto& option : q.options) {
      if (option.next.is_end()) continue;
      reach[option.next.target()] += reach[q.id] * option_probability(q, distributions, option.code);
    }
  }
  return reach;
}

std::map<QuestionId, ExpectedQuestion> expected_shares(const SimConfig& config, const SurveyFlow& flow) {
  const auto [start, end] = sim_horizon(config);
  const double prompt_count = static_cast<double>(prompts_between(config.policy, start, end).size());

  std::map<QuestionId, ExpectedQuestion> out;
  double expected_records = 0.0;
  for (const auto& q : flow.questions) {
    for (const auto& option : q.options) out[q.id].shares[option.code] = 0.0;
  }
  for (const auto& p : config.participants) {
    const double responses = prompt_count * p.compliance;
    expected_records += responses;
    const auto reach = reach_probabilities(flow, p.answer_distributions);
    for (const auto& q : flow.questions) {
      const double reached = responses * reach.at(q.id);
      ExpectedQuestion& e = out[q.id];
      e.expected_reached += reached;
      for (const auto& option : q.options) {
        e.shares[option.code] += reached * option_probability(q, p.answer_distributions, option.code);
      }
    }
  }
  for (auto& [qid, e] : out) {
    e.reach_probability = expected_records > 0.0 ? e.expected_reached / expected_records : 0.0;
    for (auto& [code, mass] : e.shares) mass = e.expected_reached > 0.0 ? mass / e.expected_reached : 0.0;
  }
  return out;
}

}  // namespace ema
