// Acceptance gates. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <httplib.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <random>

#include "ema/analytics.hpp"
#include "ema/simulator.hpp"
#include "ema/store.hpp"
#include "oracles.hpp"
#include "process.hpp"

using namespace ema;
using namespace std::chrono;
namespace fs = std::filesystem;

namespace {

// Collects failed checks for one criterion.
struct Gate {
  std::vector<std::string> failures;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 20) failures.push_back(what);
    if (!ok && failures.size() == 20) failures.push_back("...");
  }
};

int run_gate(const char* name, double limit_seconds, const std::function<void(Gate&)>& body) {
  Gate gate;
  const auto start = steady_clock::now();
  try {
    body(gate);
  } catch (const std::exception& e) {
    gate.failures.push_back(std::string("exception: ") + e.what());
  }
  const double elapsed = duration<double>(steady_clock::now() - start).count();
  if (limit_seconds > 0 && elapsed >= limit_seconds) {
    gate.failures.push_back("runtime " + std::to_string(elapsed) + " s over the " + std::to_string(limit_seconds) + " s limit");
  }
  const bool ok = gate.failures.empty();
  std::printf("%s %-24s %6.2f s  %s\n", ok ? "PASS" : "FAIL", name, elapsed, gate.summary.c_str());
  for (const auto& f : gate.failures) std::printf("     - %s\n", f.c_str());
  std::fflush(stdout);
  return ok ? 0 : 1;
}

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

const Timestamp kT0 = parse_timestamp("2026-03-02T01:00:00Z");

// ---------------------------------------------------------------------------

void flow_fidelity(Gate& g) {
  std::size_t total_paths = 0;
  for (const char* file : {"infection_risk.json", "privacy_distraction.json", "movement_triggers.json"}) {
    const SurveyFlow flow = load_flow_file(std::string(EMA_SOURCE_DIR) + "/flows/" + file);
    const auto report = validate_flow(flow);
    g.expect(report.errors.empty(), flow.flow_id + ": " + std::to_string(report.errors.size()) + " validation errors");
    const auto paths = enumerate_paths(flow);
    g.expect(paths.size() == oracle::dfs_path_count(flow),
             flow.flow_id + ": " + std::to_string(paths.size()) + " paths, DFS oracle says " +
                 std::to_string(oracle::dfs_path_count(flow)));
    g.expect(std::set<AnswerPath>(paths.begin(), paths.end()) == oracle::bfs_paths(flow),
             flow.flow_id + ": path set differs from BFS oracle");
    for (const auto& p : paths) {
      g.expect(p.size() >= 2 && p.size() <= 7, flow.flow_id + ": path of length " + std::to_string(p.size()));
    }
    total_paths += paths.size();
  }
  g.summary = "3 flows valid, " + std::to_string(total_paths) + " paths, lengths in [2, 7]";
}

void protocol_fidelity(Gate& g) {
  // Prompt windows over 30 days for every allowed interval.
  SimConfig config = default_sim_config();
  const auto [begin, end] = sim_horizon(config);
  std::size_t prompt_count = 0;
  for (int interval : {1, 2, 3}) {
    PromptPolicy policy = config.policy;
    policy.interval_hours = interval;
    for (const Timestamp t : prompts_between(policy, begin, end)) {
      const Millis tod = time_of_day(policy.timezone.to_local(t));
      g.expect(tod >= hours(9) && tod <= hours(21), "prompt at " + format_timestamp(t) + " outside 09:00-21:00 local");
      ++prompt_count;
    }
  }

  // Responses per participant per local day.
  const auto out = simulate(config);
  std::map<std::pair<std::string, long long>, int> per_day;
  for (const auto& r : out.records) {
    const auto local = config.policy.timezone.to_local(r.started_at);
    g.expect(time_of_day(local) >= hours(9) && time_of_day(local) <= hours(21), "response prompt outside the window");
    per_day[{r.participant_id, floor<days>(local).time_since_epoch().count()}] += 1;
  }
  g.expect(per_day.size() == config.participants.size() * static_cast<std::size_t>(config.days),
           "expected a response every participant-day, got " + std::to_string(per_day.size()));
  for (const auto& [key, n] : per_day) g.expect(n == 13, key.first + ": " + std::to_string(n) + " responses in a day");

  // Unsolicited submission streams through store ingest vs brute force.
  std::mt19937_64 rng(20260302);
  std::vector<std::pair<std::string, Timestamp>> stream;
  constexpr int kParticipants = 50, kEvents = 2100;
  std::map<std::string, Timestamp> clock;
  for (int i = 0; i < kParticipants * kEvents; ++i) {
    const std::string p = "p" + std::to_string(rng() % kParticipants);
    Timestamp& t = clock.try_emplace(p, kT0).first->second;
    // Mostly forward steps around the gap, sometimes a late arrival.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    Millis step(static_cast<long long>(u * 40 * 60 * 1000));
    if (rng() % 10 == 0) step = -step;
    t += step;
    if (rng() % 50 == 0) t += minutes(15) - t.time_since_epoch() % minutes(15);  // exact boundaries
    stream.emplace_back(p, t);
  }
  const auto expected = oracle::brute_force_gap_filter(stream, minutes(15));
  const auto registry = FlowRegistry::with_canonical_flows();
  const SurveyFlow& flow = canonical_flow("infection_risk");
  Store store;
  std::size_t mismatches = 0, accepted = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto record = oracle::make_record(flow, {"no", "0"}, stream[i].first, stream[i].second - seconds(2));
    const bool ok = std::holds_alternative<Accepted>(store.ingest(record, registry, RateLimit{}));
    accepted += ok;
    if (ok != expected[i]) ++mismatches;
  }
  g.expect(mismatches == 0, std::to_string(mismatches) + " ingest verdicts differ from the brute-force re-filter");
  for (int p = 0; p < kParticipants; ++p) {
    const auto history = store.accepted_history("p" + std::to_string(p));
    for (std::size_t i = 1; i < history.size(); ++i) {
      g.expect(history[i] - history[i - 1] > minutes(15), "accepted responses 15 minutes or less apart");
    }
  }
  g.summary = std::to_string(prompt_count) + " prompts in window, " + std::to_string(out.records.size()) +
              " responses at 13/day, " + std::to_string(stream.size()) + " events (" + std::to_string(accepted) +
              " accepted) match oracle";
}

void aggregate_reproduction(Gate& g) {
  const SurveyFlow& privacy = canonical_flow("privacy_distraction");
  const SurveyFlow& infection = canonical_flow("infection_risk");
  auto exact_counts = [&](const std::vector<ResponseRecord>& records, const SurveyFlow& flow) {
    for (const auto& q : flow.questions) {
      const auto b = breakdown(records, flow, q.id);
      const auto counts = oracle::recount(records, flow.flow_id, q.id);
      for (const auto& o : b.options) {
        const auto it = counts.find(o.code);
        g.expect(o.count == (it == counts.end() ? 0 : it->second), q.id + "." + o.code + " count differs from recount");
      }
    }
  };

  std::vector<ResponseRecord> privacy_records;
  for (int i = 0; i < 50; ++i) {
    const std::vector<std::string> codes = i % 17 == 0 ? std::vector<std::string>{"alone", "focus", "yes", "noise", "yes", "seen", "work"}
                                                       : std::vector<std::string>{"alone", "focus", "no", "no"};
    privacy_records.push_back(oracle::make_record(privacy, codes, "p0" + std::to_string(i % 6), kT0 + hours(i)));
  }
  const auto need = breakdown(privacy_records, privacy, "need_privacy");
  g.expect(need.option("yes").count == 3 && need.denominator == 50, "constructed set is not 3/50");
  g.expect(need.option("yes").share == 0.06, "share(need_privacy = yes) = " + fmt("%.17g", *need.option("yes").share));
  exact_counts(privacy_records, privacy);

  std::vector<ResponseRecord> infection_records;
  int i = 0;
  // 26 of 50 perceive increased risk; aspects 13/9/4.
  for (auto [aspect, n] : {std::pair{"ventilation", 13}, {"surfaces", 9}, {"people_density", 4}}) {
    for (int k = 0; k < n; ++k, ++i) {
      infection_records.push_back(oracle::make_record(infection, {"yes", aspect, k % 2 ? "yes" : "no", "1-2"},
                                                      "p0" + std::to_string(i % 6), kT0 + hours(i)));
    }
  }
  for (; i < 50; ++i) {
    infection_records.push_back(oracle::make_record(infection, {"no", "3-5"}, "p0" + std::to_string(i % 6), kT0 + hours(i)));
  }
  const auto ranking = concern_ranking(infection_records);
  g.expect(ranking == std::vector<std::string>{"ventilation", "surfaces", "people_density"},
           "ranking is not ventilation > surfaces > people_density");
  const auto risk = breakdown(infection_records, infection, "risk_now");
  const double yes = *risk.option("yes").share;
  g.expect(yes > 0.5 && yes > *risk.option("no").share, "risk_now = yes is not a majority");
  exact_counts(infection_records, infection);

  g.summary = "need_privacy yes = " + fmt("%.2f", *need.option("yes").share) + ", ranking " + ranking[0] + " > " +
              ranking[1] + " > " + ranking[2] + ", risk_now yes = " + fmt("%.2f", yes);
}

void statistical_oracle(Gate& g) {
  SimConfig config = default_sim_config();
  config.seed = 7;
  config.days = 60;
  config.active_flow = "infection_risk";
  config.participants.clear();
  const std::vector<std::string> natural = {"atrium", "courtyard_cafe", "studio"};
  const std::vector<std::string> mechanical = {"lab_2", "lib_quiet", "office_open"};
  for (int i = 0; i < 40; ++i) {
    ParticipantProfile p;
    char id[8];
    std::snprintf(id, sizeof id, "p%02d", i + 1);
    p.participant_id = id;
    const auto& group = i < 20 ? natural : mechanical;
    const double yes = i < 20 ? 0.3 : 0.7;
    p.movement.initial_zone = group[0];
    for (const auto& from : group) {
      for (const auto& to : group) p.movement.transitions[from][to] = from == to ? 0.6 : 0.2;
    }
    p.compliance = 0.9;
    p.answer_distributions = {{"risk_now", {{"yes", yes}, {"no", 1 - yes}}},
                              {"risk_aspect", {{"ventilation", 0.45}, {"surfaces", 0.35}, {"people_density", 0.2}}},
                              {"risk_detail", {{"yes", 0.25}, {"no", 0.75}}}};
    config.participants.push_back(std::move(p));
  }
  const SurveyFlow& flow = canonical_flow("infection_risk");
  const auto out = simulate(config);

  // Through the store, as a deployment would.
  Store store;
  const auto registry = FlowRegistry::with_canonical_flows();
  for (const auto& r : out.records) {
    g.expect(std::holds_alternative<Accepted>(store.ingest(r, registry, RateLimit{})), "simulated record rejected");
  }
  const auto records = store.query();
  const auto expected = expected_shares(config, flow);
  std::size_t min_n = SIZE_MAX, checked = 0;
  double worst_z = 0;
  for (const auto& q : flow.questions) {
    const auto b = breakdown(records, flow, q.id);
    min_n = std::min(min_n, b.denominator);
    g.expect(b.denominator >= 5000, q.id + " reached only " + std::to_string(b.denominator) + " times");
    for (const auto& o : b.options) {
      const double p = expected.at(q.id).shares.at(o.code);
      const double share = o.share.value_or(-1);
      ++checked;
      if (p == 0.0 || p == 1.0) {
        g.expect(share == p, q.id + "." + o.code + " degenerate share mismatch");
        continue;
      }
      const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(b.denominator));
      const double z = std::abs(share - p) / sigma;
      worst_z = std::max(worst_z, z);
      g.expect(z <= 3.0, q.id + "." + o.code + fmt(": share %.4f, expected %.4f (%.2f sigma)", share, p, z));
    }
  }

  const auto tab = crosstab(records, flow, "risk_now", config.zone_map, GroupBy::Ventilation);
  auto yes_share = [&](const char* row) {
    const auto& r = tab.row(row);
    return r.cells[1].share.value_or(-1);
  };
  g.expect(tab.columns[1] == "yes", "unexpected column order");
  const double gap = yes_share("natural") - yes_share("mechanical");
  g.expect(std::abs(gap - (0.3 - 0.7)) <= 0.02, fmt("ventilation gap %.4f, configured -0.4", gap));
  g.expect(tab.row("unknown").total == 0, "records without a zone");

  g.summary = std::to_string(records.size()) + " records, min n " + std::to_string(min_n) + ", " +
              std::to_string(checked) + " shares, worst " + fmt("%.2f sigma", worst_z) + ", gap " +
              fmt("%+.4f", gap);
}

void localization_oracle(Gate& g) {
  std::mt19937_64 rng(4242);
  std::vector<Zone> zones;
  for (int z = 0; z < 8; ++z) {
    zones.push_back({"zone_" + std::to_string(z), "Zone", z % 2 ? Ventilation::Natural : Ventilation::Mechanical, "room",
                     {"b" + std::to_string(3 * z), "b" + std::to_string(3 * z + 1), "b" + std::to_string(3 * z + 2)}});
  }
  const ZoneMap map(zones);
  const Timestamp at = kT0;
  int windows = 0, ties = 0, empty = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<BeaconObservation> obs;
    const int n = std::uniform_int_distribution<int>(0, 20)(rng);
    const bool coarse = trial % 2 == 0;  // coarse RSSI grid makes ties frequent
    for (int k = 0; k < n; ++k) {
      const int beacon = std::uniform_int_distribution<int>(0, 23)(rng);
      const int rssi = coarse ? -40 - 10 * std::uniform_int_distribution<int>(0, 5)(rng)
                              : std::uniform_int_distribution<int>(-100, -30)(rng);
      obs.push_back({"p01", "b" + std::to_string(beacon), rssi,
                     at - Millis(std::uniform_int_distribution<int>(-3000, 45000)(rng))});
    }
    const auto truth = oracle::brute_force_strongest(obs, at, seconds(30));
    const auto fix = resolve_zone(obs, at, map);
    ++windows;
    if (!truth) {
      ++empty;
      g.expect(!fix.has_value(), "fix from an empty window");
      continue;
    }
    if (truth->margin == 0.0) ++ties;
    g.expect(fix.has_value() && fix->zone_id == map.zone_of_beacon(truth->beacon)->zone_id, "zone differs from argmax");
    g.expect(fix && fix->confidence == (truth->margin >= 5.0 ? Confidence::High : Confidence::Low), "confidence differs");
    for (int offset : {-13, -30, 10}) {
      auto shifted = obs;
      bool in_range = true;
      for (auto& o : shifted) {
        o.rssi += offset;
        in_range &= o.rssi >= -127 && o.rssi <= 0;
      }
      if (!in_range) continue;
      const auto moved = resolve_zone(shifted, at, map);
      g.expect(moved && fix && moved->zone_id == fix->zone_id && moved->confidence == fix->confidence,
               "offset " + std::to_string(offset) + " changed the fix");
    }
  }
  g.expect(ties > 0, "no ties generated");
  g.summary = std::to_string(windows) + " windows (" + std::to_string(ties) + " ties, " + std::to_string(empty) +
              " empty) match brute force, offset invariant";
}

void durability(Gate& g) {
  const fs::path dir = fs::temp_directory_path() / ("ema-acceptance-" + generate_id());
  fs::create_directories(dir);
  const std::string source = EMA_SOURCE_DIR;
  const nlohmann::json cfg = {
      {"flows", {source + "/flows/infection_risk.json", source + "/flows/privacy_distraction.json"}},
      {"active_flow", "privacy_distraction"},
      {"zone_map", source + "/configs/zones.json"},
      {"store_dir", (dir / "store").string()},
      {"port", 0},
      {"sync_writes", true},
      {"prompt", {{"timezone", "Asia/Singapore"}}}};
  {
    std::ofstream(dir / "service.json") << cfg.dump(2);
  }
  const std::vector<std::string> argv = {EMA_CLI_PATH, "--config", (dir / "service.json").string(), "serve"};
  const std::vector<std::string> queries = {"/api/records", "/api/records?zone=unknown", "/api/records?zone=lib_quiet",
                                            "/api/records?from=2026-03-03T00:00:00Z&to=2026-03-04T00:00:00Z"};

  SimConfig sim = default_sim_config();
  sim.days = 3;
  const auto generated = simulate(sim);

  std::vector<std::string> before;
  std::size_t accepted = 0, rejected = 0;
  {
    proc::Child server(argv);
    const int port = proc::port_from_banner(server.read_line());
    g.expect(port > 0, "service did not start");
    if (port <= 0) return;
    httplib::Client c("127.0.0.1", port);
    std::string lines;
    for (const auto& o : generated.observations) lines += observation_to_json(o) + "\n";
    auto obs = c.Post("/api/observations", lines, "application/x-ndjson");
    g.expect(obs && obs->status == 202, "observations not accepted");
    for (std::size_t i = 0; i < generated.records.size(); ++i) {
      ResponseRecord r = generated.records[i];
      if (i % 3 == 0) r.zone_id.reset();    // zone attributed by the service
      if (i % 5 == 0) r.record_id.clear();  // id assigned by the service
      auto res = c.Post("/api/responses", record_to_json(r), "application/json");
      g.expect(res && res->status == 201, "record not accepted");
      accepted += res && res->status == 201;
      if (i % 7 == 0) {
        r.completed_at += minutes(5);  // inside the gap
        r.record_id = "retry-" + std::to_string(i);
        auto again = c.Post("/api/responses", record_to_json(r), "application/json");
        g.expect(again && again->status == 409, "gap violation not rejected");
        rejected += again && again->status == 409;
      }
    }
    for (const auto& q : queries) {
      auto res = c.Get(q);
      before.push_back(res ? res->body : "");
    }
    server.signal(SIGKILL);
    g.expect(server.wait() == 128 + SIGKILL, "service was not killed");
  }
  {
    proc::Child server(argv);
    const int port = proc::port_from_banner(server.read_line());
    g.expect(port > 0, "service did not restart");
    if (port <= 0) return;
    httplib::Client c("127.0.0.1", port);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      auto res = c.Get(queries[i]);
      g.expect(res && res->body == before[i], "query " + queries[i] + " differs after restart");
    }
    g.expect(nlohmann::json::parse(before[0]).size() == accepted, "record count differs from accepted count");
    server.signal(SIGTERM);
    g.expect(server.wait() == 0, "service did not stop cleanly");
  }
  fs::remove_all(dir);
  g.summary = std::to_string(accepted) + " records (" + std::to_string(rejected) + " gap rejections), " +
              std::to_string(queries.size()) + " queries byte-identical after SIGKILL + restart";
}

}  // namespace

int main() {
  int failures = 0;
  failures += run_gate("flow-fidelity", 1.0, flow_fidelity);
  failures += run_gate("protocol-fidelity", 10.0, protocol_fidelity);
  failures += run_gate("aggregate-reproduction", 0, aggregate_reproduction);
  failures += run_gate("statistical-oracle", 30.0, statistical_oracle);
  failures += run_gate("localization-oracle", 5.0, localization_oracle);
  failures += run_gate("durability", 0, durability);
  std::printf("%d of 6 acceptance criteria failed\n", failures);
  return failures;
}
