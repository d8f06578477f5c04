// ema: command-line entry point for validation, the ingestion service,
// simulation, ingestion from files, and reports.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ema/analytics.hpp"
#include "ema/config.hpp"
#include "ema/error.hpp"
#include "ema/flow.hpp"
#include "ema/record.hpp"
#include "ema/service.hpp"
#include "ema/simulator.hpp"
#include "ema/store.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitParse = 2;

struct GlobalOptions {
  std::string config_path;
};

ema::ServiceConfig load_config(const GlobalOptions& global) {
  if (global.config_path.empty()) return ema::ServiceConfig{};
  return ema::load_service_config(global.config_path);
}

std::string store_dir_for(const ema::ServiceConfig& config, const std::string& flag) {
  if (!flag.empty()) return flag;
  return ema::effective_store_dir(config);
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

int cmd_validate(const std::vector<std::string>& files) {
  int status = kExitOk;
  for (const auto& path : files) {
    ema::SurveyFlow flow;
    try {
      flow = ema::load_flow_file(path);
    } catch (const ema::ParseError& e) {
      std::cout << path << ": parse error";
      if (e.line() > 0) std::cout << " at line " << e.line();
      if (!e.field().empty()) std::cout << " (" << e.field() << ")";
      std::cout << ": " << e.what() << "\n";
      status = kExitParse;
      continue;
    } catch (const std::exception& e) {
      std::cout << path << ": " << e.what() << "\n";
      status = kExitParse;
      continue;
    }
    const ema::ValidationReport report = ema::validate_flow(flow);
    std::cout << path << ": flow '" << flow.flow_id << "' " << (report.ok() ? "ok" : "INVALID") << " ("
              << report.errors.size() << " errors, " << report.warnings.size() << " warnings)\n";
    std::cout << report.to_text();
    if (!report.ok() && status == kExitOk) status = kExitFailure;
  }
  return status;
}

int cmd_serve(const GlobalOptions& global, std::optional<int> port_flag, const std::string& host_flag) {
  ema::ServiceConfig config = load_config(global);
  if (port_flag) config.port = *port_flag;
  if (!host_flag.empty()) config.host = host_flag;

  ema::FlowRegistry flows = ema::build_registry(config);
  ema::ZoneMap zones = ema::load_zone_map(config);
  if (flows.latest(config.active_flow) == nullptr) {
    throw std::runtime_error("active_flow '" + config.active_flow + "' is not a known flow");
  }
  const std::string store_dir = ema::effective_store_dir(config);
  ema::Store store(store_dir, ema::Store::Options{config.sync_writes});

  ema::ServiceSettings settings;
  settings.policy = config.policy;
  settings.rate_limit = config.rate_limit;
  settings.active_flow = config.active_flow;
  ema::Service service(std::move(flows), std::move(zones), store, std::move(settings));

  // Signals are handled on a dedicated thread; block them everywhere else.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int port = service.bind(config.host, config.port);
  if (port < 0) {
    std::cerr << "error: cannot bind " << config.host << ":" << config.port << "\n";
    return kExitFailure;
  }
  std::cout << "listening on " << config.host << ":" << port << " (store " << store_dir << ", active flow "
            << config.active_flow << ")" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  const bool ok = service.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cout << "stopped, " << store.size() << " records in store" << std::endl;
  return ok ? kExitOk : kExitFailure;
}

int cmd_simulate(const std::string& sim_config_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  ema::SimConfig config;
  try {
    config = sim_config_path.empty() ? ema::default_sim_config() : ema::load_sim_config(sim_config_path);
    if (seed) config.seed = *seed;
    const ema::SimOutput output = ema::simulate(config);

    fs::create_directories(out_dir);
    ema::write_records_jsonl((fs::path(out_dir) / ema::kRecordsFile).string(), output.records);
    std::ofstream obs(fs::path(out_dir) / ema::kObservationsFile, std::ios::binary | std::ios::trunc);
    for (const auto& o : output.observations) obs << ema::observation_to_json(o) << '\n';
    std::ofstream zones(fs::path(out_dir) / "zones.json", std::ios::binary | std::ios::trunc);
    zones << config.zone_map.to_json();
    std::cout << "simulated " << config.participants.size() << " participants over " << config.days << " days: "
              << output.records.size() << " records, " << output.observations.size() << " observations -> "
              << out_dir << "\n";
  } catch (const ema::InvalidConfigError& e) {
    std::cerr << "invalid simulation config: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_ingest(const GlobalOptions& global, const std::vector<std::string>& inputs,
               const std::string& observations_path, const std::string& store_flag) {
  const ema::ServiceConfig config = load_config(global);
  const ema::FlowRegistry flows = ema::build_registry(config);
  ema::Store store(store_dir_for(config, store_flag), ema::Store::Options{config.sync_writes});

  if (!observations_path.empty()) {
    std::ifstream in(observations_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read observations '" + observations_path + "'");
    std::vector<ema::BeaconObservation> batch;
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) batch.push_back(ema::parse_observation_line(line));
    }
    store.add_observations(batch);
    std::cout << "observations: " << batch.size() << "\n";
  }

  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejected;
  for (const auto& path : inputs) {
    for (auto& record : ema::load_records_jsonl(path)) {
      const auto outcome = store.ingest(std::move(record), flows, config.rate_limit);
      if (std::holds_alternative<ema::Accepted>(outcome)) {
        ++accepted;
      } else {
        ++rejected[std::string(ema::to_string(std::get<ema::Rejected>(outcome).reason))];
      }
    }
  }
  std::cout << "accepted: " << accepted << "\n";
  for (const auto& [reason, count] : rejected) std::cout << "rejected " << reason << ": " << count << "\n";
  return kExitOk;
}

ema::ZoneMap zones_for_report(const ema::ServiceConfig& config, const std::string& zones_flag,
                              const std::string& store_dir) {
  if (!zones_flag.empty()) return ema::ZoneMap::load(zones_flag);
  if (config.zone_map_path) return ema::ZoneMap::load(*config.zone_map_path);
  const fs::path beside = fs::path(store_dir) / "zones.json";
  if (fs::exists(beside)) return ema::ZoneMap::load(beside.string());
  return ema::ZoneMap{};
}

std::vector<ema::ResponseRecord> store_records(const std::string& store_dir) {
  const fs::path log = fs::path(store_dir) / ema::kRecordsFile;
  if (!fs::exists(log)) return {};
  return ema::load_records_jsonl(log.string());
}

int cmd_report(const GlobalOptions& global, const std::string& spec_path, const std::string& store_flag,
               const std::string& zones_flag, const std::string& out_path) {
  const ema::ServiceConfig config = load_config(global);
  const ema::FlowRegistry flows = ema::build_registry(config);
  const std::string store_dir = store_dir_for(config, store_flag);

  std::ifstream in(spec_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read report spec '" + spec_path + "'");
  std::stringstream text;
  text << in.rdbuf();
  const ema::ReportSpec spec = ema::parse_report_spec(text.str());
  const auto flow = flows.latest(spec.flow_id);
  if (!flow) throw std::runtime_error("report spec names unknown flow '" + spec.flow_id + "'");

  const auto records = store_records(store_dir);
  const ema::ZoneMap zones = zones_for_report(config, zones_flag, store_dir);
  write_output(out_path, ema::export_csv(ema::run_report(spec, records, *flow, zones)));
  return kExitOk;
}

int cmd_export(const GlobalOptions& global, const std::string& store_flag, const ema::RecordFilter& filter,
               const std::string& out_path) {
  const ema::ServiceConfig config = load_config(global);
  const std::string store_dir = store_dir_for(config, store_flag);
  auto records = store_records(store_dir);
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.completed_at < b.completed_at;
  });
  std::string out;
  for (const auto& r : records) {
    if (filter.matches(r)) out += ema::record_to_json(r) + "\n";
  }
  write_output(out_path, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro-EMA survey platform: flows, ingestion service, simulation, reports"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config_path, "Service config file (JSON)");

  auto* validate = app.add_subcommand("validate", "Validate flow definition files");
  std::vector<std::string> flow_files;
  validate->add_option("files", flow_files, "Flow files")->required();

  auto* serve = app.add_subcommand("serve", "Run the ingestion service until SIGTERM");
  std::optional<int> port;
  std::string host;
  serve->add_option("--port", port, "Listen port (0 picks a free port)");
  serve->add_option("--host", host, "Listen address");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort");
  std::string sim_config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  simulate->add_option("sim_config", sim_config, "Simulation config (JSON); built-in default if omitted");
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_option("--seed", seed, "Override the config seed");

  auto* ingest = app.add_subcommand("ingest", "Ingest record JSONL files into the store");
  std::vector<std::string> record_files;
  std::string observations_file;
  std::string store_flag;
  ingest->add_option("records", record_files, "Record JSONL files");
  ingest->add_option("--observations", observations_file, "Beacon observation JSONL");
  ingest->add_option("--store", store_flag, "Store directory");

  auto* report = app.add_subcommand("report", "Aggregate report as CSV");
  std::string spec_path;
  std::string zones_flag;
  std::string out_path;
  std::string format = "csv";
  report->add_option("spec", spec_path, "Report spec (JSON)")->required();
  report->add_option("--store", store_flag, "Store directory");
  report->add_option("--zones", zones_flag, "Zone map file");
  report->add_option("--out", out_path, "Output file (default stdout)");
  report->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));

  auto* exporter = app.add_subcommand("export", "Dump stored records as JSONL");
  std::string flow_filter, participant_filter, zone_filter, from_filter, to_filter;
  exporter->add_option("--store", store_flag, "Store directory");
  exporter->add_option("--flow", flow_filter, "Only this flow");
  exporter->add_option("--participant", participant_filter, "Only this participant");
  exporter->add_option("--zone", zone_filter, "Only this zone (\"unknown\" for unattributed)");
  exporter->add_option("--from", from_filter, "completed_at >= RFC 3339 time");
  exporter->add_option("--to", to_filter, "completed_at <= RFC 3339 time");
  exporter->add_option("--out", out_path, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(flow_files);
    if (*serve) return cmd_serve(global, port, host);
    if (*simulate) return cmd_simulate(sim_config, out_dir, seed);
    if (*ingest) return cmd_ingest(global, record_files, observations_file, store_flag);
    if (*report) return cmd_report(global, spec_path, store_flag, zones_flag, out_path);
    if (*exporter) {
      ema::RecordFilter filter;
      if (!flow_filter.empty()) filter.flow_id = flow_filter;
      if (!participant_filter.empty()) filter.participant_id = participant_filter;
      if (!zone_filter.empty()) filter.zone_id = zone_filter;
      if (!from_filter.empty()) filter.from = ema::parse_timestamp(from_filter);
      if (!to_filter.empty()) filter.to = ema::parse_timestamp(to_filter);
      return cmd_export(global, store_flag, filter, out_path);
    }
  } catch (const ema::ParseError& e) {
    std::cerr << "error: " << e.what();
    if (!e.field().empty()) std::cerr << " (" << e.field() << ")";
    std::cerr << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
