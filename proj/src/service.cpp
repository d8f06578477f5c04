#include "ema/service.hpp"

#include <sstream>

#include "ema/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ema {

using nlohmann::json;

struct Service::Impl {
  FlowRegistry flows;
  ZoneMap zones;
  Store& store;
  ServiceSettings settings;
  httplib::Server server;

  Impl(FlowRegistry f, ZoneMap z, Store& s, ServiceSettings st)
      : flows(std::move(f)), zones(std::move(z)), store(s), settings(std::move(st)) {
    routes();
  }

  static void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, std::string_view reason, const std::string& detail) {
    reply_json(res, status, {{"reason", reason}, {"detail", detail}});
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content("ok", "text/plain");
    });

    server.Get("/api/flows", [this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& flow : flows.latest_all()) {
        list.push_back({{"flow_id", flow->flow_id},
                        {"title", flow->title},
                        {"version", flow->version},
                        {"start", flow->start},
                        {"question_count", flow->questions.size()},
                        {"active", flow->flow_id == settings.active_flow}});
      }
      reply_json(res, 200, list);
    });

    server.Get(R"(/api/flows/([a-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto flow = flows.latest(req.matches[1].str());
      if (!flow) return reply_error(res, 404, "UnknownFlow", "no flow '" + req.matches[1].str() + "'");
      res.status = 200;
      res.set_content(serialize_flow(*flow), "application/json");
    });

    server.Get(R"(/api/schedule/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string participant = req.matches[1].str();
      const Timestamp next =
          scheduled_prompt(settings.policy, settings.clock(), store.last_accepted(participant));
      reply_json(res, 200, {{"participant_id", participant}, {"next_prompt_at", format_timestamp(next)}});
    });

    server.Post("/api/responses", [this](const httplib::Request& req, httplib::Response& res) {
      ResponseRecord record;
      try {
        record = parse_record(req.body);
      } catch (const ParseError& e) {
        return reply_error(res, 400, "MalformedRecord", e.what());
      }
      if (!settings.active_flow.empty() && record.flow_id != settings.active_flow) {
        return reply_error(res, 422, to_string(RejectReason::UnknownFlow),
                           "flow '" + record.flow_id + "' is not the active flow '" + settings.active_flow + "'");
      }
      if (!record.zone_id && !zones.empty()) attribute_zone(record);

      const IngestOutcome outcome = store.ingest(std::move(record), flows, settings.rate_limit);
      if (const auto* ok = std::get_if<Accepted>(&outcome)) {
        return reply_json(res, 201, {{"record_id", ok->record_id}});
      }
      const auto& rejected = std::get<Rejected>(outcome);
      const bool conflict = rejected.reason == RejectReason::MinGapViolation ||
                            rejected.reason == RejectReason::DuplicateRecordId;
      reply_error(res, conflict ? 409 : 422, to_string(rejected.reason), rejected.detail);
    });

    server.Post("/api/observations", [this](const httplib::Request& req, httplib::Response& res) {
      std::vector<BeaconObservation> batch;
      std::istringstream lines(req.body);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          batch.push_back(parse_observation_line(line));
        } catch (const ParseError& e) {
          return reply_error(res, 400, "MalformedObservation", "line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      store.add_observations(batch);
      reply_json(res, 202, {{"accepted", batch.size()}});
    });

    server.Get("/api/records", [this](const httplib::Request& req, httplib::Response& res) {
      RecordFilter filter;
      try {
        if (req.has_param("flow")) filter.flow_id = req.get_param_value("flow");
        if (req.has_param("participant")) filter.participant_id = req.get_param_value("participant");
        if (req.has_param("zone")) filter.zone_id = req.get_param_value("zone");
        if (req.has_param("from")) filter.from = parse_timestamp(req.get_param_value("from"));
        if (req.has_param("to")) filter.to = parse_timestamp(req.get_param_value("to"));
      } catch (const ParseError& e) {
        return reply_error(res, 400, "BadQuery", e.what());
      }
      std::string body = "[";
      bool first = true;
      for (const auto& r : store.query(filter)) {
        if (!first) body += ",";
        body += record_to_json(r);
        first = false;
      }
      body += "]";
      res.status = 200;
      res.set_content(body, "application/json");
    });
  }

  void attribute_zone(ResponseRecord& record) const {
    const auto sightings = store.observations_for(record.participant_id, record.completed_at - settings.fix_window,
                                                  record.completed_at);
    try {
      if (auto fix = resolve_zone(sightings, record.completed_at, zones, settings.fix_window)) {
        record.zone_id = fix->zone_id;
      }
    } catch (const UnknownBeaconError&) {
      // Strongest beacon is not mapped; zone stays Unknown.
    }
  }
};

Service::Service(FlowRegistry flows, ZoneMap zones, Store& store, ServiceSettings settings)
    : impl_(std::make_unique<Impl>(std::move(flows), std::move(zones), store, std::move(settings))) {}

Service::~Service() = default;

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::run() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

bool Service::running() const { return impl_->server.is_running(); }

}  // namespace ema
