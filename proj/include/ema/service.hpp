#pragma once

// HTTP/1.1 JSON front end over a Store:
//   GET  /healthz
//   GET  /api/flows                 flow summaries, `active` marks the deployed flow
//   GET  /api/flows/{flow_id}       flow document
//   GET  /api/schedule/{participant} {participant_id, next_prompt_at}
//   POST /api/responses             record -> 201 {record_id} | 409 | 422 {reason, detail}
//   POST /api/observations          JSON lines -> 202 {accepted}
//   GET  /api/records?flow=&from=&to=&zone=&participant=

#include <functional>
#include <memory>
#include <string>

#include "ema/flow.hpp"
#include "ema/locator.hpp"
#include "ema/schedule.hpp"
#include "ema/store.hpp"

namespace ema {

struct ServiceSettings {
  PromptPolicy policy;
  RateLimit rate_limit;
  // Only responses to this flow are accepted; empty accepts any registered flow.
  std::string active_flow;
  Millis fix_window = kDefaultFixWindow;
  std::function<Timestamp()> clock = [] {
    return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
  };
};

class Service {
 public:
  Service(FlowRegistry flows, ZoneMap zones, Store& store, ServiceSettings settings);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 binds any free port. Returns the bound port, or -1 on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ema
