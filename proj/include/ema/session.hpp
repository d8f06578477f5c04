#pragma once

// Forward-only walk through a flow. A Session has a single owner; different
// participants' sessions are independent values.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ema/flow.hpp"
#include "ema/locator.hpp"
#include "ema/record.hpp"
#include "ema/time.hpp"

namespace ema {

// Inactivity after which an Active session is aborted.
constexpr std::chrono::seconds kSessionIdleTimeout{120};

enum class SessionState { Active, Completed, Aborted };

std::string_view to_string(SessionState state);

enum class SessionErrorKind {
  InvalidFlow,
  UnknownOption,
  SessionNotActive,
  NonMonotonicTimestamp,
  SessionNotCompleted,
};

std::string_view to_string(SessionErrorKind kind);

class SessionError : public std::runtime_error {
 public:
  SessionError(SessionErrorKind kind, const std::string& message);
  SessionErrorKind kind() const noexcept { return kind_; }

 private:
  SessionErrorKind kind_;
};

struct Advanced {
  QuestionId next;
  friend bool operator==(const Advanced&, const Advanced&) = default;
};
struct Completed {
  friend bool operator==(const Completed&, const Completed&) = default;
};
using SubmitOutcome = std::variant<Advanced, Completed>;

class Session {
 public:
  // Throws SessionError(InvalidFlow) when the flow fails validation.
  static Session start(std::shared_ptr<const SurveyFlow> flow, std::string participant_id, Timestamp now,
                       std::string session_id = {});

  // Throws SessionError: UnknownOption, SessionNotActive, NonMonotonicTimestamp.
  SubmitOutcome submit_answer(std::string_view option_code, Timestamp now);

  // Aborts an Active session idle for longer than kSessionIdleTimeout.
  // Returns true when the session is (now) Aborted.
  bool expire_if_idle(Timestamp now);
  void abort();

  const std::string& session_id() const { return session_id_; }
  const std::string& participant_id() const { return participant_id_; }
  const SurveyFlow& flow() const { return *flow_; }
  const std::string& flow_id() const { return flow_->flow_id; }
  const std::string& flow_version() const { return flow_->version; }
  SessionState state() const { return state_; }
  // Only meaningful while Active.
  const QuestionDef& current_question() const;
  const std::vector<Answer>& answers() const { return answers_; }
  Timestamp started_at() const { return started_at_; }
  Timestamp last_activity() const { return answers_.empty() ? started_at_ : answers_.back().answered_at; }

 private:
  Session() = default;

  std::string session_id_;
  std::string participant_id_;
  std::shared_ptr<const SurveyFlow> flow_;
  SessionState state_ = SessionState::Active;
  const QuestionDef* current_ = nullptr;
  std::vector<Answer> answers_;
  Timestamp started_at_;
};

Session start_session(const SurveyFlow& flow, std::string participant_id, Timestamp now);
SubmitOutcome submit_answer(Session& session, std::string_view option_code, Timestamp now);

// Seconds from start to the last answer. Throws SessionError(SessionNotCompleted).
double session_duration(const Session& session);

struct RecordMeta {
  bool prompted = false;
  std::map<std::string, std::string> device_info;
};

// record_id is the session id; completed_at is the last answer's time.
// Throws SessionError(SessionNotCompleted).
ResponseRecord to_record(const Session& session, const std::optional<LocationFix>& fix, const RecordMeta& meta = {});

}  // namespace ema
