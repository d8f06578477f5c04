#include "ema/session.hpp"

namespace ema {

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Active: return "Active";
    case SessionState::Completed: return "Completed";
    case SessionState::Aborted: return "Aborted";
  }
  return "?";
}

std::string_view to_string(SessionErrorKind kind) {
  switch (kind) {
    case SessionErrorKind::InvalidFlow: return "InvalidFlow";
    case SessionErrorKind::UnknownOption: return "UnknownOption";
    case SessionErrorKind::SessionNotActive: return "SessionNotActive";
    case SessionErrorKind::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case SessionErrorKind::SessionNotCompleted: return "SessionNotCompleted";
  }
  return "?";
}

SessionError::SessionError(SessionErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Session Session::start(std::shared_ptr<const SurveyFlow> flow, std::string participant_id, Timestamp now,
                       std::string session_id) {
  if (!flow) throw SessionError(SessionErrorKind::InvalidFlow, "no flow given");
  const ValidationReport report = validate_flow(*flow);
  if (!report.ok()) throw SessionError(SessionErrorKind::InvalidFlow, report.to_text());

  Session s;
  s.session_id_ = session_id.empty() ? generate_id() : std::move(session_id);
  s.participant_id_ = std::move(participant_id);
  s.flow_ = std::move(flow);
  s.current_ = s.flow_->find(s.flow_->start);
  s.started_at_ = now;
  return s;
}

const QuestionDef& Session::current_question() const {
  if (state_ != SessionState::Active) {
    throw SessionError(SessionErrorKind::SessionNotActive, "session is " + std::string(to_string(state_)));
  }
  return *current_;
}

SubmitOutcome Session::submit_answer(std::string_view option_code, Timestamp now) {
  if (state_ != SessionState::Active) {
    throw SessionError(SessionErrorKind::SessionNotActive, "session is " + std::string(to_string(state_)));
  }
  const OptionDef* option = current_->find_option(option_code);
  if (option == nullptr) {
    throw SessionError(SessionErrorKind::UnknownOption,
                       "'" + std::string(option_code) + "' is not an option of '" + current_->id + "'");
  }
  if (now < last_activity()) {
    throw SessionError(SessionErrorKind::NonMonotonicTimestamp, "answer time precedes the previous event");
  }
  answers_.push_back({current_->id, option->code, now});
  if (option->next.is_end()) {
    state_ = SessionState::Completed;
    current_ = nullptr;
    return Completed{};
  }
  current_ = flow_->find(option->next.target());
  return Advanced{current_->id};
}

bool Session::expire_if_idle(Timestamp now) {
  if (state_ == SessionState::Active && now - last_activity() > kSessionIdleTimeout) abort();
  return state_ == SessionState::Aborted;
}

void Session::abort() {
  if (state_ == SessionState::Active) {
    state_ = SessionState::Aborted;
    current_ = nullptr;
  }
}

Session start_session(const SurveyFlow& flow, std::string participant_id, Timestamp now) {
  return Session::start(std::make_shared<const SurveyFlow>(flow), std::move(participant_id), now);
}

SubmitOutcome submit_answer(Session& session, std::string_view option_code, Timestamp now) {
  return session.submit_answer(option_code, now);
}

double session_duration(const Session& session) {
  if (session.state() != SessionState::Completed) {
    throw SessionError(SessionErrorKind::SessionNotCompleted, "duration needs a completed session");
  }
  return to_seconds(session.answers().back().answered_at - session.started_at());
}

ResponseRecord to_record(const Session& session, const std::optional<LocationFix>& fix, const RecordMeta& meta) {
  if (session.state() != SessionState::Completed) {
    throw SessionError(SessionErrorKind::SessionNotCompleted, "only completed sessions become records");
  }
  ResponseRecord r;
  r.record_id = session.session_id();
  r.participant_id = session.participant_id();
  r.flow_id = session.flow_id();
  r.flow_version = session.flow_version();
  r.answers = session.answers();
  r.started_at = session.started_at();
  r.completed_at = session.answers().back().answered_at;
  if (fix) r.zone_id = fix->zone_id;
  r.prompted = meta.prompted;
  r.device_info = meta.device_info;
  return r;
}

}  // namespace ema
