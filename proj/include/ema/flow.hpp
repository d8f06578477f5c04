#pragma once

// Branching micro-survey flows: an acyclic question graph with one entry
// question, where each chosen option names the next question or ends the
// survey.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ema/error.hpp"

namespace ema {

using QuestionId = std::string;

// Literal used in flow documents for "survey ends here".
inline constexpr std::string_view kEndMarker = "END";

constexpr std::size_t kMinOptions = 2;
constexpr std::size_t kMaxOptions = 6;
constexpr std::size_t kMinPathQuestions = 2;
constexpr std::size_t kMaxPathQuestions = 7;

class NextRef {
 public:
  static NextRef end() { return NextRef{}; }
  static NextRef go_to(QuestionId id) { return NextRef{std::move(id)}; }

  bool is_end() const { return target_.empty(); }
  // Empty for End.
  const QuestionId& target() const { return target_; }

  friend bool operator==(const NextRef&, const NextRef&) = default;

 private:
  NextRef() = default;
  explicit NextRef(QuestionId id) : target_(std::move(id)) {}
  QuestionId target_;
};

struct OptionDef {
  std::string code;
  std::string label;
  NextRef next = NextRef::end();

  friend bool operator==(const OptionDef&, const OptionDef&) = default;
};

struct QuestionDef {
  QuestionId id;
  std::string text;
  std::vector<OptionDef> options;

  const OptionDef* find_option(std::string_view code) const;

  friend bool operator==(const QuestionDef&, const QuestionDef&) = default;
};

// Immutable once parsed. Questions keep their document order so that
// serialization round-trips.
struct SurveyFlow {
  std::string flow_id;
  std::string title;
  std::string version;
  QuestionId start;
  std::vector<QuestionDef> questions;

  const QuestionDef* find(std::string_view id) const;

  friend bool operator==(const SurveyFlow&, const SurveyFlow&) = default;
};

SurveyFlow parse_flow(std::string_view text);
std::string serialize_flow(const SurveyFlow& flow);
SurveyFlow load_flow_file(const std::string& path);

enum class FlowErrorKind {
  DanglingReference,
  CycleDetected,
  UnreachableQuestion,
  DuplicateId,
  TooFewOptions,
  TooManyOptions,
  MissingStart,
};

enum class FlowWarningKind {
  PathDepthExceeded,
  // A maximal path that visits a single question, i.e. the start question
  // can end the survey on its own.
  SingleUseQuestion,
};

std::string_view to_string(FlowErrorKind kind);
std::string_view to_string(FlowWarningKind kind);

// Empty question_id means the issue concerns the whole flow.
struct FlowLocation {
  QuestionId question_id;
  std::string option_code;

  std::string to_string() const;
  friend bool operator==(const FlowLocation&, const FlowLocation&) = default;
};

template <typename Kind>
struct FlowIssue {
  Kind kind;
  FlowLocation location;
  std::string message;
};

using FlowError = FlowIssue<FlowErrorKind>;
using FlowWarning = FlowIssue<FlowWarningKind>;

struct ValidationReport {
  std::vector<FlowError> errors;
  std::vector<FlowWarning> warnings;

  bool ok() const { return errors.empty(); }
  std::size_t count(FlowErrorKind kind) const;
  std::size_t count(FlowWarningKind kind) const;
  // One line per issue, `error <Kind> at <location>: <message>`.
  std::string to_text() const;
};

ValidationReport validate_flow(const SurveyFlow& flow);

class InvalidFlowError : public std::invalid_argument {
 public:
  explicit InvalidFlowError(const std::string& what) : std::invalid_argument(what) {}
};

struct AnswerStep {
  QuestionId question_id;
  std::string option_code;

  friend auto operator<=>(const AnswerStep&, const AnswerStep&) = default;
};

using AnswerPath = std::vector<AnswerStep>;

// All start-to-End paths, depth first in option order. Throws
// InvalidFlowError when validate_flow reports errors.
std::vector<AnswerPath> enumerate_paths(const SurveyFlow& flow);

enum class PathStatus {
  Complete,  // valid edge walk from start ending at End
  Prefix,    // valid so far, survey not finished
  Invalid,
};

// Walks `steps` along the graph without enumerating paths.
PathStatus check_path(const SurveyFlow& flow, const std::vector<AnswerStep>& steps);

// Longest start-to-End path in questions. Requires an acyclic flow.
std::size_t max_path_length(const SurveyFlow& flow);

// `infection_risk`, `privacy_distraction`, `movement_triggers`, in that order.
const std::vector<SurveyFlow>& canonical_flows();
const SurveyFlow& canonical_flow(std::string_view flow_id);

// Flows known to the service, keyed by id and version.
class FlowRegistry {
 public:
  // Throws InvalidFlowError if the flow does not validate or the
  // (flow_id, version) pair is already registered.
  void add(SurveyFlow flow);

  std::shared_ptr<const SurveyFlow> find(std::string_view flow_id, std::string_view version) const;
  // Most recently added version of `flow_id`.
  std::shared_ptr<const SurveyFlow> latest(std::string_view flow_id) const;
  // One entry per flow id (latest version), ordered by flow id.
  std::vector<std::shared_ptr<const SurveyFlow>> latest_all() const;

  static FlowRegistry with_canonical_flows();

 private:
  std::map<std::pair<std::string, std::string>, std::shared_ptr<const SurveyFlow>, std::less<>> flows_;
  std::map<std::string, std::shared_ptr<const SurveyFlow>, std::less<>> latest_;
};

}  // namespace ema
