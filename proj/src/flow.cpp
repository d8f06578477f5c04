#include "ema/flow.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ema {

namespace detail {
const std::vector<std::string_view>& bundled_flow_documents();
}

namespace {

using nlohmann::json;

bool is_id_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

bool is_code_token(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](unsigned char c) { return c <= ' ' || c == 0x7f; });
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError("missing required field '" + std::string(key) + "'", where + "/" + key);
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& value = require(obj, key, where);
  if (!value.is_string()) {
    throw ParseError("field '" + std::string(key) + "' must be a string", where + "/" + key);
  }
  return value.get<std::string>();
}

std::string require_nonempty(const json& obj, const char* key, const std::string& where) {
  std::string value = require_string(obj, key, where);
  if (value.empty()) throw ParseError("field '" + std::string(key) + "' must not be empty", where + "/" + key);
  return value;
}

std::string require_id(const json& obj, const char* key, const std::string& where) {
  std::string value = require_string(obj, key, where);
  if (!is_id_token(value)) {
    throw ParseError("field '" + std::string(key) + "' must match [a-z0-9_]+, got '" + value + "'",
                     where + "/" + key);
  }
  return value;
}

const std::regex& semver_pattern() {
  static const std::regex pattern(R"(^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)(-[0-9A-Za-z.-]+)?(\+[0-9A-Za-z.-]+)?$)");
  return pattern;
}

// Precedence of two versions that both match semver_pattern(). Build
// metadata is ignored; prerelease tags compare as plain strings.
bool version_less(const std::string& a, const std::string& b) {
  std::smatch ma, mb;
  std::regex_match(a, ma, semver_pattern());
  std::regex_match(b, mb, semver_pattern());
  for (int i = 1; i <= 3; ++i) {
    const auto x = std::stoull(ma[i].str()), y = std::stoull(mb[i].str());
    if (x != y) return x < y;
  }
  const std::string pa = ma[4].str(), pb = mb[4].str();
  if (pa.empty() || pb.empty()) return !pa.empty() && pb.empty();
  return pa < pb;
}

}  // namespace

const OptionDef* QuestionDef::find_option(std::string_view code) const {
  for (const auto& option : options) {
    if (option.code == code) return &option;
  }
  return nullptr;
}

const QuestionDef* SurveyFlow::find(std::string_view id) const {
  for (const auto& question : questions) {
    if (question.id == id) return &question;
  }
  return nullptr;
}

SurveyFlow parse_flow(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed flow document: ") + e.what(), {}, line_of_offset(text, e.byte));
  }
  if (!doc.is_object()) throw ParseError("flow document must be a JSON object", "", 1);

  SurveyFlow flow;
  flow.flow_id = require_id(doc, "flow_id", "");
  flow.title = require_string(doc, "title", "");
  flow.version = require_string(doc, "version", "");
  if (!std::regex_match(flow.version, semver_pattern())) {
    throw ParseError("version '" + flow.version + "' is not a semantic version", "/version");
  }
  flow.start = require_id(doc, "start", "");

  const json& questions = require(doc, "questions", "");
  if (!questions.is_array()) throw ParseError("field 'questions' must be an array", "/questions");
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const std::string where = "/questions/" + std::to_string(qi);
    const json& q = questions[qi];
    if (!q.is_object()) throw ParseError("question must be an object", where);
    QuestionDef question;
    question.id = require_id(q, "id", where);
    question.text = require_nonempty(q, "text", where);
    const json& options = require(q, "options", where);
    if (!options.is_array()) throw ParseError("field 'options' must be an array", where + "/options");
    for (std::size_t oi = 0; oi < options.size(); ++oi) {
      const std::string owhere = where + "/options/" + std::to_string(oi);
      const json& o = options[oi];
      if (!o.is_object()) throw ParseError("option must be an object", owhere);
      OptionDef option;
      option.code = require_string(o, "code", owhere);
      if (!is_code_token(option.code)) {
        throw ParseError("option code must be a non-empty token without whitespace", owhere + "/code");
      }
      option.label = require_nonempty(o, "label", owhere);
      const std::string next = require_string(o, "next", owhere);
      if (next == kEndMarker) {
        option.next = NextRef::end();
      } else if (is_id_token(next)) {
        option.next = NextRef::go_to(next);
      } else {
        throw ParseError("'next' must be \"END\" or a question id, got '" + next + "'", owhere + "/next");
      }
      question.options.push_back(std::move(option));
    }
    flow.questions.push_back(std::move(question));
  }
  return flow;
}

std::string serialize_flow(const SurveyFlow& flow) {
  // ordered_json keeps the document's conventional key order.
  nlohmann::ordered_json doc;
  doc["flow_id"] = flow.flow_id;
  doc["title"] = flow.title;
  doc["version"] = flow.version;
  doc["start"] = flow.start;
  doc["questions"] = nlohmann::ordered_json::array();
  for (const auto& question : flow.questions) {
    nlohmann::ordered_json q;
    q["id"] = question.id;
    q["text"] = question.text;
    q["options"] = nlohmann::ordered_json::array();
    for (const auto& option : question.options) {
      nlohmann::ordered_json o;
      o["code"] = option.code;
      o["label"] = option.label;
      o["next"] = option.next.is_end() ? std::string(kEndMarker) : option.next.target();
      q["options"].push_back(std::move(o));
    }
    doc["questions"].push_back(std::move(q));
  }
  return doc.dump(2) + "\n";
}

SurveyFlow load_flow_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read flow file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_flow(buf.str());
}

std::string_view to_string(FlowErrorKind kind) {
  switch (kind) {
    case FlowErrorKind::DanglingReference: return "DanglingReference";
    case FlowErrorKind::CycleDetected: return "CycleDetected";
    case FlowErrorKind::UnreachableQuestion: return "UnreachableQuestion";
    case FlowErrorKind::DuplicateId: return "DuplicateId";
    case FlowErrorKind::TooFewOptions: return "TooFewOptions";
    case FlowErrorKind::TooManyOptions: return "TooManyOptions";
    case FlowErrorKind::MissingStart: return "MissingStart";
  }
  return "?";
}

std::string_view to_string(FlowWarningKind kind) {
  switch (kind) {
    case FlowWarningKind::PathDepthExceeded: return "PathDepthExceeded";
    case FlowWarningKind::SingleUseQuestion: return "SingleUseQuestion";
  }
  return "?";
}

std::string FlowLocation::to_string() const {
  if (question_id.empty()) return "flow";
  if (option_code.empty()) return question_id;
  return question_id + "/" + option_code;
}

std::size_t ValidationReport::count(FlowErrorKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(errors.begin(), errors.end(), [kind](const FlowError& e) { return e.kind == kind; }));
}

std::size_t ValidationReport::count(FlowWarningKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(warnings.begin(), warnings.end(), [kind](const FlowWarning& w) { return w.kind == kind; }));
}

std::string ValidationReport::to_text() const {
  std::string out;
  for (const auto& e : errors) {
    out += "error " + std::string(ema::to_string(e.kind)) + " at " + e.location.to_string() + ": " + e.message + "\n";
  }
  for (const auto& w : warnings) {
    out += "warning " + std::string(ema::to_string(w.kind)) + " at " + w.location.to_string() + ": " + w.message +
           "\n";
  }
  return out;
}

namespace {

// Longest path (in questions) from `q` to End, memoized by question id.
std::size_t longest_from(const SurveyFlow& flow, const QuestionDef& q, std::map<std::string, std::size_t>& memo) {
  if (auto it = memo.find(q.id); it != memo.end()) return it->second;
  std::size_t best = 1;
  for (const auto& option : q.options) {
    if (option.next.is_end()) continue;
    if (const QuestionDef* child = flow.find(option.next.target())) {
      best = std::max(best, 1 + longest_from(flow, *child, memo));
    }
  }
  memo.emplace(q.id, best);
  return best;
}

}  // namespace

ValidationReport validate_flow(const SurveyFlow& flow) {
  ValidationReport report;
  auto error = [&](FlowErrorKind kind, FlowLocation where, std::string message) {
    report.errors.push_back({kind, std::move(where), std::move(message)});
  };

  std::set<std::string> seen_ids;
  for (const auto& q : flow.questions) {
    if (!seen_ids.insert(q.id).second) {
      error(FlowErrorKind::DuplicateId, {q.id, {}}, "question id '" + q.id + "' defined more than once");
    }
    if (q.options.size() < kMinOptions) {
      error(FlowErrorKind::TooFewOptions, {q.id, {}},
            "question has " + std::to_string(q.options.size()) + " options, needs at least 2");
    } else if (q.options.size() > kMaxOptions) {
      error(FlowErrorKind::TooManyOptions, {q.id, {}},
            "question has " + std::to_string(q.options.size()) + " options, at most 6 allowed");
    }
    std::set<std::string> codes;
    for (const auto& option : q.options) {
      if (!codes.insert(option.code).second) {
        error(FlowErrorKind::DuplicateId, {q.id, option.code}, "option code '" + option.code + "' repeated");
      }
      if (!option.next.is_end() && flow.find(option.next.target()) == nullptr) {
        error(FlowErrorKind::DanglingReference, {q.id, option.code},
              "option '" + option.code + "' points to undefined question '" + option.next.target() + "'");
      }
    }
  }

  const QuestionDef* start = flow.find(flow.start);
  if (start == nullptr) {
    error(FlowErrorKind::MissingStart, {}, "start question '" + flow.start + "' is not defined");
  }

  // Cycle detection by DFS colouring.
  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark> marks;
  for (const auto& q : flow.questions) marks[q.id] = Mark::White;
  bool cyclic = false;
  std::function<void(const QuestionDef&)> visit = [&](const QuestionDef& q) {
    marks[q.id] = Mark::Grey;
    for (const auto& option : q.options) {
      if (option.next.is_end()) continue;
      const QuestionDef* child = flow.find(option.next.target());
      if (child == nullptr) continue;
      const Mark m = marks[child->id];
      if (m == Mark::Grey) {
        cyclic = true;
        error(FlowErrorKind::CycleDetected, {q.id, option.code},
              "option '" + option.code + "' returns to '" + child->id + "', forming a cycle");
      } else if (m == Mark::White) {
        visit(*child);
      }
    }
    marks[q.id] = Mark::Black;
  };
  if (start != nullptr) visit(*start);
  for (const auto& q : flow.questions) {
    if (marks[q.id] == Mark::White) visit(q);
  }

  if (start != nullptr) {
    std::set<std::string> reached{start->id};
    std::vector<const QuestionDef*> frontier{start};
    while (!frontier.empty()) {
      const QuestionDef* q = frontier.back();
      frontier.pop_back();
      for (const auto& option : q->options) {
        if (option.next.is_end()) continue;
        const QuestionDef* child = flow.find(option.next.target());
        if (child != nullptr && reached.insert(child->id).second) frontier.push_back(child);
      }
    }
    std::set<std::string> reported;
    for (const auto& q : flow.questions) {
      if (!reached.contains(q.id) && reported.insert(q.id).second) {
        error(FlowErrorKind::UnreachableQuestion, {q.id, {}}, "question cannot be reached from the start");
      }
    }
  }

  if (start != nullptr && !cyclic) {
    std::map<std::string, std::size_t> memo;
    const std::size_t depth = longest_from(flow, *start, memo);
    if (depth > kMaxPathQuestions) {
      report.warnings.push_back({FlowWarningKind::PathDepthExceeded, {},
                                 "longest path visits " + std::to_string(depth) + " questions (more than 7)"});
    }
    for (const auto& option : start->options) {
      if (option.next.is_end()) {
        report.warnings.push_back({FlowWarningKind::SingleUseQuestion, {start->id, option.code},
                                   "survey can end after a single question"});
      }
    }
  }
  return report;
}

namespace {

void require_valid(const SurveyFlow& flow) {
  const ValidationReport report = validate_flow(flow);
  if (!report.ok()) {
    throw InvalidFlowError("flow '" + flow.flow_id + "' has validation errors:\n" + report.to_text());
  }
}

void collect_paths(const SurveyFlow& flow, const QuestionDef& q, AnswerPath& prefix, std::vector<AnswerPath>& out) {
  for (const auto& option : q.options) {
    prefix.push_back({q.id, option.code});
    if (option.next.is_end()) {
      out.push_back(prefix);
    } else {
      collect_paths(flow, *flow.find(option.next.target()), prefix, out);
    }
    prefix.pop_back();
  }
}

}  // namespace

std::vector<AnswerPath> enumerate_paths(const SurveyFlow& flow) {
  require_valid(flow);
  std::vector<AnswerPath> paths;
  AnswerPath prefix;
  collect_paths(flow, *flow.find(flow.start), prefix, paths);
  return paths;
}

PathStatus check_path(const SurveyFlow& flow, const std::vector<AnswerStep>& steps) {
  const QuestionDef* current = flow.find(flow.start);
  for (const auto& step : steps) {
    if (current == nullptr || step.question_id != current->id) return PathStatus::Invalid;
    const OptionDef* option = current->find_option(step.option_code);
    if (option == nullptr) return PathStatus::Invalid;
    current = option->next.is_end() ? nullptr : flow.find(option->next.target());
    if (!option->next.is_end() && current == nullptr) return PathStatus::Invalid;
  }
  return current == nullptr ? PathStatus::Complete : PathStatus::Prefix;
}

std::size_t max_path_length(const SurveyFlow& flow) {
  const QuestionDef* start = flow.find(flow.start);
  if (start == nullptr) return 0;
  std::map<std::string, std::size_t> memo;
  return longest_from(flow, *start, memo);
}

const std::vector<SurveyFlow>& canonical_flows() {
  static const std::vector<SurveyFlow> flows = [] {
    std::vector<SurveyFlow> out;
    for (std::string_view doc : detail::bundled_flow_documents()) out.push_back(parse_flow(doc));
    return out;
  }();
  return flows;
}

const SurveyFlow& canonical_flow(std::string_view flow_id) {
  for (const auto& flow : canonical_flows()) {
    if (flow.flow_id == flow_id) return flow;
  }
  throw std::out_of_range("no canonical flow named '" + std::string(flow_id) + "'");
}

void FlowRegistry::add(SurveyFlow flow) {
  require_valid(flow);
  auto key = std::make_pair(flow.flow_id, flow.version);
  if (auto it = flows_.find(key); it != flows_.end()) {
    // Re-registering the same definition (e.g. a bundled flow listed in a
    // config) is harmless; a different one under the same version is not.
    if (*it->second == flow) return;
    throw InvalidFlowError("flow '" + flow.flow_id + "' version " + flow.version +
                           " already registered with different content");
  }
  auto shared = std::make_shared<const SurveyFlow>(std::move(flow));
  flows_.emplace(std::move(key), shared);
  auto& latest = latest_[shared->flow_id];
  if (!latest || version_less(latest->version, shared->version)) latest = shared;
}

std::shared_ptr<const SurveyFlow> FlowRegistry::find(std::string_view flow_id, std::string_view version) const {
  auto it = flows_.find(std::make_pair(std::string(flow_id), std::string(version)));
  return it == flows_.end() ? nullptr : it->second;
}

std::shared_ptr<const SurveyFlow> FlowRegistry::latest(std::string_view flow_id) const {
  auto it = latest_.find(flow_id);
  return it == latest_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<const SurveyFlow>> FlowRegistry::latest_all() const {
  std::vector<std::shared_ptr<const SurveyFlow>> out;
  for (const auto& [id, flow] : latest_) out.push_back(flow);
  return out;
}

FlowRegistry FlowRegistry::with_canonical_flows() {
  FlowRegistry registry;
  for (const auto& flow : canonical_flows()) registry.add(flow);
  return registry;
}

}  // namespace ema
