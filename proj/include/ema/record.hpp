#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ema/flow.hpp"
#include "ema/time.hpp"

namespace ema {

struct Answer {
  QuestionId question_id;
  std::string option_code;
  Timestamp answered_at;

  friend bool operator==(const Answer&, const Answer&) = default;
};

// One completed micro-survey. `zone_id` is nullopt when the respondent's
// zone is Unknown.
struct ResponseRecord {
  std::string record_id;
  std::string participant_id;
  std::string flow_id;
  std::string flow_version;
  std::vector<Answer> answers;
  Timestamp started_at;
  Timestamp completed_at;
  std::optional<std::string> zone_id;
  bool prompted = false;
  std::map<std::string, std::string> device_info;

  std::vector<AnswerStep> path() const;
  const Answer* answer_to(std::string_view question_id) const;
  Millis duration() const { return completed_at - started_at; }

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

// Compact single-line JSON with keys in sorted order; timestamps RFC 3339 ms.
std::string record_to_json(const ResponseRecord& record);
// Throws ParseError on missing fields, bad timestamps, or timestamps out of
// order (answers before started_at, decreasing answers, completed_at before
// started_at). An absent or empty record_id is left empty.
ResponseRecord parse_record(std::string_view json_text);

// Reads a JSON-lines file of records; blank lines are skipped.
std::vector<ResponseRecord> load_records_jsonl(const std::string& path);
void write_records_jsonl(const std::string& path, const std::vector<ResponseRecord>& records);

// Random 128-bit identifier as 32 lowercase hex digits.
std::string generate_id();

}  // namespace ema
