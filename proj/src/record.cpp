#include "ema/record.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "ema/error.hpp"
#include "json.hpp"

namespace ema {

using nlohmann::json;

std::vector<AnswerStep> ResponseRecord::path() const {
  std::vector<AnswerStep> steps;
  steps.reserve(answers.size());
  for (const auto& a : answers) steps.push_back({a.question_id, a.option_code});
  return steps;
}

const Answer* ResponseRecord::answer_to(std::string_view question_id) const {
  for (const auto& a : answers) {
    if (a.question_id == question_id) return &a;
  }
  return nullptr;
}

std::string record_to_json(const ResponseRecord& r) {
  json doc;
  doc["record_id"] = r.record_id;
  doc["participant_id"] = r.participant_id;
  doc["flow_id"] = r.flow_id;
  doc["flow_version"] = r.flow_version;
  doc["answers"] = json::array();
  for (const auto& a : r.answers) {
    doc["answers"].push_back(
        {{"question_id", a.question_id}, {"option_code", a.option_code}, {"answered_at", format_timestamp(a.answered_at)}});
  }
  doc["started_at"] = format_timestamp(r.started_at);
  doc["completed_at"] = format_timestamp(r.completed_at);
  doc["zone_id"] = r.zone_id ? json(*r.zone_id) : json(nullptr);
  doc["prompted"] = r.prompted;
  doc["device_info"] = r.device_info;
  return doc.dump();
}

namespace {

std::string get_string(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ParseError("record is missing '" + std::string(key) + "'", key);
  if (!it->is_string()) throw ParseError("record field '" + std::string(key) + "' must be a string", key);
  return it->get<std::string>();
}

Timestamp get_time(const json& doc, const char* key) {
  const std::string text = get_string(doc, key);
  try {
    return parse_timestamp(text);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), key);
  }
}

}  // namespace

ResponseRecord parse_record(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed record: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("record must be a JSON object");

  ResponseRecord r;
  if (auto it = doc.find("record_id"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("record field 'record_id' must be a string", "record_id");
    r.record_id = it->get<std::string>();
  }
  r.participant_id = get_string(doc, "participant_id");
  if (r.participant_id.empty()) throw ParseError("participant_id must not be empty", "participant_id");
  r.flow_id = get_string(doc, "flow_id");
  r.flow_version = get_string(doc, "flow_version");
  r.started_at = get_time(doc, "started_at");
  r.completed_at = get_time(doc, "completed_at");

  auto answers = doc.find("answers");
  if (answers == doc.end() || !answers->is_array()) throw ParseError("record needs an 'answers' array", "answers");
  for (std::size_t i = 0; i < answers->size(); ++i) {
    const json& a = (*answers)[i];
    if (!a.is_object()) throw ParseError("answer must be an object", "answers/" + std::to_string(i));
    Answer answer;
    answer.question_id = get_string(a, "question_id");
    answer.option_code = get_string(a, "option_code");
    answer.answered_at = get_time(a, "answered_at");
    r.answers.push_back(std::move(answer));
  }

  if (auto it = doc.find("zone_id"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("zone_id must be a string or null", "zone_id");
    if (!it->get<std::string>().empty()) r.zone_id = it->get<std::string>();
  }
  if (auto it = doc.find("prompted"); it != doc.end()) {
    if (!it->is_boolean()) throw ParseError("prompted must be a boolean", "prompted");
    r.prompted = it->get<bool>();
  }
  if (auto it = doc.find("device_info"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("device_info must be an object", "device_info");
    for (const auto& [key, value] : it->items()) {
      r.device_info[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }

  if (r.completed_at < r.started_at) throw ParseError("completed_at precedes started_at", "completed_at");
  Timestamp previous = r.started_at;
  for (const auto& a : r.answers) {
    if (a.answered_at < previous) throw ParseError("answer timestamps must be non-decreasing", "answers");
    previous = a.answered_at;
  }
  if (previous > r.completed_at) throw ParseError("an answer is later than completed_at", "completed_at");
  return r;
}

std::vector<ResponseRecord> load_records_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read records file '" + path + "'");
  std::vector<ResponseRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_record(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), e.field(), line_no);
    }
  }
  return records;
}

void write_records_jsonl(const std::string& path, const std::vector<ResponseRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write records file '" + path + "'");
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

std::string generate_id() {
  thread_local std::mt19937_64 rng{[] {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id(32, '0');
  for (int half = 0; half < 2; ++half) {
    std::uint64_t bits = rng();
    for (int i = 0; i < 16; ++i) {
      id[half * 16 + i] = kHex[bits & 0xf];
      bits >>= 4;
    }
  }
  return id;
}

}  // namespace ema
