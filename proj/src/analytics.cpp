#include "ema/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ema/error.hpp"
#include "json.hpp"

namespace ema {

namespace {

const QuestionDef& require_question(const SurveyFlow& flow, std::string_view question_id) {
  const QuestionDef* q = flow.find(question_id);
  if (q == nullptr) throw UnknownQuestionError(flow.flow_id, std::string(question_id));
  return *q;
}

std::vector<OptionCount> empty_counts(const QuestionDef& q) {
  std::vector<OptionCount> out;
  for (const auto& option : q.options) out.push_back({option.code, 0, std::nullopt});
  return out;
}

// Adds one answer; returns false for codes the question does not define.
bool tally(std::vector<OptionCount>& counts, std::string_view code) {
  for (auto& c : counts) {
    if (c.code == code) {
      ++c.count;
      return true;
    }
  }
  return false;
}

std::size_t fill_shares(std::vector<OptionCount>& counts) {
  std::size_t total = 0;
  for (const auto& c : counts) total += c.count;
  for (auto& c : counts) {
    c.share = total == 0 ? std::nullopt
                         : std::optional<double>(static_cast<double>(c.count) / static_cast<double>(total));
  }
  return total;
}

template <typename T>
const T& find_by(const std::vector<T>& items, std::string_view key, auto field, const char* what) {
  for (const auto& item : items) {
    if (item.*field == key) return item;
  }
  throw std::out_of_range(std::string("no ") + what + " '" + std::string(key) + "'");
}

}  // namespace

const OptionCount& QuestionBreakdown::option(std::string_view code) const {
  return find_by(options, code, &OptionCount::code, "option");
}

const CrossTabRow& CrossTab::row(std::string_view label) const {
  return find_by(rows, label, &CrossTabRow::label, "row");
}

QuestionBreakdown breakdown(std::span<const ResponseRecord> records, const SurveyFlow& flow,
                            std::string_view question_id) {
  const QuestionDef& q = require_question(flow, question_id);
  QuestionBreakdown out;
  out.flow_id = flow.flow_id;
  out.question_id = q.id;
  out.options = empty_counts(q);
  for (const auto& r : records) {
    if (r.flow_id != flow.flow_id) continue;
    if (const Answer* a = r.answer_to(q.id)) tally(out.options, a->option_code);
  }
  out.denominator = fill_shares(out.options);
  return out;
}

std::vector<std::string> concern_ranking(std::span<const ResponseRecord> records, const SurveyFlow& flow,
                                         std::string_view question_id) {
  QuestionBreakdown b = breakdown(records, flow, question_id);
  std::sort(b.options.begin(), b.options.end(), [](const OptionCount& x, const OptionCount& y) {
    if (x.count != y.count) return x.count > y.count;
    return x.code < y.code;
  });
  std::vector<std::string> out;
  for (const auto& o : b.options) out.push_back(o.code);
  return out;
}

CrossTab crosstab(std::span<const ResponseRecord> records, const SurveyFlow& flow, std::string_view question_id,
                  const ZoneMap& map, GroupBy group_by) {
  const QuestionDef& q = require_question(flow, question_id);
  CrossTab out;
  out.flow_id = flow.flow_id;
  out.question_id = q.id;
  out.group_by = group_by;
  for (const auto& option : q.options) out.columns.push_back(option.code);

  std::vector<std::string> labels;
  if (group_by == GroupBy::Ventilation) {
    labels = {std::string(to_string(Ventilation::Natural)), std::string(to_string(Ventilation::Mechanical))};
  } else {
    for (const auto& zone : map.zones()) labels.push_back(zone.zone_id);
  }
  labels.emplace_back(kUnknownRow);
  for (auto& label : labels) out.rows.push_back({std::move(label), 0, empty_counts(q)});

  auto row_index = [&](const ResponseRecord& r) -> std::size_t {
    const Zone* zone = r.zone_id ? map.find(*r.zone_id) : nullptr;
    if (zone == nullptr) return out.rows.size() - 1;
    if (group_by == GroupBy::Ventilation) return zone->ventilation == Ventilation::Natural ? 0 : 1;
    return static_cast<std::size_t>(&*zone - map.zones().data());
  };

  for (const auto& r : records) {
    if (r.flow_id != flow.flow_id) continue;
    if (const Answer* a = r.answer_to(q.id)) tally(out.rows[row_index(r)].cells, a->option_code);
  }
  for (auto& row : out.rows) row.total = fill_shares(row.cells);
  return out;
}

std::map<std::string, ZoneShare> zone_privacy_profile(std::span<const ResponseRecord> records,
                                                      const SurveyFlow& flow, const ZoneMap& map) {
  std::map<std::string, ZoneShare> out;
  for (const auto& r : records) {
    if (r.flow_id != flow.flow_id) continue;
    const Answer* a = r.answer_to("need_privacy");
    if (a == nullptr) continue;
    const std::string zone = (r.zone_id && map.find(*r.zone_id)) ? *r.zone_id : std::string(kUnknownRow);
    ZoneShare& s = out[zone];
    ++s.denominator;
    if (a->option_code == "yes") ++s.yes;
  }
  for (auto& [zone, s] : out) s.share = static_cast<double>(s.yes) / static_cast<double>(s.denominator);
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

CompletionStats completion_stats(std::span<const ResponseRecord> records) {
  CompletionStats stats;
  std::vector<double> durations;
  durations.reserve(records.size());
  for (const auto& r : records) durations.push_back(to_seconds(r.duration()));
  stats.count = durations.size();
  if (durations.empty()) return stats;
  stats.median = percentile(durations, 0.5);
  stats.p10 = percentile(durations, 0.1);
  stats.p90 = percentile(durations, 0.9);
  return stats;
}

namespace {

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void csv_rows(std::string& out, const std::string& dimension, const std::vector<OptionCount>& cells) {
  for (const auto& c : cells) {
    out += csv_field(dimension) + "," + csv_field(c.code) + "," + std::to_string(c.count) + ",";
    if (c.share) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", *c.share);
      out += buf;
    }
    out += "\n";
  }
}

}  // namespace

std::string export_csv(const Report& report) {
  std::string out = "dimension,option,count,share\n";
  if (const auto* b = std::get_if<QuestionBreakdown>(&report)) {
    if (b->denominator > 0) csv_rows(out, b->question_id, b->options);
    return out;
  }
  const auto& table = std::get<CrossTab>(report);
  std::size_t total = 0;
  for (const auto& row : table.rows) total += row.total;
  if (total == 0) return out;
  for (const auto& row : table.rows) csv_rows(out, row.label, row.cells);
  return out;
}

ReportSpec parse_report_spec(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text.begin(), json_text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed report spec: ") + e.what());
  }
  ReportSpec spec;
  try {
    spec.flow_id = doc.at("flow_id").get<std::string>();
    spec.question_id = doc.at("question_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid report spec: ") + e.what());
  }
  if (auto it = doc.find("group_by"); it != doc.end() && !it->is_null()) {
    const std::string g = it->is_string() ? it->get<std::string>() : "";
    if (g == "zone") {
      spec.group_by = GroupBy::Zone;
    } else if (g == "ventilation") {
      spec.group_by = GroupBy::Ventilation;
    } else {
      throw ParseError("group_by must be \"zone\", \"ventilation\" or null", "group_by");
    }
  }
  return spec;
}

Report run_report(const ReportSpec& spec, std::span<const ResponseRecord> records, const SurveyFlow& flow,
                  const ZoneMap& map) {
  if (!spec.group_by) return breakdown(records, flow, spec.question_id);
  return crosstab(records, flow, spec.question_id, map, *spec.group_by);
}

}  // namespace ema
