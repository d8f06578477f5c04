#pragma once

// Aggregates over completed responses. Shares are conditional on reaching
// the question (funnel shares), never on the total record count.

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ema/flow.hpp"
#include "ema/locator.hpp"
#include "ema/record.hpp"

namespace ema {

class UnknownQuestionError : public std::out_of_range {
 public:
  UnknownQuestionError(const std::string& flow_id, const std::string& question_id)
      : std::out_of_range("flow '" + flow_id + "' has no question '" + question_id + "'") {}
};

struct OptionCount {
  std::string code;
  std::size_t count = 0;
  std::optional<double> share;  // nullopt when the denominator is 0

  friend bool operator==(const OptionCount&, const OptionCount&) = default;
};

struct QuestionBreakdown {
  std::string flow_id;
  QuestionId question_id;
  std::size_t denominator = 0;
  std::vector<OptionCount> options;  // flow order

  const OptionCount& option(std::string_view code) const;
  friend bool operator==(const QuestionBreakdown&, const QuestionBreakdown&) = default;
};

// Records of other flows are ignored. Throws UnknownQuestionError.
QuestionBreakdown breakdown(std::span<const ResponseRecord> records, const SurveyFlow& flow,
                            std::string_view question_id);

// Option codes of `question_id` by count, descending; ties lexicographic.
std::vector<std::string> concern_ranking(std::span<const ResponseRecord> records,
                                         const SurveyFlow& flow = canonical_flow("infection_risk"),
                                         std::string_view question_id = "risk_aspect");

enum class GroupBy { Ventilation, Zone };

inline constexpr std::string_view kUnknownRow = "unknown";

struct CrossTabRow {
  std::string label;
  std::size_t total = 0;
  std::vector<OptionCount> cells;  // same order as CrossTab::columns

  friend bool operator==(const CrossTabRow&, const CrossTabRow&) = default;
};

// Rows: natural, mechanical, unknown for ventilation; every zone of the map
// (by id) then unknown for zone grouping. Records without a zone, or with a
// zone the map lacks, land in `unknown`.
struct CrossTab {
  std::string flow_id;
  QuestionId question_id;
  GroupBy group_by = GroupBy::Ventilation;
  std::vector<std::string> columns;
  std::vector<CrossTabRow> rows;

  const CrossTabRow& row(std::string_view label) const;
  friend bool operator==(const CrossTab&, const CrossTab&) = default;
};

CrossTab crosstab(std::span<const ResponseRecord> records, const SurveyFlow& flow, std::string_view question_id,
                  const ZoneMap& map, GroupBy group_by = GroupBy::Ventilation);

struct ZoneShare {
  std::size_t yes = 0;
  std::size_t denominator = 0;
  double share = 0.0;
};

// Per-zone share of need_privacy = yes. Zones nobody reached are omitted;
// unattributed records appear under `unknown`.
std::map<std::string, ZoneShare> zone_privacy_profile(std::span<const ResponseRecord> records,
                                                      const SurveyFlow& flow, const ZoneMap& map);

struct CompletionStats {
  std::size_t count = 0;
  std::optional<double> median;
  std::optional<double> p10;
  std::optional<double> p90;
};

// Percentiles interpolate linearly between order statistics.
CompletionStats completion_stats(std::span<const ResponseRecord> records);

double percentile(std::vector<double> values, double q);

using Report = std::variant<QuestionBreakdown, CrossTab>;

// Columns dimension,option,count,share; shares to 6 decimals, empty when
// undefined. A report over zero records is header-only.
std::string export_csv(const Report& report);

struct ReportSpec {
  std::string flow_id;
  QuestionId question_id;
  std::optional<GroupBy> group_by;
};

ReportSpec parse_report_spec(std::string_view json_text);
Report run_report(const ReportSpec& spec, std::span<const ResponseRecord> records, const SurveyFlow& flow,
                  const ZoneMap& map);

}  // namespace ema
