#include <numeric>
#include <random>

#include "doctest.h"
#include "ema/analytics.hpp"
#include "oracles.hpp"

using namespace ema;
using namespace std::chrono;

namespace {

const SurveyFlow& privacy() { return canonical_flow("privacy_distraction"); }
const SurveyFlow& infection() { return canonical_flow("infection_risk"); }
const Timestamp kT0 = parse_timestamp("2026-03-02T02:00:00Z");

ZoneMap building() {
  return ZoneMap({{"atrium", "Atrium", Ventilation::Natural, "circulation", {"b1"}},
                  {"lab_2", "Lab", Ventilation::Mechanical, "laboratory", {"b2"}},
                  {"studio", "Studio", Ventilation::Natural, "studio", {"b3"}}});
}

// Walks a flow choosing options uniformly at random.
ResponseRecord random_walk(const SurveyFlow& flow, std::mt19937_64& rng, int index, std::optional<std::string> zone) {
  std::vector<std::string> codes;
  std::string current = flow.start;
  while (!current.empty()) {
    const QuestionDef* q = flow.find(current);
    const auto& o = q->options[std::uniform_int_distribution<std::size_t>(0, q->options.size() - 1)(rng)];
    codes.push_back(o.code);
    current = o.next.is_end() ? "" : o.next.target();
  }
  return oracle::make_record(flow, codes, "p" + std::to_string(index % 7), kT0 + minutes(20 * index), std::move(zone));
}

std::vector<ResponseRecord> random_dataset(std::mt19937_64& rng, std::size_t n) {
  const std::vector<std::optional<std::string>> zones = {"atrium", "lab_2", "studio", std::nullopt, "ghost"};
  std::vector<ResponseRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const SurveyFlow& flow = i % 3 ? privacy() : infection();
    out.push_back(random_walk(flow, rng, static_cast<int>(i), zones[rng() % zones.size()]));
  }
  return out;
}

}  // namespace

TEST_CASE("breakdown: 3 of 50 needing privacy is 6%") {
  std::vector<ResponseRecord> records;
  for (int i = 0; i < 50; ++i) {
    const std::vector<std::string> codes = i < 3 ? std::vector<std::string>{"alone", "focus", "no", "yes", "seen", "work"}
                                                 : std::vector<std::string>{"alone", "focus", "no", "no"};
    records.push_back(oracle::make_record(privacy(), codes, "p01", kT0 + hours(i)));
  }
  const auto b = breakdown(records, privacy(), "need_privacy");
  CHECK(b.denominator == 50);
  CHECK(b.option("yes").count == 3);
  CHECK(*b.option("yes").share == 0.06);
  CHECK(*b.option("no").share == 0.94);

  const auto child = breakdown(records, privacy(), "privacy_about");
  CHECK(child.denominator == 3);
  CHECK(*child.option("work").share == 1.0);
  CHECK(*child.option("appearance").share == 0.0);
}

TEST_CASE("breakdown over nothing has null shares") {
  const auto b = breakdown({}, privacy(), "need_privacy");
  CHECK(b.denominator == 0);
  REQUIRE(b.options.size() == 2);
  for (const auto& o : b.options) {
    CHECK(o.count == 0);
    CHECK_FALSE(o.share.has_value());
  }
  CHECK_THROWS_AS(breakdown({}, privacy(), "risk_now"), UnknownQuestionError);
}

TEST_CASE("property: breakdown equals recount, partitions and sums to one") {
  std::mt19937_64 rng(8);
  for (std::size_t n : {1u, 10u, 500u, 10000u}) {
    const auto records = random_dataset(rng, n);
    for (const auto* flow : {&privacy(), &infection()}) {
      for (const auto& q : flow->questions) {
        const auto b = breakdown(records, *flow, q.id);
        const auto counts = oracle::recount(records, flow->flow_id, q.id);
        std::size_t total = 0;
        double share_sum = 0;
        for (const auto& o : b.options) {
          const auto it = counts.find(o.code);
          CHECK(o.count == (it == counts.end() ? 0 : it->second));
          total += o.count;
          if (o.share) {
            CHECK(*o.share >= 0.0);
            CHECK(*o.share <= 1.0);
            share_sum += *o.share;
          }
        }
        CHECK(total == b.denominator);
        if (b.denominator > 0) CHECK(std::abs(share_sum - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("funnel consistency on canonical flows") {
  std::mt19937_64 rng(81);
  const auto records = random_dataset(rng, 3000);
  for (const auto* flow : {&privacy(), &infection()}) {
    for (const auto& child : flow->questions) {
      if (child.id == flow->start) continue;
      std::size_t feeding = 0;
      for (const auto& parent : flow->questions) {
        const auto b = breakdown(records, *flow, parent.id);
        for (const auto& o : parent.options) {
          if (!o.next.is_end() && o.next.target() == child.id) feeding += b.option(o.code).count;
        }
      }
      // Canonical flows have no other way in, so equality holds.
      CHECK(breakdown(records, *flow, child.id).denominator == feeding);
    }
  }
}

TEST_CASE("concern ranking") {
  auto with_counts = [](int ventilation, int surfaces, int density) {
    std::vector<ResponseRecord> records;
    int i = 0;
    for (auto [code, n] : {std::pair{"ventilation", ventilation}, {"surfaces", surfaces}, {"people_density", density}}) {
      for (int k = 0; k < n; ++k) {
        records.push_back(oracle::make_record(infection(), {"yes", code, "no", "0"}, "p01", kT0 + hours(i++)));
      }
    }
    return records;
  };
  CHECK(concern_ranking(with_counts(10, 7, 3)) == std::vector<std::string>{"ventilation", "surfaces", "people_density"});
  CHECK(concern_ranking(with_counts(4, 4, 4)) == std::vector<std::string>{"people_density", "surfaces", "ventilation"});
  CHECK(concern_ranking(with_counts(0, 1, 0)).front() == "surfaces");
  CHECK(concern_ranking(with_counts(0, 0, 0)) == std::vector<std::string>{"people_density", "surfaces", "ventilation"});
}

TEST_CASE("crosstab by ventilation") {
  std::vector<ResponseRecord> records;
  int i = 0;
  auto add = [&](const char* answer, std::optional<std::string> zone, int n) {
    for (int k = 0; k < n; ++k) {
      const std::vector<std::string> codes =
          std::string(answer) == "yes" ? std::vector<std::string>{"yes", "surfaces", "no", "0"}
                                       : std::vector<std::string>{"no", "0"};
      records.push_back(oracle::make_record(infection(), codes, "p01", kT0 + hours(i++), zone));
    }
  };
  add("yes", "atrium", 3);
  add("no", "studio", 7);
  add("yes", "lab_2", 7);
  add("no", "lab_2", 3);
  const auto tab = crosstab(records, infection(), "risk_now", building());
  CHECK(tab.columns == std::vector<std::string>{"no", "yes"});
  REQUIRE(tab.rows.size() == 3);
  CHECK(tab.rows[0].label == "natural");
  CHECK(tab.rows[1].label == "mechanical");
  CHECK(tab.rows[2].label == "unknown");
  CHECK(*tab.row("natural").cells[1].share == doctest::Approx(0.3));
  CHECK(*tab.row("mechanical").cells[1].share == doctest::Approx(0.7));
  CHECK(tab.row("unknown").total == 0);
  CHECK_FALSE(tab.row("unknown").cells[0].share.has_value());

  // Unknown-zone records only touch the unknown row.
  add("yes", std::nullopt, 4);
  add("no", "ghost", 2);
  const auto tab2 = crosstab(records, infection(), "risk_now", building());
  CHECK(tab2.row("natural") == tab.row("natural"));
  CHECK(tab2.row("mechanical") == tab.row("mechanical"));
  CHECK(tab2.row("unknown").total == 6);
  CHECK(tab2.row("unknown").cells[1].count == 4);
}

TEST_CASE("crosstab: all-natural yes gives share 1") {
  std::vector<ResponseRecord> records;
  for (int i = 0; i < 5; ++i) {
    records.push_back(oracle::make_record(infection(), {"yes", "ventilation", "yes", "6+"}, "p01", kT0 + hours(i), "atrium"));
  }
  const auto tab = crosstab(records, infection(), "risk_now", building());
  CHECK(*tab.row("natural").cells[1].share == 1.0);
  CHECK(tab.row("mechanical").total == 0);
}

TEST_CASE("property: crosstab rows equal per-row recounts") {
  std::mt19937_64 rng(17);
  const auto map = building();
  const auto records = random_dataset(rng, 4000);
  for (GroupBy g : {GroupBy::Ventilation, GroupBy::Zone}) {
    const auto tab = crosstab(records, privacy(), "distracted", map, g);
    std::map<std::string, std::vector<ResponseRecord>> by_row;
    for (const auto& r : records) {
      std::string label(kUnknownRow);
      if (r.zone_id && map.find(*r.zone_id)) {
        label = g == GroupBy::Zone ? *r.zone_id : std::string(to_string(zone_ventilation(map, *r.zone_id)));
      }
      by_row[label].push_back(r);
    }
    std::size_t grand = 0;
    for (const auto& row : tab.rows) {
      const auto counts = oracle::recount(by_row[row.label], "privacy_distraction", "distracted");
      double sum = 0;
      for (std::size_t c = 0; c < tab.columns.size(); ++c) {
        const auto it = counts.find(tab.columns[c]);
        CHECK(row.cells[c].count == (it == counts.end() ? 0 : it->second));
        if (row.cells[c].share) sum += *row.cells[c].share;
      }
      if (row.total > 0) CHECK(std::abs(sum - 1.0) <= 1e-9);
      grand += row.total;
    }
    CHECK(grand == breakdown(records, privacy(), "distracted").denominator);
    if (g == GroupBy::Zone) {
      CHECK(tab.rows.size() == 4);
      CHECK(tab.rows[0].label == "atrium");
      CHECK(tab.rows.back().label == "unknown");
    }
  }
}

TEST_CASE("zone privacy profile") {
  std::vector<ResponseRecord> records;
  for (int i = 0; i < 4; ++i) {
    records.push_back(oracle::make_record(privacy(), {"alone", "focus", "no", "yes", "heard", "behavior"}, "p01",
                                          kT0 + hours(i), "atrium"));
    records.push_back(oracle::make_record(privacy(), {"group", "call", "yes", "noise", "no"}, "p02", kT0 + hours(i), "lab_2"));
  }
  const auto profile = zone_privacy_profile(records, privacy(), building());
  CHECK(profile.size() == 2);
  CHECK(profile.at("atrium").share == 1.0);
  CHECK(profile.at("lab_2").share == 0.0);
  CHECK(profile.at("lab_2").denominator == 4);
  CHECK_FALSE(profile.contains("studio"));
  CHECK(zone_privacy_profile({}, privacy(), building()).empty());
}

TEST_CASE("completion stats") {
  std::vector<ResponseRecord> records;
  for (int d : {3, 9, 5}) {
    ResponseRecord r;
    r.started_at = kT0;
    r.completed_at = kT0 + seconds(d);
    records.push_back(r);
  }
  const auto stats = completion_stats(records);
  CHECK(stats.count == 3);
  CHECK(*stats.median == 5.0);
  CHECK(*stats.p10 == doctest::Approx(3.4));
  CHECK(*stats.p90 == doctest::Approx(8.2));
  const auto empty = completion_stats({});
  CHECK_FALSE(empty.median.has_value());
  CHECK_FALSE(empty.p10.has_value());
  CHECK_FALSE(empty.p90.has_value());
  CHECK(percentile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(percentile({7}, 0.9) == 7.0);
}

TEST_CASE("csv export") {
  std::vector<ResponseRecord> records;
  for (int i = 0; i < 3; ++i) {
    records.push_back(oracle::make_record(privacy(), {"alone", "focus", "no", i ? "no" : "yes", "seen", "work"}, "p01",
                                          kT0 + hours(i)));
  }
  const Report report = breakdown(records, privacy(), "need_privacy");
  const std::string csv = export_csv(report);
  CHECK(csv == "dimension,option,count,share\nneed_privacy,no,2,0.666667\nneed_privacy,yes,1,0.333333\n");
  CHECK(export_csv(report) == csv);
  CHECK(export_csv(Report{breakdown({}, privacy(), "need_privacy")}) == "dimension,option,count,share\n");

  const auto tab = crosstab(records, privacy(), "need_privacy", building());
  const auto rows = oracle::parse_csv(export_csv(Report{tab}));
  REQUIRE(rows.size() == 1 + 3 * 2);
  CHECK(rows[1] == std::vector<std::string>{"natural", "no", "0", ""});
  CHECK(rows[5] == std::vector<std::string>{"unknown", "no", "2", "0.666667"});
}

TEST_CASE("property: csv totals round-trip") {
  std::mt19937_64 rng(3);
  const auto map = building();
  const auto records = random_dataset(rng, 2000);
  for (const auto& q : privacy().questions) {
    const auto b = breakdown(records, privacy(), q.id);
    const auto rows = oracle::parse_csv(export_csv(Report{b}));
    std::size_t total = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) total += std::stoul(rows[i][2]);
    CHECK(total == b.denominator);

    const auto tab = crosstab(records, privacy(), q.id, map, GroupBy::Zone);
    const auto tab_rows = oracle::parse_csv(export_csv(Report{tab}));
    std::map<std::string, std::size_t> per_row;
    for (std::size_t i = 1; i < tab_rows.size(); ++i) per_row[tab_rows[i][0]] += std::stoul(tab_rows[i][2]);
    for (const auto& row : tab.rows) CHECK(per_row[row.label] == row.total);
  }
}

TEST_CASE("report specs") {
  const auto spec = parse_report_spec(R"({"flow_id": "infection_risk", "question_id": "risk_now", "group_by": "ventilation"})");
  CHECK(spec.group_by == GroupBy::Ventilation);
  CHECK_FALSE(parse_report_spec(R"({"flow_id": "a", "question_id": "b", "group_by": null})").group_by.has_value());
  CHECK_FALSE(parse_report_spec(R"({"flow_id": "a", "question_id": "b"})").group_by.has_value());
  CHECK(parse_report_spec(R"({"flow_id": "a", "question_id": "b", "group_by": "zone"})").group_by == GroupBy::Zone);
  CHECK_THROWS(parse_report_spec(R"({"flow_id": "a", "question_id": "b", "group_by": "floor"})"));
  CHECK_THROWS(parse_report_spec(R"({"question_id": "b"})"));
  const Report r = run_report(spec, {}, infection(), building());
  CHECK(std::holds_alternative<CrossTab>(r));
}
