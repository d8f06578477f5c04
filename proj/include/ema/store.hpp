#pragma once

// Append-only response store. The JSON-lines log in the store directory is
// the source of truth; the in-memory index is rebuilt from it on open.
//
// Ingest is serialized per participant (check-and-insert is atomic for one
// participant). Queries may run alongside ingests and see a prefix of the log.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "ema/flow.hpp"
#include "ema/locator.hpp"
#include "ema/record.hpp"
#include "ema/schedule.hpp"

namespace ema {

inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kObservationsFile = "observations.jsonl";

enum class RejectReason { UnknownFlow, InvalidPath, MinGapViolation, DuplicateRecordId };

std::string_view to_string(RejectReason reason);

struct Accepted {
  std::string record_id;
};
struct Rejected {
  RejectReason reason;
  std::string detail;
};
using IngestOutcome = std::variant<Accepted, Rejected>;

struct RecordFilter {
  std::optional<std::string> participant_id;
  std::optional<std::string> flow_id;
  std::optional<Timestamp> from;  // completed_at >= from
  std::optional<Timestamp> to;    // completed_at <= to
  // "unknown" selects records without a zone.
  std::optional<std::string> zone_id;

  bool matches(const ResponseRecord& r) const;
};

class Store {
 public:
  struct Options {
    // fdatasync after every append.
    bool sync = true;
  };

  // In-memory store with no log.
  Store();
  // Opens (creating if needed) the store directory and replays its logs. A
  // torn final line left by a crash is truncated away; corruption elsewhere
  // throws ParseError.
  explicit Store(const std::filesystem::path& dir, Options options);
  explicit Store(const std::filesystem::path& dir) : Store(dir, Options{}) {}
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // Accepted iff the flow exists at the record's version, the answers form a
  // complete path through it, the record id is new, and completed_at is more
  // than limit.min_gap away from the participant's accepted neighbours.
  // Records without an id get a generated one.
  IngestOutcome ingest(ResponseRecord record, const FlowRegistry& flows, const RateLimit& limit);

  // Matching records ordered by completed_at, ties in log order.
  std::vector<ResponseRecord> query(const RecordFilter& filter = {}) const;
  std::size_t size() const;

  std::vector<Timestamp> accepted_history(const std::string& participant_id) const;
  std::optional<Timestamp> last_accepted(const std::string& participant_id) const;

  void add_observations(const std::vector<BeaconObservation>& observations);
  // observed_at in [from, to].
  std::vector<BeaconObservation> observations_for(const std::string& participant_id, Timestamp from,
                                                  Timestamp to) const;

  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  class AppendLog;
  struct Participant {
    std::mutex mutex;
    std::vector<Timestamp> history;  // sorted
  };

  Participant& participant(const std::string& id);
  void load();

  std::optional<std::filesystem::path> dir_;
  Options options_;
  std::unique_ptr<AppendLog> records_log_;
  std::unique_ptr<AppendLog> observations_log_;

  mutable std::shared_mutex data_mutex_;
  std::vector<ResponseRecord> records_;

  std::mutex ids_mutex_;
  std::set<std::string> ids_;

  mutable std::mutex participants_mutex_;
  std::map<std::string, std::unique_ptr<Participant>> participants_;

  mutable std::shared_mutex observations_mutex_;
  std::map<std::string, std::vector<BeaconObservation>> observations_;
};

}  // namespace ema
