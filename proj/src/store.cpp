#include "ema/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <system_error>

#include "ema/error.hpp"

namespace ema {

namespace fs = std::filesystem;

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::UnknownFlow: return "UnknownFlow";
    case RejectReason::InvalidPath: return "InvalidPath";
    case RejectReason::MinGapViolation: return "MinGapViolation";
    case RejectReason::DuplicateRecordId: return "DuplicateRecordId";
  }
  return "?";
}

bool RecordFilter::matches(const ResponseRecord& r) const {
  if (participant_id && r.participant_id != *participant_id) return false;
  if (flow_id && r.flow_id != *flow_id) return false;
  if (from && r.completed_at < *from) return false;
  if (to && r.completed_at > *to) return false;
  if (zone_id) {
    if (*zone_id == "unknown") return !r.zone_id.has_value();
    return r.zone_id == *zone_id;
  }
  return true;
}

// O_APPEND file descriptor; each line goes out in a single write loop.
class Store::AppendLog {
 public:
  AppendLog(const fs::path& path, bool sync) : sync_(sync) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "open " + path.string());
  }
  ~AppendLog() {
    if (fd_ >= 0) ::close(fd_);
  }
  AppendLog(const AppendLog&) = delete;
  AppendLog& operator=(const AppendLog&) = delete;

  void append(const std::string& line) {
    std::string buf = line + "\n";
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      const ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::system_error(errno, std::generic_category(), "append to store log");
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (sync_ && ::fdatasync(fd_) != 0) throw std::system_error(errno, std::generic_category(), "fdatasync");
  }

 private:
  int fd_ = -1;
  bool sync_;
};

namespace {

// Reads complete lines; a trailing fragment without newline is dropped and
// the file truncated to the last newline. Returns the good lines.
std::vector<std::string> read_log_lines(const fs::path& path) {
  std::vector<std::string> lines;
  if (!fs::exists(path)) return lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::size_t last_newline = content.rfind('\n');
  const std::size_t good = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (good != content.size()) fs::resize_file(path, good);
  std::size_t pos = 0;
  while (pos < good) {
    const std::size_t end = content.find('\n', pos);
    lines.push_back(content.substr(pos, end - pos));
    pos = end + 1;
  }
  return lines;
}

}  // namespace

Store::Store() = default;

Store::Store(const fs::path& dir, Options options) : dir_(dir), options_(options) {
  fs::create_directories(dir);
  load();
  records_log_ = std::make_unique<AppendLog>(dir / kRecordsFile, options_.sync);
  observations_log_ = std::make_unique<AppendLog>(dir / kObservationsFile, options_.sync);
}

Store::~Store() = default;

void Store::load() {
  const auto record_lines = read_log_lines(*dir_ / kRecordsFile);
  for (std::size_t i = 0; i < record_lines.size(); ++i) {
    if (record_lines[i].empty()) continue;
    ResponseRecord r;
    try {
      r = parse_record(record_lines[i]);
    } catch (const ParseError& e) {
      throw ParseError(std::string("corrupt store log: ") + e.what(), e.field(), i + 1);
    }
    ids_.insert(r.record_id);
    auto& history = participant(r.participant_id).history;
    history.insert(std::upper_bound(history.begin(), history.end(), r.completed_at), r.completed_at);
    records_.push_back(std::move(r));
  }
  const auto observation_lines = read_log_lines(*dir_ / kObservationsFile);
  for (std::size_t i = 0; i < observation_lines.size(); ++i) {
    if (observation_lines[i].empty()) continue;
    try {
      BeaconObservation obs = parse_observation_line(observation_lines[i]);
      observations_[obs.participant_id].push_back(std::move(obs));
    } catch (const ParseError& e) {
      throw ParseError(std::string("corrupt observation log: ") + e.what(), e.field(), i + 1);
    }
  }
}

Store::Participant& Store::participant(const std::string& id) {
  std::lock_guard lock(participants_mutex_);
  auto& slot = participants_[id];
  if (!slot) slot = std::make_unique<Participant>();
  return *slot;
}

IngestOutcome Store::ingest(ResponseRecord record, const FlowRegistry& flows, const RateLimit& limit) {
  const auto flow = flows.find(record.flow_id, record.flow_version);
  if (!flow) {
    return Rejected{RejectReason::UnknownFlow,
                    "flow '" + record.flow_id + "' version '" + record.flow_version + "' is not registered"};
  }
  if (check_path(*flow, record.path()) != PathStatus::Complete) {
    return Rejected{RejectReason::InvalidPath, "answers do not form a complete path through '" + flow->flow_id + "'"};
  }
  if (record.record_id.empty()) record.record_id = generate_id();

  {
    std::lock_guard lock(ids_mutex_);
    if (!ids_.insert(record.record_id).second) {
      return Rejected{RejectReason::DuplicateRecordId, "record '" + record.record_id + "' already stored"};
    }
  }
  auto release_id = [&] {
    std::lock_guard lock(ids_mutex_);
    ids_.erase(record.record_id);
  };

  Participant& p = participant(record.participant_id);
  std::lock_guard participant_lock(p.mutex);
  if (check_gap_neighbors(p.history, record.completed_at, limit) != GapVerdict::Accept) {
    release_id();
    const auto minutes = std::chrono::duration_cast<std::chrono::minutes>(limit.min_gap).count();
    return Rejected{RejectReason::MinGapViolation,
                    "responses must be more than " + std::to_string(minutes) + " minutes apart"};
  }
  const std::string record_id = record.record_id;
  const Timestamp completed_at = record.completed_at;
  try {
    std::unique_lock data_lock(data_mutex_);
    if (records_log_) records_log_->append(record_to_json(record));
    records_.push_back(std::move(record));
  } catch (...) {
    release_id();
    throw;
  }
  p.history.insert(std::upper_bound(p.history.begin(), p.history.end(), completed_at), completed_at);
  return Accepted{record_id};
}

std::vector<ResponseRecord> Store::query(const RecordFilter& filter) const {
  std::vector<ResponseRecord> out;
  {
    std::shared_lock lock(data_mutex_);
    for (const auto& r : records_) {
      if (filter.matches(r)) out.push_back(r);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ResponseRecord& a, const ResponseRecord& b) { return a.completed_at < b.completed_at; });
  return out;
}

std::size_t Store::size() const {
  std::shared_lock lock(data_mutex_);
  return records_.size();
}

std::vector<Timestamp> Store::accepted_history(const std::string& participant_id) const {
  Participant* p = nullptr;
  {
    std::lock_guard lock(participants_mutex_);
    auto it = participants_.find(participant_id);
    if (it == participants_.end()) return {};
    p = it->second.get();
  }
  std::lock_guard lock(p->mutex);
  return p->history;
}

std::optional<Timestamp> Store::last_accepted(const std::string& participant_id) const {
  auto history = accepted_history(participant_id);
  if (history.empty()) return std::nullopt;
  return history.back();
}

void Store::add_observations(const std::vector<BeaconObservation>& observations) {
  std::unique_lock lock(observations_mutex_);
  for (const auto& obs : observations) {
    if (observations_log_) observations_log_->append(observation_to_json(obs));
    observations_[obs.participant_id].push_back(obs);
  }
}

std::vector<BeaconObservation> Store::observations_for(const std::string& participant_id, Timestamp from,
                                                       Timestamp to) const {
  std::shared_lock lock(observations_mutex_);
  std::vector<BeaconObservation> out;
  auto it = observations_.find(participant_id);
  if (it == observations_.end()) return out;
  for (const auto& obs : it->second) {
    if (obs.observed_at >= from && obs.observed_at <= to) out.push_back(obs);
  }
  return out;
}

}  // namespace ema
