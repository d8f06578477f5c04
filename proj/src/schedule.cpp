#include "ema/schedule.hpp"

#include <algorithm>
#include <stdexcept>

namespace ema {

using namespace std::chrono;

void PromptPolicy::validate() const {
  if (interval_hours < 1 || interval_hours > 3) {
    throw std::invalid_argument("prompt.interval_hours must be 1, 2 or 3");
  }
  if (!(window_start < window_end)) {
    throw std::invalid_argument("prompt.window_start must be earlier than prompt.window_end");
  }
}

Timestamp next_prompt(const PromptPolicy& policy, Timestamp after) {
  LocalTime local = policy.timezone.to_local(after) + hours(policy.interval_hours);
  const Millis tod = time_of_day(local);
  if (tod < policy.window_start.since_midnight()) {
    local = local_midnight(local) + policy.window_start.since_midnight();
  } else if (tod > policy.window_end.since_midnight()) {
    local = local_midnight(local) + days(1) + policy.window_start.since_midnight();
  }
  return policy.timezone.to_utc(local);
}

Timestamp first_prompt_at_or_after(const PromptPolicy& policy, Timestamp from) {
  const LocalTime day = local_midnight(policy.timezone.to_local(from));
  for (int d = -1; d <= 2; ++d) {
    const LocalTime midnight = day + days(d);
    for (Millis offset = policy.window_start.since_midnight(); offset <= policy.window_end.since_midnight();
         offset += hours(policy.interval_hours)) {
      const Timestamp t = policy.timezone.to_utc(midnight + offset);
      if (t >= from) return t;
    }
  }
  // Not reachable for a validated policy: the next day's window always exists.
  throw std::logic_error("no prompt found within two days");
}

std::vector<Timestamp> prompts_between(const PromptPolicy& policy, Timestamp from, Timestamp to) {
  std::vector<Timestamp> out;
  for (Timestamp t = first_prompt_at_or_after(policy, from); t < to; t = next_prompt(policy, t)) {
    out.push_back(t);
  }
  return out;
}

Timestamp scheduled_prompt(const PromptPolicy& policy, Timestamp now, std::optional<Timestamp> last_response) {
  if (policy.anchor == PromptAnchor::Response && last_response) {
    Timestamp t = next_prompt(policy, *last_response);
    while (t < now) t = next_prompt(policy, t);
    return t;
  }
  return first_prompt_at_or_after(policy, now);
}

GapVerdict check_gap(std::span<const Timestamp> history, Timestamp candidate, const RateLimit& limit) {
  if (history.empty() || candidate - history.back() > limit.min_gap) return GapVerdict::Accept;
  return GapVerdict::MinGapViolation;
}

GapVerdict check_gap_neighbors(std::span<const Timestamp> history, Timestamp candidate, const RateLimit& limit) {
  auto it = std::lower_bound(history.begin(), history.end(), candidate);
  if (it != history.end() && *it - candidate <= limit.min_gap) return GapVerdict::MinGapViolation;
  if (it != history.begin() && candidate - *std::prev(it) <= limit.min_gap) return GapVerdict::MinGapViolation;
  return GapVerdict::Accept;
}

}  // namespace ema
