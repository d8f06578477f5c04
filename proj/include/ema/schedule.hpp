#pragma once

// Prompt scheduling inside a daily local-time window, and the minimum-gap
// rule between a participant's accepted responses.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ema/time.hpp"

namespace ema {

enum class PromptAnchor { Prompt, Response };

struct PromptPolicy {
  int interval_hours = 1;
  TimeOfDay window_start{9, 0};
  TimeOfDay window_end{21, 0};
  TimeZone timezone = TimeZone::utc();
  PromptAnchor anchor = PromptAnchor::Prompt;

  // Throws std::invalid_argument unless interval_hours is 1, 2 or 3 and
  // window_start < window_end.
  void validate() const;
};

struct RateLimit {
  Millis min_gap = std::chrono::minutes(15);
};

// after + interval in local wall-clock time; if that falls outside
// [window_start, window_end] it moves to the next window_start.
Timestamp next_prompt(const PromptPolicy& policy, Timestamp after);

// Earliest instant >= `from` on the daily grid
// window_start, window_start + interval, ... <= window_end.
Timestamp first_prompt_at_or_after(const PromptPolicy& policy, Timestamp from);

// Every prompt instant in [from, to).
std::vector<Timestamp> prompts_between(const PromptPolicy& policy, Timestamp from, Timestamp to);

// What a participant's watch should show as its next prompt. With the
// response anchor the interval restarts at the last accepted response.
Timestamp scheduled_prompt(const PromptPolicy& policy, Timestamp now, std::optional<Timestamp> last_response);

enum class GapVerdict { Accept, MinGapViolation };

// history sorted ascending. Accept iff history is empty or
// candidate - history.back() > min_gap.
GapVerdict check_gap(std::span<const Timestamp> history, Timestamp candidate, const RateLimit& limit);

// Out-of-order variant used at ingest: the candidate must be more than
// min_gap away from both of its neighbours in the sorted history. Equal to
// check_gap whenever candidate >= history.back().
GapVerdict check_gap_neighbors(std::span<const Timestamp> history, Timestamp candidate, const RateLimit& limit);

}  // namespace ema
