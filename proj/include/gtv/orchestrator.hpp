#pragma once

// Event-driven switching policy: cold-start coarse validation, fine
// monitoring, holdover on network loss, alarm latching, outage resets, and
// trust-ordered selection of the active time source.
//
// Transition table (artifact concretisation):
//   COLD_START      + FixAcquired         -> COLD_START, schedule Roughtime poll
//   COLD_START      + RtVerdict(H0)       -> COARSE_VALIDATED, reset filter (zero offset), schedule NTS poll
//   COLD_START      + NtsVerdict(H0)      -> COARSE_VALIDATED (NTS substitutes for Roughtime), schedule NTS poll
//   COARSE_VALIDATED+ NtsVerdict(H0)      -> FINE_MONITORING
//   any             + *Verdict(H1)        -> ALARM, raise alert, GNSS marked suspect
//   FINE_MONITORING + NetworkDown         -> HOLDOVER (ensemble only), outage timer starts
//   HOLDOVER        + NetworkUp           -> HOLDOVER, schedule NTS poll
//   HOLDOVER        + NtsVerdict(H0)      -> FINE_MONITORING (online only)
//   any             + FixLost             -> outage timer starts
//   any but ALARM   + Tick, outage > validity -> RESET_PENDING, cold-start reset
//   RESET_PENDING   + FixAcquired         -> COLD_START, schedule Roughtime poll
//   ALARM           + Clear, or auto_clear_k consecutive clean verdicts -> COLD_START

#include <optional>
#include <string>
#include <vector>

#include "gtv/detector.hpp"
#include "gtv/timebase.hpp"

namespace gtv::orchestrator {

enum class Phase { ColdStart, CoarseValidated, FineMonitoring, Holdover, Alarm, ResetPending };
enum class Connectivity { Online, Offline };
enum class EventKind { FixAcquired, FixLost, RtVerdict, NtsVerdict, LlVerdict, NetworkUp, NetworkDown, Tick, Clear };
enum class ActionKind { ScheduleRtPoll, ScheduleNtsPoll, ResetFilter, RaiseAlert, ClearAlert, EnterHoldover, ColdStartReset };

const char* to_string(Phase p);
const char* to_string(EventKind k);
const char* to_string(ActionKind a);
Phase phase_from_string(const std::string& s);
EventKind event_kind_from_string(const std::string& s);

struct Event {
  EventKind kind = EventKind::Tick;
  MonotonicInstant t_mono;
  std::optional<detector::Hypothesis> hypothesis;  // verdict events only
  std::string source;                              // verdict source id (informational)

  bool operator==(const Event&) const = default;

  static Event verdict(const detector::Verdict& v);
};

std::string event_label(const Event& e);
std::string to_jsonl(const Event& e);
Event event_from_jsonl(const std::string& line);

struct Config {
  double ephemeris_validity_s = 4 * 3600.0;
  int auto_clear_k = 10;  // 0 disables auto-clear
  bool nts_configured = true;
  bool roughtime_configured = true;
  bool unauthenticated_configured = false;

  void validate() const;
};

// ---- trust policy ---------------------------------------------------------------

/// Sources in decreasing trust.
enum class SourceClass { Ensemble, Nts, Roughtime, Gnss, Unauthenticated };
const char* to_string(SourceClass s);

struct SourceStatus {
  bool configured = false;
  bool available = false;
  bool flagged = false;  // its own cross-checks are not clean
};

struct VerdictSummary {
  SourceStatus ensemble;
  SourceStatus nts;
  SourceStatus roughtime;
  SourceStatus gnss;
  SourceStatus unauthenticated;

  const SourceStatus& get(SourceClass c) const;
  SourceStatus& get(SourceClass c);
};

inline constexpr const char* kNoSource = "none";

/// All clean -> "gnss" (most accurate). Otherwise the most trusted available
/// source that is not flagged, or "none".
std::string trust_select(const VerdictSummary& summary);

enum class OutageClass { Short, Long };
/// Short iff duration <= validity.
OutageClass outage_classify(double duration_s, double validity_s);

// ---- state machine ----------------------------------------------------------------

struct State {
  Phase phase = Phase::ColdStart;
  Connectivity connectivity = Connectivity::Online;
  std::optional<MonotonicInstant> outage_started;
  std::string active_source = "gnss";
  bool fix = false;
  bool coarse_validated = false;  // since the last cold start
  bool unresolved_h1 = false;
  int clean_streak = 0;
  std::optional<MonotonicInstant> last_event;

  bool operator==(const State&) const = default;
};

struct Action {
  ActionKind kind;
  bool operator==(const Action&) const = default;
};

struct StepResult {
  State state;
  std::vector<Action> actions;
};

/// Pure transition function. An event older than the last one processed is
/// an ordering error.
StepResult step(const State& state, const Event& event, const Config& config);

VerdictSummary summarize(const State& state, const Config& config);

/// {"t_mono_ns","event","from_phase","to_phase","active_source","actions"}
std::string transition_jsonl(const Event& e, const State& from, const StepResult& r);

/// Replays an event log from the initial state; returns one transition line per event.
std::vector<std::string> replay(const std::vector<Event>& events, const Config& config,
                                const State& initial = State{});

}  // namespace gtv::orchestrator
