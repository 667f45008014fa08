#include "gtv/orchestrator.hpp"

#include "gtv/receiver_feed.hpp"
#include "json.hpp"

namespace gtv::orchestrator {

namespace {

constexpr std::pair<Phase, const char*> kPhases[] = {
    {Phase::ColdStart, "COLD_START"},     {Phase::CoarseValidated, "COARSE_VALIDATED"},
    {Phase::FineMonitoring, "FINE_MONITORING"}, {Phase::Holdover, "HOLDOVER"},
    {Phase::Alarm, "ALARM"},              {Phase::ResetPending, "RESET_PENDING"},
};

constexpr std::pair<EventKind, const char*> kEvents[] = {
    {EventKind::FixAcquired, "FixAcquired"}, {EventKind::FixLost, "FixLost"},
    {EventKind::RtVerdict, "RtVerdict"},     {EventKind::NtsVerdict, "NtsVerdict"},
    {EventKind::LlVerdict, "LlVerdict"},     {EventKind::NetworkUp, "NetworkUp"},
    {EventKind::NetworkDown, "NetworkDown"}, {EventKind::Tick, "Tick"},
    {EventKind::Clear, "Clear"},
};

constexpr SourceClass kTrustOrder[] = {SourceClass::Ensemble, SourceClass::Nts, SourceClass::Roughtime,
                                       SourceClass::Gnss, SourceClass::Unauthenticated};

bool is_verdict(EventKind k) {
  return k == EventKind::RtVerdict || k == EventKind::NtsVerdict || k == EventKind::LlVerdict;
}

void enter_cold_start(State& s, std::vector<Action>& actions) {
  s.phase = Phase::ColdStart;
  s.coarse_validated = false;
  if (s.fix && s.connectivity == Connectivity::Online) actions.push_back({ActionKind::ScheduleRtPoll});
}

void clear_alarm(State& s, std::vector<Action>& actions) {
  s.unresolved_h1 = false;
  s.clean_streak = 0;
  actions.push_back({ActionKind::ClearAlert});
  enter_cold_start(s, actions);
}

}  // namespace

const char* to_string(Phase p) {
  for (const auto& [v, n] : kPhases) {
    if (v == p) return n;
  }
  return "?";
}

const char* to_string(EventKind k) {
  for (const auto& [v, n] : kEvents) {
    if (v == k) return n;
  }
  return "?";
}

const char* to_string(ActionKind a) {
  switch (a) {
    case ActionKind::ScheduleRtPoll: return "schedule_rt_poll";
    case ActionKind::ScheduleNtsPoll: return "schedule_nts_poll";
    case ActionKind::ResetFilter: return "reset_filter";
    case ActionKind::RaiseAlert: return "raise_alert";
    case ActionKind::ClearAlert: return "clear_alert";
    case ActionKind::EnterHoldover: return "enter_holdover";
    case ActionKind::ColdStartReset: return "cold_start_reset";
  }
  return "?";
}

const char* to_string(SourceClass s) {
  switch (s) {
    case SourceClass::Ensemble: return "ensemble";
    case SourceClass::Nts: return "nts";
    case SourceClass::Roughtime: return "roughtime";
    case SourceClass::Gnss: return "gnss";
    case SourceClass::Unauthenticated: return "unauthenticated";
  }
  return "?";
}

Phase phase_from_string(const std::string& s) {
  for (const auto& [v, n] : kPhases) {
    if (s == n) return v;
  }
  throw InputError("unknown phase '" + s + "'");
}

EventKind event_kind_from_string(const std::string& s) {
  for (const auto& [v, n] : kEvents) {
    if (s == n) return v;
  }
  throw InputError("unknown event kind '" + s + "'");
}

Event Event::verdict(const detector::Verdict& v) {
  Event e;
  switch (v.test) {
    case detector::TestKind::Rt: e.kind = EventKind::RtVerdict; break;
    case detector::TestKind::Nts: e.kind = EventKind::NtsVerdict; break;
    case detector::TestKind::Ll: e.kind = EventKind::LlVerdict; break;
  }
  e.t_mono = v.t_mono;
  e.hypothesis = v.hypothesis;
  e.source = v.source_id;
  return e;
}

std::string event_label(const Event& e) {
  std::string s = to_string(e.kind);
  if (e.hypothesis) s += std::string("(") + detector::to_string(*e.hypothesis) + ")";
  return s;
}

std::string to_jsonl(const Event& e) {
  nlohmann::ordered_json j;
  j["t_mono_ns"] = e.t_mono.nanos;
  j["kind"] = to_string(e.kind);
  j["hypothesis"] = e.hypothesis ? nlohmann::ordered_json(detector::to_string(*e.hypothesis)) : nullptr;
  j["source"] = e.source;
  return j.dump();
}

Event event_from_jsonl(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    Event e;
    e.t_mono.nanos = j.at("t_mono_ns").get<uint64_t>();
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!j.at("hypothesis").is_null()) {
      const auto h = j.at("hypothesis").get<std::string>();
      if (h != "H0" && h != "H1") throw InputError("bad hypothesis '" + h + "'");
      e.hypothesis = h == "H0" ? detector::Hypothesis::H0 : detector::Hypothesis::H1;
    }
    e.source = j.value("source", "");
    if (is_verdict(e.kind) != e.hypothesis.has_value()) throw InputError("hypothesis present iff verdict event");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("event log: ") + ex.what());
  }
}

void Config::validate() const {
  if (!(ephemeris_validity_s > 0)) throw ConfigError("ephemeris_validity_s must be > 0");
  if (auto_clear_k < 0) throw ConfigError("auto_clear_k must be >= 0");
}

const SourceStatus& VerdictSummary::get(SourceClass c) const {
  switch (c) {
    case SourceClass::Ensemble: return ensemble;
    case SourceClass::Nts: return nts;
    case SourceClass::Roughtime: return roughtime;
    case SourceClass::Gnss: return gnss;
    case SourceClass::Unauthenticated: return unauthenticated;
  }
  return gnss;
}

SourceStatus& VerdictSummary::get(SourceClass c) {
  return const_cast<SourceStatus&>(static_cast<const VerdictSummary&>(*this).get(c));
}

std::string trust_select(const VerdictSummary& summary) {
  bool any_configured = false;
  bool any_flagged = false;
  for (SourceClass c : kTrustOrder) {
    const SourceStatus& s = summary.get(c);
    any_configured |= s.configured;
    any_flagged |= s.configured && s.flagged;
  }
  if (!any_configured) throw InputError("trust_select: no sources configured");
  const SourceStatus& gnss = summary.gnss;
  if (!any_flagged && gnss.configured && gnss.available) return to_string(SourceClass::Gnss);
  for (SourceClass c : kTrustOrder) {
    const SourceStatus& s = summary.get(c);
    if (s.configured && s.available && !s.flagged) return to_string(c);
  }
  return kNoSource;
}

OutageClass outage_classify(double duration_s, double validity_s) {
  if (!(duration_s >= 0)) throw DomainError("outage duration must be >= 0");
  return duration_s <= validity_s ? OutageClass::Short : OutageClass::Long;
}

VerdictSummary summarize(const State& s, const Config& c) {
  VerdictSummary v;
  const bool online = s.connectivity == Connectivity::Online;
  v.ensemble = {true, s.coarse_validated && s.phase != Phase::ResetPending, false};
  v.nts = {c.nts_configured, online, false};
  v.roughtime = {c.roughtime_configured, online, false};
  v.gnss = {true, s.fix, s.unresolved_h1};
  v.unauthenticated = {c.unauthenticated_configured, online, false};
  return v;
}

StepResult step(const State& state, const Event& event, const Config& config) {
  if (state.last_event && event.t_mono < *state.last_event) {
    throw OrderingError("event " + event_label(event) + " at " + std::to_string(event.t_mono.nanos) +
                            " ns precedes the last processed event at " + std::to_string(state.last_event->nanos) +
                            " ns",
                        0);
  }
  if (is_verdict(event.kind) && !event.hypothesis) throw InputError("verdict event without hypothesis");

  StepResult r{state, {}};
  State& s = r.state;
  auto& actions = r.actions;
  s.last_event = event.t_mono;

  const bool h1 = event.hypothesis == detector::Hypothesis::H1;
  const bool h0 = event.hypothesis == detector::Hypothesis::H0;

  if (is_verdict(event.kind) && h1) {
    if (s.phase != Phase::Alarm) actions.push_back({ActionKind::RaiseAlert});
    s.phase = Phase::Alarm;
    s.unresolved_h1 = true;
    s.clean_streak = 0;
  } else {
    switch (event.kind) {
      case EventKind::FixAcquired:
        s.fix = true;
        if (s.phase != Phase::Holdover) s.outage_started.reset();
        if (s.phase == Phase::ColdStart) {
          if (s.connectivity == Connectivity::Online) actions.push_back({ActionKind::ScheduleRtPoll});
        } else if (s.phase == Phase::ResetPending) {
          enter_cold_start(s, actions);
        }
        break;

      case EventKind::FixLost:
        s.fix = false;
        if (!s.outage_started) s.outage_started = event.t_mono;
        break;

      case EventKind::RtVerdict:
      case EventKind::NtsVerdict:
      case EventKind::LlVerdict:
        if (s.phase == Phase::Alarm) {
          if (h0 && config.auto_clear_k > 0 && ++s.clean_streak >= config.auto_clear_k) clear_alarm(s, actions);
          break;
        }
        if (s.phase == Phase::ColdStart && (event.kind == EventKind::RtVerdict || event.kind == EventKind::NtsVerdict)) {
          s.phase = Phase::CoarseValidated;
          s.coarse_validated = true;
          actions.push_back({ActionKind::ResetFilter});
          actions.push_back({ActionKind::ScheduleNtsPoll});
        } else if (s.phase == Phase::CoarseValidated && event.kind == EventKind::NtsVerdict) {
          s.phase = Phase::FineMonitoring;
        } else if (s.phase == Phase::Holdover && event.kind == EventKind::NtsVerdict &&
                   s.connectivity == Connectivity::Online) {
          s.phase = Phase::FineMonitoring;
          if (s.fix) s.outage_started.reset();
        }
        break;

      case EventKind::NetworkDown:
        s.connectivity = Connectivity::Offline;
        if (s.phase == Phase::FineMonitoring) {
          s.phase = Phase::Holdover;
          if (!s.outage_started) s.outage_started = event.t_mono;
          actions.push_back({ActionKind::EnterHoldover});
        }
        break;

      case EventKind::NetworkUp:
        s.connectivity = Connectivity::Online;
        if (s.phase == Phase::Holdover) {
          actions.push_back({ActionKind::ScheduleNtsPoll});
        } else if (s.phase == Phase::ColdStart && s.fix) {
          actions.push_back({ActionKind::ScheduleRtPoll});
        }
        break;

      case EventKind::Tick:
        if (s.phase != Phase::Alarm && s.phase != Phase::ResetPending && s.outage_started &&
            outage_classify(mono_elapsed_s(*s.outage_started, event.t_mono), config.ephemeris_validity_s) ==
                OutageClass::Long) {
          s.phase = Phase::ResetPending;
          s.coarse_validated = false;
          actions.push_back({ActionKind::ColdStartReset});
        }
        break;

      case EventKind::Clear:
        if (s.phase == Phase::Alarm) clear_alarm(s, actions);
        break;
    }
  }

  s.active_source = trust_select(summarize(s, config));
  return r;
}

std::string transition_jsonl(const Event& e, const State& from, const StepResult& r) {
  nlohmann::ordered_json j;
  j["t_mono_ns"] = e.t_mono.nanos;
  j["event"] = event_label(e);
  j["from_phase"] = to_string(from.phase);
  j["to_phase"] = to_string(r.state.phase);
  j["active_source"] = r.state.active_source;
  auto acts = nlohmann::ordered_json::array();
  for (const Action& a : r.actions) acts.push_back(to_string(a.kind));
  j["actions"] = acts;
  return j.dump();
}

std::vector<std::string> replay(const std::vector<Event>& events, const Config& config, const State& initial) {
  std::vector<std::string> out;
  State s = initial;
  for (const Event& e : events) {
    const StepResult r = step(s, e, config);
    out.push_back(transition_jsonl(e, s, r));
    s = r.state;
  }
  return out;
}

}  // namespace gtv::orchestrator
