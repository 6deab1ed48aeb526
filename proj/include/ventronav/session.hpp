#pragma once

// The clinical workflow as an explicit state machine: guided landmark
// acquisition, registration preview with re-selection, confirmation, entry
// point placement and catheter tracking. `dispatch` is a pure function of
// (context, state, event); rejected events leave the state untouched.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ventronav/acquisition.hpp"
#include "ventronav/guidance.hpp"
#include "ventronav/landmarks.hpp"
#include "ventronav/registration.hpp"

namespace ventronav {

/// Immutable scenario data a session runs against.
struct SessionContext {
  std::shared_ptr<const VirtualScene> scene;
  std::optional<Point3> planned_entry_model;
  Point3 planned_target_model = Point3::Zero();
  CatheterModel catheter;
  ScaleMode scale_mode = ScaleMode::Estimated;
  ScaleBounds scale_bounds;
};

enum class Phase { Landmarking, Registered, EntryPointPhase, CatheterTracking };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Landmarking: return "Landmarking";
    case Phase::Registered: return "Registered";
    case Phase::EntryPointPhase: return "EntryPointPhase";
    case Phase::CatheterTracking: return "CatheterTracking";
  }
  return "Unknown";
}

struct SessionState {
  Phase phase = Phase::Landmarking;
  LandmarkId current = LandmarkId::RightTragus;  ///< meaningful while landmarking
  std::array<std::vector<Point3>, kLandmarkCount> picks{};
  std::optional<RegistrationResult> registration;
  std::optional<EntryPoint> entry;
  std::optional<double> tre;  ///< entry-point TRE against the scenario's true point
  std::optional<CatheterTip> last_tip;
  std::optional<TipFeedback> last_tip_feedback;

  const std::vector<Point3>& picks_for(LandmarkId id) const { return picks[index_of(id)]; }
  bool all_landmarks_picked() const {
    for (const auto& p : picks) {
      if (p.empty()) return false;
    }
    return true;
  }

  bool operator==(const SessionState&) const = default;
};

namespace events {
struct Acquire {
  Point3 point = Point3::Zero();
};
struct Delete {};
struct Next {};
struct Back {};
struct Register {};
struct Confirm {};
struct PlaceEntry {
  Ray ray;
};
struct DeleteEntry {};
struct MarkerUpdate {
  MarkerPose pose;
};
struct Reset {};
}  // namespace events

using SessionEvent = std::variant<events::Acquire, events::Delete, events::Next, events::Back, events::Register,
                                  events::Confirm, events::PlaceEntry, events::DeleteEntry, events::MarkerUpdate,
                                  events::Reset>;

inline std::string_view event_name(const SessionEvent& e) {
  constexpr std::array<std::string_view, 10> names = {"Acquire", "Delete",     "Next",        "Back",
                                                       "Register", "Confirm",  "PlaceEntry",  "DeleteEntry",
                                                       "MarkerUpdate", "Reset"};
  return names[e.index()];
}

/// What a transition produced, for display.
struct EffectReport {
  std::string event;
  std::string message;
  std::optional<double> rmse;
  std::optional<double> tre;
  std::optional<CatheterTip> tip;
  std::optional<TipFeedback> feedback;
};

class RejectedEvent : public Error {
 public:
  explicit RejectedEvent(const std::string& reason) : Error(ErrorCode::RejectedEvent, reason), reason_(reason) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

struct DispatchResult {
  SessionState state;
  EffectReport report;
};

inline SessionState new_session() { return SessionState{}; }

/// Checks the state invariants; returns a description of the first violation.
inline std::optional<std::string> invariant_violation(const SessionState& s) {
  if (s.phase == Phase::Registered && !s.registration) return "Registered without a registration";
  if (s.phase != Phase::Landmarking && !s.all_landmarks_picked()) return "left landmarking with missing picks";
  if ((s.phase == Phase::EntryPointPhase || s.phase == Phase::CatheterTracking) && !s.registration) {
    return "post-registration phase without a registration";
  }
  if (s.phase == Phase::CatheterTracking && !s.entry) return "catheter tracking without an entry point";
  if (s.phase == Phase::Landmarking && s.registration) return "landmarking with a stale registration";
  if (!s.entry && s.tre) return "TRE without an entry point";
  if (s.entry && s.phase != Phase::EntryPointPhase && s.phase != Phase::CatheterTracking) {
    return "entry point outside the guidance phases";
  }
  if ((s.last_tip || s.last_tip_feedback) && s.phase != Phase::CatheterTracking) return "tip outside catheter tracking";
  return std::nullopt;
}

/// Back out of the registration preview to re-select landmarks. Lands on the
/// first landmark without picks, or RightTragus when all have picks.
inline SessionState re_register(const SessionState& state) {
  if (state.phase != Phase::Registered) {
    throw Error(ErrorCode::WrongPhase, "re-registration is only possible from the registration preview");
  }
  SessionState next = state;
  next.phase = Phase::Landmarking;
  next.registration.reset();
  next.current = LandmarkId::RightTragus;
  for (auto id : kLandmarkOrder) {
    if (state.picks_for(id).empty()) {
      next.current = id;
      break;
    }
  }
  return next;
}

inline LandmarkSet pick_centroids(const SessionState& state) {
  LandmarkSet world(Space::World);
  for (auto id : kLandmarkOrder) {
    const auto& picks = state.picks_for(id);
    if (!picks.empty()) world.set(id, aggregate_repeated_picks(picks).centroid);
  }
  return world;
}

namespace detail {

struct Dispatcher {
  const SessionContext& ctx;
  const SessionState& in;

  [[noreturn]] void reject(const std::string& why) const { throw RejectedEvent(why); }

  void require_phase(Phase p, std::string_view action) const {
    if (in.phase != p) {
      reject(std::string(action) + " is not available in phase " + std::string(to_string(in.phase)));
    }
  }

  DispatchResult operator()(const events::Acquire& e) const {
    require_phase(Phase::Landmarking, "Acquire");
    if (!is_finite(e.point)) reject("acquired point is not finite");
    DispatchResult r{in, {"Acquire", {}, {}, {}, {}, {}}};
    r.state.picks[index_of(in.current)].push_back(e.point);
    r.report.message = std::string(display_name(in.current)) + " pick " +
                       std::to_string(r.state.picks_for(in.current).size());
    return r;
  }

  DispatchResult operator()(const events::Delete&) const {
    require_phase(Phase::Landmarking, "Delete");
    if (in.picks_for(in.current).empty()) reject(std::string(display_name(in.current)) + " has no picks to delete");
    DispatchResult r{in, {"Delete", {}, {}, {}, {}, {}}};
    r.state.picks[index_of(in.current)].clear();
    r.report.message = std::string(display_name(in.current)) + " cleared";
    return r;
  }

  DispatchResult operator()(const events::Next&) const {
    DispatchResult r{in, {"Next", {}, {}, {}, {}, {}}};
    if (in.phase == Phase::Landmarking) {
      const auto i = index_of(in.current);
      if (i + 1 < kLandmarkCount) r.state.current = kLandmarkOrder[i + 1];
      r.report.message = std::string(display_name(r.state.current));
      return r;
    }
    if (in.phase == Phase::EntryPointPhase) {
      if (!in.entry) reject("place an entry point before continuing");
      r.state.phase = Phase::CatheterTracking;
      r.report.tre = in.tre;
      r.report.message = "catheter tracking";
      return r;
    }
    reject("Next is not available in phase " + std::string(to_string(in.phase)));
  }

  DispatchResult operator()(const events::Back&) const {
    if (in.phase == Phase::Registered) {
      return {re_register(in), {"Back", "re-selecting landmarks", {}, {}, {}, {}}};
    }
    require_phase(Phase::Landmarking, "Back");
    DispatchResult r{in, {"Back", {}, {}, {}, {}, {}}};
    const auto i = index_of(in.current);
    if (i > 0) r.state.current = kLandmarkOrder[i - 1];
    r.report.message = std::string(display_name(r.state.current));
    return r;
  }

  DispatchResult operator()(const events::Register&) const {
    require_phase(Phase::Landmarking, "Register");
    for (auto id : kLandmarkOrder) {
      if (in.picks_for(id).empty()) reject(std::string(display_name(id)) + " has not been acquired");
    }
    RegistrationResult reg;
    try {
      reg = estimate_similarity(ctx.scene->model_landmarks(), pick_centroids(in), ctx.scale_mode, ctx.scale_bounds);
    } catch (const Error& err) {
      reject(std::string("registration failed: ") + err.what());
    }
    DispatchResult r{in, {"Register", {}, reg.rmse, {}, {}, {}}};
    r.state.phase = Phase::Registered;
    r.state.registration = std::move(reg);
    r.report.message = "registered";
    return r;
  }

  DispatchResult operator()(const events::Confirm&) const {
    require_phase(Phase::Registered, "Confirm");
    DispatchResult r{in, {"Confirm", "registration confirmed", in.registration->rmse, {}, {}, {}}};
    r.state.phase = Phase::EntryPointPhase;
    return r;
  }

  DispatchResult operator()(const events::PlaceEntry& e) const {
    require_phase(Phase::EntryPointPhase, "PlaceEntry");
    EntryPoint entry;
    try {
      entry = place_entry_point(e.ray, ctx.scene->head_mesh());
    } catch (const Error& err) {
      reject(err.what());
    }
    entry.planned_model = ctx.planned_entry_model;
    DispatchResult r{in, {"PlaceEntry", "entry point placed", {}, {}, {}, {}}};
    r.state.entry = entry;
    r.state.tre.reset();
    if (ctx.planned_entry_model) {
      const Point3 truth = ctx.scene->model_to_world().apply(*ctx.planned_entry_model);
      r.state.tre = compute_tre(in.registration, *ctx.planned_entry_model, truth);
      r.report.tre = r.state.tre;
    }
    return r;
  }

  DispatchResult operator()(const events::DeleteEntry&) const {
    require_phase(Phase::EntryPointPhase, "DeleteEntry");
    if (!in.entry) reject("no entry point to delete");
    DispatchResult r{in, {"DeleteEntry", "entry point removed", {}, {}, {}, {}}};
    r.state.entry.reset();
    r.state.tre.reset();
    return r;
  }

  DispatchResult operator()(const events::MarkerUpdate& e) const {
    require_phase(Phase::CatheterTracking, "MarkerUpdate");
    const CatheterTip tip = catheter_tip(e.pose, ctx.catheter);
    if (!is_finite(tip.tip)) reject("marker pose is not finite");
    TipFeedback fb;
    try {
      const auto plan = TrajectoryPlan::make(*in.entry, ctx.planned_target_model, in.registration->transform);
      fb = tip_feedback(tip.tip, ctx.scene->ventricle_mesh(), in.registration->transform, plan);
    } catch (const Error& err) {
      reject(err.what());
    }
    DispatchResult r{in, {"MarkerUpdate", "tip updated", {}, {}, tip, fb}};
    r.state.last_tip = tip;
    r.state.last_tip_feedback = fb;
    return r;
  }

  DispatchResult operator()(const events::Reset&) const {
    return {new_session(), {"Reset", std::string(display_name(LandmarkId::RightTragus)), {}, {}, {}, {}}};
  }
};

}  // namespace detail

/// Applies one event. Throws RejectedEvent (state untouched) when the event is
/// not applicable in the current phase.
inline DispatchResult dispatch(const SessionContext& ctx, const SessionState& state, const SessionEvent& event) {
  return std::visit(detail::Dispatcher{ctx, state}, event);
}

/// Replays an event log from a fresh session; rejected events are skipped,
/// exactly as they were when first dispatched.
inline SessionState replay(const SessionContext& ctx, const std::vector<SessionEvent>& log) {
  SessionState s = new_session();
  for (const auto& e : log) {
    try {
      s = dispatch(ctx, s, e).state;
    } catch (const RejectedEvent&) {
    }
  }
  return s;
}

}  // namespace ventronav
