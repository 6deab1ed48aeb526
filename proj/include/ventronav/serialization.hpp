#pragma once

// JSON encodings of the domain types (nlohmann/json). Doubles are written in
// shortest round-trip form, so encode -> decode -> encode is byte-stable.

#include <string>

#include <json.hpp>

#include "ventronav/acquisition.hpp"
#include "ventronav/guidance.hpp"
#include "ventronav/landmarks.hpp"
#include "ventronav/registration.hpp"
#include "ventronav/session.hpp"

namespace ventronav {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

template <typename T>
T json_get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline Json vec_to_json(const Vector3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vector3 vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
    throw Error(ErrorCode::ParseError, "expected [x, y, z]");
  }
  Vector3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  require_finite(v, "vector");
  return v;
}

inline Json rotation_to_json(const Rotation& r) {
  const auto& q = r.quaternion();
  return Json::array({q.w(), q.x(), q.y(), q.z()});
}

/// Accepts a quaternion [w, x, y, z] or a row-major 3x3 matrix [[..],[..],[..]].
inline Rotation rotation_from_json(const Json& j) {
  if (j.is_array() && j.size() == 4) {
    return Rotation::from_quaternion(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  }
  if (j.is_array() && j.size() == 3 && j[0].is_array()) {
    Matrix3 m;
    for (int r = 0; r < 3; ++r) {
      const auto row = vec_from_json(j[r]);
      m.row(r) = row.transpose();
    }
    return Rotation::from_matrix(m);
  }
  throw Error(ErrorCode::ParseError, "rotation must be a quaternion [w,x,y,z] or a 3x3 matrix");
}

inline Json matrix_to_json(const Matrix3& m) {
  Json out = Json::array();
  for (int r = 0; r < 3; ++r) out.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return out;
}

inline Json transform_to_json(const SimilarityTransform& t) {
  return Json{{"scale", t.scale()},
              {"quaternion", rotation_to_json(t.rotation())},
              {"rotation", matrix_to_json(t.rotation().matrix())},
              {"translation", vec_to_json(t.translation())}};
}

inline SimilarityTransform transform_from_json(const Json& j) {
  const Rotation r = j.contains("quaternion") ? rotation_from_json(j.at("quaternion"))
                                              : rotation_from_json(detail::json_get<Json>(j, "rotation"));
  return {detail::json_get<double>(j, "scale"), r, vec_from_json(detail::json_get<Json>(j, "translation"))};
}

inline Json landmarks_to_json(const LandmarkSet& set) {
  Json pts = Json::object();
  for (auto id : set.ids()) pts[std::string(to_string(id))] = vec_to_json(set.at(id));
  return Json{{"schema_version", kSchemaVersion}, {"space", std::string(to_string(set.space()))}, {"landmarks", pts}};
}

inline LandmarkSet landmarks_from_json(const Json& j) {
  const auto space_name = detail::json_get<std::string>(j, "space");
  if (space_name != "model" && space_name != "world") throw Error(ErrorCode::ParseError, "space must be model|world");
  LandmarkSet set(space_name == "model" ? Space::Model : Space::World);
  const auto pts = detail::json_get<Json>(j, "landmarks");
  if (!pts.is_object()) throw Error(ErrorCode::ParseError, "landmarks must be an object");
  for (const auto& [name, value] : pts.items()) set.set(parse_landmark_id(name), vec_from_json(value));
  return set;
}

inline Json noise_to_json(const NoiseModel& n) {
  return Json{{"aim_sigma_px", n.aim_sigma_px},         {"depth_sigma_mm", n.depth_sigma_mm},
              {"depth_bias_mm", n.depth_bias_mm},       {"pose_rot_sigma_deg", n.pose_rot_sigma_deg},
              {"pose_trans_sigma_mm", n.pose_trans_sigma_mm}, {"stream", n.stream}};
}

inline NoiseModel noise_from_json(const Json& j) {
  NoiseModel n;
  n.aim_sigma_px = detail::json_get<double>(j, "aim_sigma_px");
  n.depth_sigma_mm = detail::json_get<double>(j, "depth_sigma_mm");
  n.depth_bias_mm = j.value("depth_bias_mm", 0.0);
  n.pose_rot_sigma_deg = detail::json_get<double>(j, "pose_rot_sigma_deg");
  n.pose_trans_sigma_mm = detail::json_get<double>(j, "pose_trans_sigma_mm");
  n.stream = j.value("stream", std::uint64_t{0});
  n.validate();
  return n;
}

inline Json intrinsics_to_json(const CameraIntrinsics& c) {
  return Json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics intrinsics_from_json(const Json& j) {
  CameraIntrinsics c;
  c.fx = detail::json_get<double>(j, "fx");
  c.fy = detail::json_get<double>(j, "fy");
  c.cx = detail::json_get<double>(j, "cx");
  c.cy = detail::json_get<double>(j, "cy");
  c.width = detail::json_get<int>(j, "width");
  c.height = detail::json_get<int>(j, "height");
  c.validate();
  return c;
}

inline Json diagnostic_to_json(const DegeneracyDiagnostic& d) {
  return Json{{"configuration", std::string(to_string(d.configuration))},
              {"condition_ratio", d.condition_ratio},
              {"eigenvalues", vec_to_json(d.eigenvalues)}};
}

inline Json registration_to_json(const RegistrationResult& r) {
  Json residuals = Json::object();
  if (r.ids.size() == r.residuals.size() && !r.ids.empty()) {
    for (std::size_t i = 0; i < r.ids.size(); ++i) residuals[std::string(to_string(r.ids[i]))] = r.residuals[i];
  } else {
    residuals = r.residuals;
  }
  return Json{{"transform", transform_to_json(r.transform)},
              {"scale", r.transform.scale()},
              {"rmse", r.rmse},
              {"residuals", residuals},
              {"condition", diagnostic_to_json(r.condition)},
              {"iterations", r.iterations},
              {"converged", r.converged}};
}

inline Json ray_to_json(const Ray& r) {
  return Json{{"origin", vec_to_json(r.origin)}, {"direction", vec_to_json(r.direction)}};
}

inline Ray ray_from_json(const Json& j) {
  return Ray(vec_from_json(detail::json_get<Json>(j, "origin")), vec_from_json(detail::json_get<Json>(j, "direction")));
}

inline Json marker_pose_to_json(const MarkerPose& p) {
  return Json{{"rotation", rotation_to_json(p.rotation)}, {"translation", vec_to_json(p.translation)}};
}

inline MarkerPose marker_pose_from_json(const Json& j) {
  return MarkerPose{rotation_from_json(detail::json_get<Json>(j, "rotation")),
                    vec_from_json(detail::json_get<Json>(j, "translation"))};
}

inline Json feedback_to_json(const TipFeedback& f) {
  return Json{{"distance_to_ventricle_mm", f.distance_to_ventricle},
              {"closest_point", vec_to_json(f.closest_point)},
              {"inside", f.inside ? Json(*f.inside) : Json(nullptr)},
              {"deviation_from_plan_mm", f.deviation_from_plan},
              {"depth_along_plan_mm", f.depth_along_plan}};
}

inline Json tip_to_json(const CatheterTip& t) {
  return Json{{"tip", vec_to_json(t.tip)}, {"marker_origin", vec_to_json(t.marker_origin)}};
}

template <typename T, typename F>
Json optional_to_json(const std::optional<T>& v, F&& encode) {
  return v ? encode(*v) : Json(nullptr);
}

// --- session events -------------------------------------------------------

inline Json event_to_json(const SessionEvent& e) {
  Json j{{"type", std::string(event_name(e))}};
  if (const auto* a = std::get_if<events::Acquire>(&e)) j["point"] = vec_to_json(a->point);
  if (const auto* p = std::get_if<events::PlaceEntry>(&e)) j["ray"] = ray_to_json(p->ray);
  if (const auto* m = std::get_if<events::MarkerUpdate>(&e)) j["pose"] = marker_pose_to_json(m->pose);
  return j;
}

/// Malformed input raises Error(ParseError).
inline SessionEvent event_from_json(const Json& j) {
  const auto type = detail::json_get<std::string>(j, "type");
  if (type == "Acquire") return events::Acquire{vec_from_json(detail::json_get<Json>(j, "point"))};
  if (type == "Delete") return events::Delete{};
  if (type == "Next") return events::Next{};
  if (type == "Back") return events::Back{};
  if (type == "Register") return events::Register{};
  if (type == "Confirm") return events::Confirm{};
  if (type == "PlaceEntry") return events::PlaceEntry{ray_from_json(detail::json_get<Json>(j, "ray"))};
  if (type == "DeleteEntry") return events::DeleteEntry{};
  if (type == "MarkerUpdate") return events::MarkerUpdate{marker_pose_from_json(detail::json_get<Json>(j, "pose"))};
  if (type == "Reset") return events::Reset{};
  throw Error(ErrorCode::ParseError, "unknown event type '" + type + "'");
}

inline Json report_to_json(const EffectReport& r) {
  return Json{{"event", r.event},
              {"message", r.message},
              {"rmse", r.rmse ? Json(*r.rmse) : Json(nullptr)},
              {"tre", r.tre ? Json(*r.tre) : Json(nullptr)},
              {"tip", optional_to_json(r.tip, tip_to_json)},
              {"feedback", optional_to_json(r.feedback, feedback_to_json)}};
}

/// Full snapshot of a session state, as served to clients.
inline Json state_to_json(const SessionState& s) {
  Json picks = Json::object();
  for (auto id : kLandmarkOrder) {
    Json list = Json::array();
    for (const auto& p : s.picks_for(id)) list.push_back(vec_to_json(p));
    picks[std::string(to_string(id))] = list;
  }
  Json j{{"phase", std::string(to_string(s.phase))},
         {"current_landmark", s.phase == Phase::Landmarking ? Json(std::string(to_string(s.current))) : Json(nullptr)},
         {"prompt", s.phase == Phase::Landmarking ? std::string(display_name(s.current)) : std::string(to_string(s.phase))},
         {"picks", picks},
         {"registration", optional_to_json(s.registration, registration_to_json)},
         {"rmse", s.registration ? Json(s.registration->rmse) : Json(nullptr)},
         {"entry", s.entry ? Json{{"world", vec_to_json(s.entry->world)},
                                  {"planned_model", s.entry->planned_model ? vec_to_json(*s.entry->planned_model)
                                                                           : Json(nullptr)}}
                           : Json(nullptr)},
         {"tre", s.tre ? Json(*s.tre) : Json(nullptr)},
         {"tip", optional_to_json(s.last_tip, tip_to_json)},
         {"tip_feedback", optional_to_json(s.last_tip_feedback, feedback_to_json)}};
  return j;
}

}  // namespace ventronav
