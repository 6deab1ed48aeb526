#pragma once

// Entry-point placement, target registration error, marker-anchored catheter
// tip and live tip-to-ventricle feedback.

#include <optional>

#include "ventronav/geometry.hpp"
#include "ventronav/mesh.hpp"
#include "ventronav/registration.hpp"

namespace ventronav {

struct EntryPoint {
  Point3 world = Point3::Zero();
  std::optional<Point3> planned_model;  ///< CT-space counterpart, when the plan has one

  bool operator==(const EntryPoint&) const = default;
};

/// Rigid marker-frame -> world pose of the tracked image target on the tool.
struct MarkerPose {
  Rotation rotation;
  Vector3 translation = Vector3::Zero();

  Point3 apply(const Point3& p) const { return rotation.apply(p) + translation; }

  bool operator==(const MarkerPose&) const = default;
};

struct CatheterModel {
  Vector3 marker_to_tip_offset{0.0, 0.0, 150.0};

  double length() const { return marker_to_tip_offset.norm(); }
  void validate() const {
    require_finite(marker_to_tip_offset, "catheter offset");
    if (!(length() > 0.0)) throw Error(ErrorCode::InvalidArgument, "catheter offset must be nonzero");
  }
};

struct CatheterTip {
  Point3 tip = Point3::Zero();
  Point3 marker_origin = Point3::Zero();  ///< overlay segment runs marker_origin -> tip

  bool operator==(const CatheterTip&) const = default;
};

struct TrajectoryPlan {
  EntryPoint entry;
  Point3 target_model = Point3::Zero();
  Point3 entry_world = Point3::Zero();
  Point3 target_world = Point3::Zero();

  /// Planned segment in world space, with the target mapped through `model_to_world`.
  static TrajectoryPlan make(const EntryPoint& entry, const Point3& target_model,
                             const SimilarityTransform& model_to_world) {
    TrajectoryPlan p;
    p.entry = entry;
    p.target_model = target_model;
    p.entry_world = entry.world;
    p.target_world = model_to_world.apply(target_model);
    if ((p.target_world - p.entry_world).norm() < 1e-9) {
      throw Error(ErrorCode::InvalidArgument, "entry and target coincide");
    }
    return p;
  }

  Vector3 direction() const { return (target_world - entry_world).normalized(); }
  double length() const { return (target_world - entry_world).norm(); }
};

struct TipFeedback {
  double distance_to_ventricle = 0.0;
  Point3 closest_point = Point3::Zero();
  std::optional<bool> inside;  ///< empty when the ventricle mesh is not closed
  double deviation_from_plan = 0.0;
  double depth_along_plan = 0.0;

  bool operator==(const TipFeedback&) const = default;
};

inline EntryPoint place_entry_point(const Ray& screen_ray, const TriangleMesh& head_mesh) {
  const auto hit = ray_mesh_intersect(screen_ray, head_mesh);
  if (!hit) throw Error(ErrorCode::NoSurfaceHit, "entry ray misses the head surface");
  return EntryPoint{hit->point, std::nullopt};
}

inline double compute_tre(const RegistrationResult& reg, const Point3& planned_model_point,
                          const Point3& true_world_point) {
  return (reg.transform.apply(planned_model_point) - true_world_point).norm();
}

inline double compute_tre(const std::optional<RegistrationResult>& reg, const Point3& planned_model_point,
                          const Point3& true_world_point) {
  if (!reg) throw Error(ErrorCode::NotRegistered, "TRE needs a registration");
  return compute_tre(*reg, planned_model_point, true_world_point);
}

inline CatheterTip catheter_tip(const MarkerPose& pose, const CatheterModel& model) {
  return {pose.apply(model.marker_to_tip_offset), pose.translation};
}

namespace detail {

inline void plan_metrics(const Point3& tip, const TrajectoryPlan& plan, TipFeedback& out) {
  const Vector3 dir = plan.direction();
  const Vector3 rel = tip - plan.entry_world;
  out.depth_along_plan = rel.dot(dir);
  out.deviation_from_plan = (rel - out.depth_along_plan * dir).norm();
}

}  // namespace detail

/// Feedback against a ventricle mesh already in world space.
inline TipFeedback tip_feedback(const Point3& tip, const TriangleMesh& ventricles_world, const TrajectoryPlan& plan) {
  TipFeedback out;
  const auto cp = point_mesh_distance(tip, ventricles_world);
  out.distance_to_ventricle = cp.distance;
  out.closest_point = cp.point;
  if (ventricles_world.watertight()) out.inside = mesh_contains(ventricles_world, tip);
  detail::plan_metrics(tip, plan, out);
  return out;
}

/// Same feedback, evaluated in model space so the registered mesh never has to
/// be materialized. Distances scale by the registration's scale factor.
inline TipFeedback tip_feedback(const Point3& tip, const TriangleMesh& ventricles_model,
                                const SimilarityTransform& model_to_world, const TrajectoryPlan& plan) {
  TipFeedback out;
  const Point3 tip_model = model_to_world.inverse().apply(tip);
  const auto cp = point_mesh_distance(tip_model, ventricles_model);
  out.distance_to_ventricle = model_to_world.scale() * cp.distance;
  out.closest_point = model_to_world.apply(cp.point);
  if (ventricles_model.watertight()) out.inside = mesh_contains(ventricles_model, tip_model);
  detail::plan_metrics(tip, plan, out);
  return out;
}

}  // namespace ventronav
