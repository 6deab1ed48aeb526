#pragma once

// Simulated landmark capture: a virtual phone camera aimed at a landmark reads
// depth off the head surface (the LiDAR stand-in), with aim, depth and pose
// noise, and unprojects the reading to a world-space pick.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "ventronav/geometry.hpp"
#include "ventronav/landmarks.hpp"
#include "ventronav/mesh.hpp"
#include "ventronav/registration.hpp"

namespace ventronav {

/// Landmarks must sit on the head surface within this distance.
inline constexpr double kSurfaceTolerance = 0.5;
/// A capture whose ray lands farther than this from the aimed landmark is rejected.
inline constexpr double kVisibilityGate = 20.0;

using Rng = std::mt19937_64;

/// The simulated patient. Head surface in world space, ventricles in model
/// space, and the ground-truth model -> world pose tying them together.
class VirtualScene {
 public:
  VirtualScene(TriangleMesh head_world, TriangleMesh ventricles_model, SimilarityTransform model_to_world,
               LandmarkSet model_landmarks)
      : head_(std::move(head_world)),
        ventricles_(std::move(ventricles_model)),
        truth_(model_to_world),
        model_landmarks_(std::move(model_landmarks)),
        world_landmarks_(model_landmarks_.transformed(truth_, Space::World)) {
    if (!model_landmarks_.complete()) {
      throw Error(ErrorCode::IncompleteCorrespondence, "scene needs all seven model landmarks");
    }
    if (head_.empty()) throw Error(ErrorCode::EmptyMesh, "scene head mesh is empty");
    const Point3 centroid = head_.surface_centroid();
    for (auto id : kLandmarkOrder) {
      const Point3& p = world_landmarks_.at(id);
      const double d = point_mesh_distance(p, head_).distance;
      if (d > kSurfaceTolerance) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(id)) + " lies " + std::to_string(d) +
                                                    " mm off the head surface");
      }
      approach_[index_of(id)] = (p - centroid).normalized();
    }
  }

  const TriangleMesh& head_mesh() const { return head_; }
  const TriangleMesh& ventricle_mesh() const { return ventricles_; }
  const SimilarityTransform& model_to_world() const { return truth_; }
  const LandmarkSet& model_landmarks() const { return model_landmarks_; }
  const LandmarkSet& true_world_landmarks() const { return world_landmarks_; }

  /// Direction (world) a user would approach the landmark from.
  const Vector3& approach_direction(LandmarkId id) const { return approach_[index_of(id)]; }
  void set_approach_direction(LandmarkId id, const Vector3& dir_world) {
    if (!(dir_world.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "approach direction must be nonzero");
    approach_[index_of(id)] = dir_world.normalized();
  }

 private:
  TriangleMesh head_;
  TriangleMesh ventricles_;
  SimilarityTransform truth_;
  LandmarkSet model_landmarks_;
  LandmarkSet world_landmarks_;
  std::array<Vector3, kLandmarkCount> approach_{};
};

struct NoiseModel {
  double aim_sigma_px = 0.0;
  double depth_sigma_mm = 0.0;
  double depth_bias_mm = 0.0;
  double pose_rot_sigma_deg = 0.0;
  double pose_trans_sigma_mm = 0.0;
  std::uint64_t stream = 0;

  void validate() const {
    for (double s : {aim_sigma_px, depth_sigma_mm, pose_rot_sigma_deg, pose_trans_sigma_mm}) {
      if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "noise sigmas must be >= 0");
    }
    if (!std::isfinite(depth_bias_mm)) throw Error(ErrorCode::InvalidArgument, "depth bias must be finite");
  }

  /// Every sigma and the bias multiplied by `k`.
  NoiseModel scaled(double k) const {
    NoiseModel out = *this;
    out.aim_sigma_px *= k;
    out.depth_sigma_mm *= k;
    out.depth_bias_mm *= k;
    out.pose_rot_sigma_deg *= k;
    out.pose_trans_sigma_mm *= k;
    return out;
  }

  bool operator==(const NoiseModel&) const = default;
};

struct AcquisitionSample {
  LandmarkId id = LandmarkId::RightTragus;
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;         ///< mm, camera-frame z as read by the sensor
  double surface_depth = 0.0; ///< noise-free depth of the surface hit
  CameraPose pose;            ///< pose the device believed it had (after drift)
  Point3 point = Point3::Zero();
};

/// Camera `standoff_mm` away from `target` along `approach_direction`,
/// principal axis through the target, image-up as close to world +z as possible.
inline CameraPose look_at(const Point3& target, double standoff_mm, const Vector3& approach_direction) {
  if (!(standoff_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "standoff must be positive");
  if (!(approach_direction.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "approach direction must be nonzero");
  const Vector3 back = approach_direction.normalized();
  const Vector3 z = -back;
  Vector3 up = Vector3::UnitZ();
  if (std::abs(up.dot(z)) > 0.95) up = Vector3::UnitY();
  const Vector3 y = -(up - up.dot(z) * z).normalized();
  const Vector3 x = y.cross(z);
  Matrix3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return CameraPose{Rotation::from_matrix(r), target + standoff_mm * back};
}

inline CameraPose aim_camera(const VirtualScene& scene, LandmarkId id, double standoff_mm,
                             const Vector3& approach_direction) {
  const auto& target = scene.true_world_landmarks().find(id);
  if (!target) throw Error(ErrorCode::UnknownLandmark, std::string(to_string(id)) + " not in scene");
  return look_at(*target, standoff_mm, approach_direction);
}

inline CameraPose aim_camera(const VirtualScene& scene, LandmarkId id, double standoff_mm) {
  return aim_camera(scene, id, standoff_mm, scene.approach_direction(id));
}

/// One capture: jitter the cursor, cast the ray onto the head surface, read a
/// noisy depth, drift the believed pose, and unproject.
inline AcquisitionSample acquire_point(const VirtualScene& scene, const CameraPose& pose, const CameraIntrinsics& intr,
                                       const Point3& target, LandmarkId id, const NoiseModel& noise, Rng& rng) {
  noise.validate();
  std::normal_distribution<double> gauss(0.0, 1.0);

  const PixelDepth aimed = project(intr, pose, target);
  AcquisitionSample s;
  s.id = id;
  s.u = aimed.u + noise.aim_sigma_px * gauss(rng);
  s.v = aimed.v + noise.aim_sigma_px * gauss(rng);

  const Ray ray = pixel_ray(intr, pose, s.u, s.v);
  const auto hit = ray_mesh_intersect(ray, scene.head_mesh());
  if (!hit || (hit->point - target).norm() > kVisibilityGate) {
    throw Error(ErrorCode::NotVisible, std::string(to_string(id)) + " is not visible from this pose");
  }
  s.surface_depth = pose.to_camera(hit->point).z();
  s.depth = s.surface_depth + noise.depth_sigma_mm * gauss(rng) + noise.depth_bias_mm;
  if (!(s.depth > 0.0)) throw Error(ErrorCode::NotVisible, "depth reading is not positive");

  constexpr double kDeg = std::numbers::pi / 180.0;
  const Vector3 rot_noise(gauss(rng), gauss(rng), gauss(rng));
  const Vector3 trans_noise(gauss(rng), gauss(rng), gauss(rng));
  s.pose.rotation = pose.rotation * Rotation::from_rotation_vector(rot_noise * (noise.pose_rot_sigma_deg * kDeg));
  s.pose.translation = pose.translation + noise.pose_trans_sigma_mm * trans_noise;

  s.point = unproject(intr, s.pose, s.u, s.v, s.depth);
  return s;
}

inline AcquisitionSample acquire_landmark(const VirtualScene& scene, const CameraPose& pose,
                                          const CameraIntrinsics& intr, LandmarkId id, const NoiseModel& noise,
                                          Rng& rng) {
  return acquire_point(scene, pose, intr, scene.true_world_landmarks().at(id), id, noise, rng);
}

struct AcquisitionSettings {
  CameraIntrinsics intrinsics;
  double standoff_mm = 300.0;
};

struct SimulatedSession {
  LandmarkSet world{Space::World};
  std::array<double, kLandmarkCount> spread{};  ///< RMS pick spread per landmark, mm
  std::vector<AcquisitionSample> samples;
};

/// Acquire every landmark in canonical order, `picks_per_landmark` captures
/// each, aggregated to their centroid.
inline SimulatedSession simulate_session(const VirtualScene& scene, const AcquisitionSettings& settings,
                                         const NoiseModel& noise, Rng& rng, int picks_per_landmark = 1) {
  if (picks_per_landmark < 1) throw Error(ErrorCode::InvalidArgument, "picks_per_landmark must be >= 1");
  SimulatedSession out;
  out.samples.reserve(kLandmarkCount * static_cast<std::size_t>(picks_per_landmark));
  std::vector<Point3> picks;
  for (auto id : kLandmarkOrder) {
    const CameraPose pose = aim_camera(scene, id, settings.standoff_mm);
    picks.clear();
    for (int k = 0; k < picks_per_landmark; ++k) {
      out.samples.push_back(acquire_landmark(scene, pose, settings.intrinsics, id, noise, rng));
      picks.push_back(out.samples.back().point);
    }
    const auto agg = aggregate_repeated_picks(picks);
    out.world.set(id, agg.centroid);
    out.spread[index_of(id)] = agg.spread;
  }
  return out;
}

}  // namespace ventronav
