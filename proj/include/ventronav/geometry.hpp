#pragma once

// Core 3D value types: points, rotations, similarity transforms, pinhole
// camera geometry. Units are millimetres, frames are right-handed.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <string>

#include "ventronav/error.hpp"

namespace ventronav {

using Point3 = Eigen::Vector3d;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

inline bool is_finite(const Vector3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

inline void require_finite(const Vector3& v, const char* what) {
  if (!is_finite(v)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is not finite");
}

/// Proper rotation. Stored as a unit quaternion so repeated composition does
/// not drift away from SO(3); exposed as a matrix.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  static Rotation identity() { return {}; }

  /// Accepts any orthonormal matrix with det = +1 (within `tol`).
  static Rotation from_matrix(const Matrix3& m, double tol = 1e-6) {
    if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, "rotation matrix is not finite");
    const double ortho = (m.transpose() * m - Matrix3::Identity()).cwiseAbs().maxCoeff();
    const double det = m.determinant();
    if (ortho > tol || std::abs(det - 1.0) > tol) {
      throw Error(ErrorCode::InvalidArgument, "matrix is not a proper rotation");
    }
    return Rotation(Eigen::Quaterniond(m));
  }

  static Rotation from_quaternion(double w, double x, double y, double z) {
    return Rotation(Eigen::Quaterniond(w, x, y, z));
  }

  /// `angle_rad` about `axis` (need not be unit length).
  static Rotation from_axis_angle(const Vector3& axis, double angle_rad) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(angle_rad)) {
      throw Error(ErrorCode::InvalidArgument, "axis-angle needs a nonzero axis and finite angle");
    }
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / n)));
  }

  /// Rotation vector (axis * angle). Zero vector gives identity.
  static Rotation from_rotation_vector(const Vector3& rv) {
    const double angle = rv.norm();
    if (angle == 0.0) return {};
    return from_axis_angle(rv, angle);
  }

  Matrix3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Vector3 apply(const Vector3& v) const { return q_ * v; }
  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

  /// Geodesic angle between two rotations in radians.
  double angle_to(const Rotation& other) const { return q_.angularDistance(other.q_); }

  friend bool operator==(const Rotation& a, const Rotation& b) { return a.q_.coeffs() == b.q_.coeffs(); }

 private:
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) {
    if (!q_.coeffs().allFinite() || q_.squaredNorm() == 0.0) {
      throw Error(ErrorCode::InvalidArgument, "quaternion is not finite and nonzero");
    }
    // Already-unit input is kept bit-exact so serialized rotations round-trip.
    if (std::abs(q_.squaredNorm() - 1.0) > 4e-16) q_.normalize();
    // Canonical sign keeps serialization stable.
    if (q_.w() < 0.0) q_.coeffs() *= -1.0;
  }

  Eigen::Quaterniond q_;
};

/// x -> scale * R * x + translation. Maps model (image) space to world
/// (patient) space when produced by registration.
class SimilarityTransform {
 public:
  SimilarityTransform() = default;

  SimilarityTransform(double scale, const Rotation& rotation, const Vector3& translation)
      : scale_(scale), rotation_(rotation), translation_(translation) {
    if (!std::isfinite(scale) || !(scale > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "similarity scale must be finite and positive");
    }
    require_finite(translation, "translation");
  }

  static SimilarityTransform identity() { return {}; }
  static SimilarityTransform rigid(const Rotation& r, const Vector3& t) { return {1.0, r, t}; }

  double scale() const { return scale_; }
  const Rotation& rotation() const { return rotation_; }
  const Vector3& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return scale_ * rotation_.apply(p) + translation_; }
  Vector3 apply_vector(const Vector3& v) const { return scale_ * rotation_.apply(v); }
  Point3 operator()(const Point3& p) const { return apply(p); }

  SimilarityTransform inverse() const {
    const Rotation rinv = rotation_.inverse();
    return {1.0 / scale_, rinv, -(rinv.apply(translation_) / scale_)};
  }

  /// (this ∘ rhs)(p) = this(rhs(p)).
  SimilarityTransform compose(const SimilarityTransform& rhs) const {
    return {scale_ * rhs.scale_, rotation_ * rhs.rotation_, apply(rhs.translation_)};
  }

  Eigen::Matrix4d homogeneous() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = scale_ * rotation_.matrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  friend bool operator==(const SimilarityTransform& a, const SimilarityTransform& b) {
    return a.scale_ == b.scale_ && a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  double scale_ = 1.0;
  Rotation rotation_;
  Vector3 translation_ = Vector3::Zero();
};

inline Point3 apply_transform(const SimilarityTransform& t, const Point3& p) { return t.apply(p); }

/// Rigid camera-to-world pose (scale fixed at 1). Camera looks along +z of
/// its own frame, x to the right of the image, y down the image.
struct CameraPose {
  Rotation rotation;
  Vector3 translation = Vector3::Zero();

  Point3 to_world(const Point3& camera_point) const { return rotation.apply(camera_point) + translation; }
  Point3 to_camera(const Point3& world_point) const {
    return rotation.inverse().apply(world_point - translation);
  }
  Point3 center() const { return translation; }
  Vector3 viewing_axis() const { return rotation.apply(Vector3::UnitZ()); }
  SimilarityTransform as_transform() const { return SimilarityTransform::rigid(rotation, translation); }

  bool operator==(const CameraPose&) const = default;
};

struct CameraIntrinsics {
  double fx = 1500.0;
  double fy = 1500.0;
  double cx = 960.0;
  double cy = 720.0;
  int width = 1920;
  int height = 1440;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "sensor size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw Error(ErrorCode::InvalidArgument, "principal point outside the sensor");
    }
  }
};

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  ///< z in the camera frame, mm
};

inline PixelDepth project(const CameraIntrinsics& intr, const CameraPose& pose, const Point3& p) {
  const Point3 c = pose.to_camera(p);
  if (!(c.z() > 0.0)) throw Error(ErrorCode::BehindCamera, "point is not in front of the camera");
  return {intr.fx * (c.x() / c.z()) + intr.cx, intr.fy * (c.y() / c.z()) + intr.cy, c.z()};
}

inline Point3 unproject(const CameraIntrinsics& intr, const CameraPose& pose, double u, double v,
                        double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw Error(ErrorCode::NonPositiveDepth, "depth must be positive");
  }
  const Point3 c((u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth);
  return pose.to_world(c);
}

inline Point3 unproject(const CameraIntrinsics& intr, const CameraPose& pose, const PixelDepth& px) {
  return unproject(intr, pose, px.u, px.v, px.depth);
}

struct Ray {
  Point3 origin = Point3::Zero();
  Vector3 direction = Vector3::UnitZ();

  Ray() = default;
  /// Direction is normalized here; a zero direction is rejected.
  Ray(const Point3& o, const Vector3& d) : origin(o) {
    require_finite(o, "ray origin");
    const double n = d.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "ray direction must be nonzero");
    direction = d / n;
  }

  Point3 at(double t) const { return origin + t * direction; }
};

/// Ray from the camera center through pixel (u, v), in world coordinates.
inline Ray pixel_ray(const CameraIntrinsics& intr, const CameraPose& pose, double u, double v) {
  const Vector3 dir_cam((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  return Ray(pose.center(), pose.rotation.apply(dir_cam));
}

}  // namespace ventronav
