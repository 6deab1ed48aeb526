#pragma once

// Closed-form least-squares similarity registration of paired points,
// residual statistics and configuration diagnostics.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SVD>

#include "ventronav/geometry.hpp"
#include "ventronav/landmarks.hpp"

namespace ventronav {

enum class ScaleMode { Fixed, Estimated };

constexpr std::string_view to_string(ScaleMode m) { return m == ScaleMode::Fixed ? "fixed" : "estimated"; }

inline ScaleMode parse_scale_mode(std::string_view s) {
  if (s == "fixed") return ScaleMode::Fixed;
  if (s == "estimated") return ScaleMode::Estimated;
  throw Error(ErrorCode::InvalidArgument, "scale mode must be 'fixed' or 'estimated'");
}

struct ScaleBounds {
  double lo = 0.9;
  double hi = 1.1;

  bool contains(double s) const { return s >= lo && s <= hi; }
  void validate() const {
    if (!(lo > 0.0) || !(lo <= 1.0) || !(hi >= 1.0) || !std::isfinite(hi)) {
      throw Error(ErrorCode::InvalidArgument, "scale bounds must be positive and contain 1");
    }
  }
};

enum class Configuration { WellConditioned, Coplanar, Collinear };

constexpr std::string_view to_string(Configuration c) {
  switch (c) {
    case Configuration::WellConditioned: return "well-conditioned";
    case Configuration::Coplanar: return "coplanar";
    case Configuration::Collinear: return "collinear";
  }
  return "unknown";
}

struct DegeneracyDiagnostic {
  Configuration configuration = Configuration::WellConditioned;
  double condition_ratio = 0.0;          ///< smallest / largest covariance eigenvalue
  Vector3 eigenvalues = Vector3::Zero();  ///< ascending, mm²

  bool operator==(const DegeneracyDiagnostic&) const = default;
};

inline constexpr double kPlanarityRatio = 1e-3;

/// Classifies the spatial spread of a point set from the eigenvalues of its
/// centered covariance.
inline DegeneracyDiagnostic detect_degeneracy(std::span<const Point3> points) {
  if (points.size() < 3) throw Error(ErrorCode::TooFewPoints, "need at least 3 points");
  Point3 mean = Point3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Matrix3 cov = Matrix3::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Matrix3> solver(cov, Eigen::EigenvaluesOnly);
  Vector3 ev = solver.eigenvalues().cwiseMax(0.0);
  DegeneracyDiagnostic out;
  out.eigenvalues = ev;
  const double largest = ev[2];
  if (!(largest > 0.0)) {
    out.configuration = Configuration::Collinear;
    out.condition_ratio = 0.0;
    return out;
  }
  out.condition_ratio = ev[0] / largest;
  if (ev[1] / largest < kPlanarityRatio) {
    out.configuration = Configuration::Collinear;
  } else if (out.condition_ratio < kPlanarityRatio) {
    out.configuration = Configuration::Coplanar;
  }
  return out;
}

struct RegistrationResult {
  SimilarityTransform transform;  ///< source (model) -> target (world)
  double rmse = 0.0;
  std::vector<double> residuals;  ///< one per correspondence
  std::vector<LandmarkId> ids;    ///< landmark of each residual; empty for anonymous point lists
  DegeneracyDiagnostic condition;
  int iterations = 1;
  bool converged = true;
  std::vector<double> rmse_trace;  ///< RMSE after each iteration (ICP)

  double residual(LandmarkId id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) return residuals[i];
    }
    throw Error(ErrorCode::UnknownLandmark, std::string(to_string(id)) + " has no residual");
  }

  bool operator==(const RegistrationResult&) const = default;
};

namespace detail {

struct SimilarityFit {
  SimilarityTransform transform;
  double raw_scale = 1.0;  ///< least-squares scale before any clamping
};

/// Least-squares similarity (Umeyama 1991) minimizing sum |s R src_i + t - dst_i|².
/// With `clamp`, the scale is clamped into the bounds; since the optimal
/// rotation does not depend on the scale and the cost is quadratic in it, the
/// clamped result is the exact constrained optimum.
inline SimilarityFit fit_similarity(std::span<const Point3> src, std::span<const Point3> dst, ScaleMode mode,
                                    const ScaleBounds* clamp = nullptr) {
  const auto n = static_cast<double>(src.size());
  Point3 mu_src = Point3::Zero();
  Point3 mu_dst = Point3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= n;
  mu_dst /= n;

  Matrix3 cov = Matrix3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vector3 a = src[i] - mu_src;
    cov += (dst[i] - mu_dst) * a.transpose();
    var_src += a.squaredNorm();
  }
  cov /= n;
  var_src /= n;

  Eigen::JacobiSVD<Matrix3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix3& u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  Vector3 sign = Vector3::Ones();
  if (u.determinant() * v.determinant() < 0.0) sign[2] = -1.0;  // reflection guard
  Matrix3 r = u * sign.asDiagonal() * v.transpose();

  double scale = 1.0;
  double raw = 1.0;
  if (mode == ScaleMode::Estimated) {
    raw = svd.singularValues().dot(sign) / var_src;
    scale = raw;
    if (clamp) scale = std::clamp(raw, clamp->lo, clamp->hi);
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::DegenerateConfiguration, "similarity fit produced a non-positive scale");
  }
  const Rotation rot = Rotation::from_matrix(r);
  const Vector3 t = mu_dst - scale * rot.apply(mu_src);
  return {SimilarityTransform(scale, rot, t), raw};
}

inline std::vector<double> residuals(const SimilarityTransform& t, std::span<const Point3> src,
                                     std::span<const Point3> dst) {
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = (t.apply(src[i]) - dst[i]).norm();
  return out;
}

inline double rms(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc / static_cast<double>(values.size()));
}

inline void require_non_collinear(std::span<const Point3> pts, const char* which) {
  if (pts.size() < 3) throw Error(ErrorCode::IncompleteCorrespondence, "need at least 3 correspondences");
  if (detect_degeneracy(pts).configuration == Configuration::Collinear) {
    throw Error(ErrorCode::DegenerateConfiguration, std::string(which) + " points are collinear");
  }
}

inline void collect_pairs(const LandmarkSet& model, const LandmarkSet& world, std::vector<LandmarkId>& ids,
                          std::vector<Point3>& src, std::vector<Point3>& dst) {
  if (model.ids() != world.ids()) {
    throw Error(ErrorCode::IncompleteCorrespondence, "model and world landmark ids differ");
  }
  ids = model.ids();
  for (auto id : ids) {
    src.push_back(model.at(id));
    dst.push_back(world.at(id));
  }
}

}  // namespace detail

/// Least-squares fit from paired point lists (src_i <-> dst_i). Scale outside
/// `bounds` in Estimated mode is reported as ScaleOutOfBounds.
inline RegistrationResult estimate_similarity(std::span<const Point3> src, std::span<const Point3> dst,
                                              ScaleMode mode = ScaleMode::Estimated, ScaleBounds bounds = {}) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::IncompleteCorrespondence, "point lists differ in length");
  }
  bounds.validate();
  detail::require_non_collinear(src, "model");
  detail::require_non_collinear(dst, "world");

  const auto fit = detail::fit_similarity(src, dst, mode);
  if (mode == ScaleMode::Estimated && !bounds.contains(fit.raw_scale)) {
    throw Error(ErrorCode::ScaleOutOfBounds,
                "estimated scale " + std::to_string(fit.raw_scale) + " outside [" + std::to_string(bounds.lo) +
                    ", " + std::to_string(bounds.hi) + "]");
  }
  RegistrationResult out;
  out.transform = fit.transform;
  out.residuals = detail::residuals(out.transform, src, dst);
  out.rmse = detail::rms(out.residuals);
  out.condition = detect_degeneracy(src);
  out.rmse_trace = {out.rmse};
  return out;
}

/// Landmark registration: model (CT) landmarks -> world (patient) landmarks.
/// The resulting transform maps the model landmark mean exactly onto the
/// world landmark centroid.
inline RegistrationResult estimate_similarity(const LandmarkSet& model, const LandmarkSet& world,
                                              ScaleMode mode = ScaleMode::Estimated, ScaleBounds bounds = {}) {
  std::vector<LandmarkId> ids;
  std::vector<Point3> src;
  std::vector<Point3> dst;
  detail::collect_pairs(model, world, ids, src, dst);
  auto out = estimate_similarity(src, dst, mode, bounds);
  out.ids = std::move(ids);
  return out;
}

inline double compute_rmse(const SimilarityTransform& t, const LandmarkSet& model, const LandmarkSet& world) {
  std::vector<LandmarkId> ids;
  std::vector<Point3> src;
  std::vector<Point3> dst;
  detail::collect_pairs(model, world, ids, src, dst);
  if (ids.empty()) throw Error(ErrorCode::IncompleteCorrespondence, "no landmarks to compare");
  const auto r = detail::residuals(t, src, dst);
  return detail::rms(r);
}

struct PickAggregate {
  Point3 centroid = Point3::Zero();
  double spread = 0.0;  ///< RMS distance of the picks from their centroid, mm
};

/// Centroid of repeated picks of one landmark, with the RMS spread as an
/// intra-user variability estimate.
inline PickAggregate aggregate_repeated_picks(std::span<const Point3> picks) {
  if (picks.empty()) throw Error(ErrorCode::InvalidArgument, "no picks to aggregate");
  PickAggregate out;
  for (const auto& p : picks) out.centroid += p;
  out.centroid /= static_cast<double>(picks.size());
  double acc = 0.0;
  for (const auto& p : picks) acc += (p - out.centroid).squaredNorm();
  out.spread = std::sqrt(acc / static_cast<double>(picks.size()));
  return out;
}

}  // namespace ventronav
