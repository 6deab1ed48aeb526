#pragma once

// Iterative closest point refinement against a point cloud or a triangle
// mesh, alternating closest-point correspondence with the closed-form
// similarity fit.

#include <limits>
#include <span>
#include <vector>

#include "ventronav/mesh.hpp"
#include "ventronav/registration.hpp"

namespace ventronav {

struct IcpConfig {
  int max_iterations = 50;
  double convergence_tol = 1e-6;  ///< mm of RMSE improvement
  ScaleMode scale_mode = ScaleMode::Fixed;
  ScaleBounds scale_bounds{0.9, 1.1};

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
    if (!(convergence_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "convergence_tol must be positive");
    scale_bounds.validate();
  }
};

namespace detail {

/// Nearest target point; lowest index wins ties.
inline Point3 nearest_point(const Point3& p, std::span<const Point3> target) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = (target[i] - p).squaredNorm();
    if (d < best) {
      best = d;
      best_i = i;
    }
  }
  return target[best_i];
}

template <typename ClosestFn>
RegistrationResult icp_loop(std::span<const Point3> source, const SimilarityTransform& init, const IcpConfig& cfg,
                            ClosestFn&& closest) {
  if (source.empty()) throw Error(ErrorCode::TooFewPoints, "ICP needs a nonempty source");
  cfg.validate();
  require_non_collinear(source, "source");

  std::vector<Point3> matched(source.size());
  auto correspond = [&](const SimilarityTransform& t) {
    for (std::size_t i = 0; i < source.size(); ++i) matched[i] = closest(t.apply(source[i]));
    return rms(residuals(t, source, matched));
  };

  RegistrationResult out;
  out.transform = init;
  double current = correspond(init);
  out.converged = false;
  out.iterations = 0;
  out.rmse_trace.clear();
  while (out.iterations < cfg.max_iterations) {
    const auto fit = fit_similarity(source, matched, cfg.scale_mode, &cfg.scale_bounds);
    const double next = correspond(fit.transform);
    ++out.iterations;
    // Both half-steps are exact minimizations, so `next <= current` up to rounding;
    // keep the better transform if rounding says otherwise.
    if (next <= current) {
      out.transform = fit.transform;
      const double improvement = current - next;
      current = next;
      out.rmse_trace.push_back(current);
      if (improvement < cfg.convergence_tol) {
        out.converged = true;
        break;
      }
    } else {
      correspond(out.transform);
      out.rmse_trace.push_back(current);
      out.converged = true;
      break;
    }
  }
  out.residuals = residuals(out.transform, source, matched);
  out.rmse = rms(out.residuals);
  out.condition = detect_degeneracy(source);
  return out;
}

}  // namespace detail

/// Point-cloud target: correspondences by brute-force nearest neighbour.
inline RegistrationResult icp_refine(std::span<const Point3> source, std::span<const Point3> target,
                                     const SimilarityTransform& init, const IcpConfig& cfg = {}) {
  if (target.empty()) throw Error(ErrorCode::TooFewPoints, "ICP needs a nonempty target");
  return detail::icp_loop(source, init, cfg, [&](const Point3& p) { return detail::nearest_point(p, target); });
}

/// Mesh target: correspondences are closest points on the surface.
inline RegistrationResult icp_refine(std::span<const Point3> source, const TriangleMesh& target,
                                     const SimilarityTransform& init, const IcpConfig& cfg = {}) {
  if (target.empty()) throw Error(ErrorCode::EmptyMesh, "ICP target mesh is empty");
  return detail::icp_loop(source, init, cfg, [&](const Point3& p) { return point_mesh_distance(p, target).point; });
}

}  // namespace ventronav
