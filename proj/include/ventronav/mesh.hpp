#pragma once

// Indexed triangle mesh with an AABB hierarchy for ray casts and closest-point
// queries. Meshes are immutable after construction and safe to share.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ventronav/geometry.hpp"

namespace ventronav {

using Triangle = std::array<std::uint32_t, 3>;

struct RayHit {
  Point3 point;
  double t = 0.0;  ///< ray parameter (distance along the unit direction)
  std::size_t triangle = 0;
};

struct ClosestPoint {
  Point3 point;
  double distance = 0.0;
  std::size_t triangle = 0;
};

namespace detail {

/// Möller–Trumbore. Returns the ray parameter of the hit, if any, with t > t_min.
/// Barycentric bounds are slightly inclusive so rays through shared edges or
/// vertices are never lost between neighbouring triangles.
inline std::optional<double> intersect_triangle(const Ray& ray, const Point3& a, const Point3& b,
                                                const Point3& c, double t_min = 1e-9) {
  constexpr double kParallel = 1e-14;
  constexpr double kBaryTol = 1e-12;
  const Vector3 e1 = b - a;
  const Vector3 e2 = c - a;
  const Vector3 pvec = ray.direction.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kParallel * e1.norm() * e2.norm()) return std::nullopt;
  const double inv = 1.0 / det;
  const Vector3 tvec = ray.origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < -kBaryTol || u > 1.0 + kBaryTol) return std::nullopt;
  const Vector3 qvec = tvec.cross(e1);
  const double v = ray.direction.dot(qvec) * inv;
  if (v < -kBaryTol || u + v > 1.0 + kBaryTol) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (!(t > t_min)) return std::nullopt;
  return t;
}

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
/// Handles the face, edge and vertex regions.
inline Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  const Vector3 ab = b - a;
  const Vector3 ac = c - a;
  const Vector3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vector3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vector3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct Aabb {
  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = Point3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Point3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& o) {
    lo = lo.cwiseMin(o.lo);
    hi = hi.cwiseMax(o.hi);
  }
  void pad(double eps) {
    lo.array() -= eps;
    hi.array() += eps;
  }

  double squared_distance(const Point3& p) const {
    const Vector3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vector3::Zero());
    return d.squaredNorm();
  }

  /// Slab test; returns the entry parameter (clamped at 0) if the ray reaches the box.
  std::optional<double> ray_entry(const Ray& ray) const {
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
      const double o = ray.origin[axis];
      const double d = ray.direction[axis];
      if (std::abs(d) < 1e-300) {
        if (o < lo[axis] || o > hi[axis]) return std::nullopt;
        continue;
      }
      double t0 = (lo[axis] - o) / d;
      double t1 = (hi[axis] - o) / d;
      if (t0 > t1) std::swap(t0, t1);
      tmin = std::max(tmin, t0);
      tmax = std::min(tmax, t1);
      if (tmin > tmax) return std::nullopt;
    }
    return tmin;
  }
};

/// Binary AABB hierarchy over triangle indices, median split on the longest
/// centroid axis.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::uint32_t left = 0;   ///< child index, or first primitive for leaves
    std::uint32_t right = 0;  ///< child index, or primitive count for leaves
    bool leaf = false;
  };

  Bvh() = default;

  Bvh(std::span<const Point3> vertices, std::span<const Triangle> triangles) {
    if (triangles.empty()) return;
    order_.resize(triangles.size());
    boxes_.resize(triangles.size());
    centroids_.resize(triangles.size());
    for (std::size_t i = 0; i < triangles.size(); ++i) {
      order_[i] = static_cast<std::uint32_t>(i);
      for (auto vi : triangles[i]) boxes_[i].grow(vertices[vi]);
      // Pad so rays grazing a face are never culled by rounding in the slab test.
      const double extent = (boxes_[i].hi - boxes_[i].lo).maxCoeff();
      boxes_[i].pad(1e-9 * std::max(1.0, extent) + 1e-12 * boxes_[i].hi.cwiseAbs().maxCoeff());
      centroids_[i] = (vertices[triangles[i][0]] + vertices[triangles[i][1]] + vertices[triangles[i][2]]) / 3.0;
    }
    nodes_.reserve(2 * triangles.size());
    build(0, static_cast<std::uint32_t>(triangles.size()));
    boxes_.clear();
    centroids_.clear();
  }

  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& order() const { return order_; }

 private:
  static constexpr std::uint32_t kLeafSize = 4;

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    Aabb cbox;
    for (std::uint32_t i = begin; i < end; ++i) {
      box.grow(boxes_[order_[i]]);
      cbox.grow(centroids_[order_[i]]);
    }
    nodes_[index].box = box;
    if (end - begin <= kLeafSize) {
      nodes_[index].leaf = true;
      nodes_[index].left = begin;
      nodes_[index].right = end - begin;
      return index;
    }
    int axis = 0;
    (cbox.hi - cbox.lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = centroids_[a][axis];
                       const double cb = centroids_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<Aabb> boxes_;
  std::vector<Point3> centroids_;
};

}  // namespace detail

struct MeshCleanReport {
  std::size_t degenerate_dropped = 0;
};

class TriangleMesh {
 public:
  static constexpr double kDegenerateArea = 1e-12;  ///< mm²

  TriangleMesh() = default;

  /// Validates indices, drops triangles with area below kDegenerateArea and
  /// records whether every edge is shared by exactly two triangles.
  TriangleMesh(std::vector<Point3> vertices, std::vector<Triangle> triangles,
               MeshCleanReport* report = nullptr)
      : vertices_(std::move(vertices)) {
    for (const auto& v : vertices_) require_finite(v, "mesh vertex");
    triangles_.reserve(triangles.size());
    std::size_t dropped = 0;
    for (const auto& tri : triangles) {
      for (auto vi : tri) {
        if (vi >= vertices_.size()) throw Error(ErrorCode::InvalidArgument, "triangle index out of range");
      }
      const Vector3 n = (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
      if (0.5 * n.norm() < kDegenerateArea) {
        ++dropped;
        continue;
      }
      triangles_.push_back(tri);
    }
    if (report) report->degenerate_dropped = dropped;
    degenerate_dropped_ = dropped;
    watertight_ = compute_watertight();
    bvh_ = std::make_shared<const detail::Bvh>(vertices_, triangles_);
  }

  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  bool empty() const { return triangles_.empty(); }
  bool watertight() const { return watertight_; }
  std::size_t degenerate_dropped() const { return degenerate_dropped_; }

  Point3 vertex(std::size_t tri, int corner) const { return vertices_[triangles_[tri][corner]]; }

  detail::Aabb bounds() const {
    detail::Aabb box;
    for (const auto& v : vertices_) box.grow(v);
    return box;
  }

  /// Area-weighted centroid of the surface.
  Point3 surface_centroid() const {
    Vector3 acc = Vector3::Zero();
    double area = 0.0;
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      const Point3 a = vertex(i, 0), b = vertex(i, 1), c = vertex(i, 2);
      const double w = 0.5 * (b - a).cross(c - a).norm();
      acc += w * (a + b + c) / 3.0;
      area += w;
    }
    return area > 0.0 ? Point3(acc / area) : Point3::Zero();
  }

  TriangleMesh transformed(const SimilarityTransform& t) const {
    std::vector<Point3> out;
    out.reserve(vertices_.size());
    for (const auto& v : vertices_) out.push_back(t.apply(v));
    return TriangleMesh(std::move(out), triangles_);
  }

  const detail::Bvh& bvh() const { return *bvh_; }

  friend bool operator==(const TriangleMesh& a, const TriangleMesh& b) {
    return a.vertices_ == b.vertices_ && a.triangles_ == b.triangles_;
  }

 private:
  bool compute_watertight() const {
    if (triangles_.empty()) return false;
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const auto& tri : triangles_) {
      for (int k = 0; k < 3; ++k) {
        auto a = tri[k];
        auto b = tri[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edges[{a, b}];
      }
    }
    return std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; });
  }

  std::vector<Point3> vertices_;
  std::vector<Triangle> triangles_;
  std::size_t degenerate_dropped_ = 0;
  bool watertight_ = false;
  std::shared_ptr<const detail::Bvh> bvh_ = std::make_shared<const detail::Bvh>();
};

/// Nearest hit with positive ray parameter; ties go to the lowest triangle index.
inline std::optional<RayHit> ray_mesh_intersect(const Ray& ray, const TriangleMesh& mesh) {
  const auto& bvh = mesh.bvh();
  if (bvh.empty()) return std::nullopt;
  const auto& nodes = bvh.nodes();
  const auto& order = bvh.order();

  double best_t = std::numeric_limits<double>::infinity();
  std::size_t best_tri = std::numeric_limits<std::size_t>::max();
  std::vector<std::uint32_t> stack{0};
  stack.reserve(64);
  while (!stack.empty()) {
    const auto& node = nodes[stack.back()];
    stack.pop_back();
    const auto entry = node.box.ray_entry(ray);
    if (!entry || *entry > best_t) continue;
    if (node.leaf) {
      for (std::uint32_t k = 0; k < node.right; ++k) {
        const std::size_t tri = order[node.left + k];
        const auto t = detail::intersect_triangle(ray, mesh.vertex(tri, 0), mesh.vertex(tri, 1), mesh.vertex(tri, 2));
        if (t && (*t < best_t || (*t == best_t && tri < best_tri))) {
          best_t = *t;
          best_tri = tri;
        }
      }
    } else {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  if (best_tri == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return RayHit{ray.at(best_t), best_t, best_tri};
}

/// Unsigned distance to the surface and the closest point on it; ties go to
/// the lowest triangle index.
inline ClosestPoint point_mesh_distance(const Point3& p, const TriangleMesh& mesh) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "distance query on an empty mesh");
  const auto& nodes = mesh.bvh().nodes();
  const auto& order = mesh.bvh().order();

  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best_tri = std::numeric_limits<std::size_t>::max();
  Point3 best_point = p;
  std::vector<std::uint32_t> stack{0};
  stack.reserve(64);
  while (!stack.empty()) {
    const auto& node = nodes[stack.back()];
    stack.pop_back();
    if (node.box.squared_distance(p) > best_d2) continue;
    if (node.leaf) {
      for (std::uint32_t k = 0; k < node.right; ++k) {
        const std::size_t tri = order[node.left + k];
        const Point3 q = detail::closest_point_on_triangle(p, mesh.vertex(tri, 0), mesh.vertex(tri, 1), mesh.vertex(tri, 2));
        const double d2 = (q - p).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && tri < best_tri)) {
          best_d2 = d2;
          best_tri = tri;
          best_point = q;
        }
      }
    } else {
      // Visit the nearer child first.
      const double dl = nodes[node.left].box.squared_distance(p);
      const double dr = nodes[node.right].box.squared_distance(p);
      if (dl <= dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }
  return {best_point, std::sqrt(best_d2), best_tri};
}

/// Ray parameters of every crossing along the ray, sorted ascending.
inline std::vector<double> ray_mesh_all_hits(const Ray& ray, const TriangleMesh& mesh) {
  std::vector<double> hits;
  const auto& bvh = mesh.bvh();
  if (bvh.empty()) return hits;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const auto& node = bvh.nodes()[stack.back()];
    stack.pop_back();
    if (!node.box.ray_entry(ray)) continue;
    if (node.leaf) {
      for (std::uint32_t k = 0; k < node.right; ++k) {
        const std::size_t tri = bvh.order()[node.left + k];
        if (auto t = detail::intersect_triangle(ray, mesh.vertex(tri, 0), mesh.vertex(tri, 1), mesh.vertex(tri, 2), 0.0)) {
          hits.push_back(*t);
        }
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

/// Parity inside test. Requires a watertight mesh. Three fixed, generic ray
/// directions vote so a ray that clips an edge cannot flip the answer alone.
inline bool mesh_contains(const TriangleMesh& mesh, const Point3& p) {
  if (!mesh.watertight()) throw Error(ErrorCode::MeshNotWatertight, "inside test needs a closed mesh");
  static const std::array<Vector3, 3> kDirections = {
      Vector3(0.5773502691896258, 0.5773502691896257, 0.5773502691896259),
      Vector3(-0.2672612419124244, 0.8017837257372732, -0.5345224838248488),
      Vector3(0.8164965809277261, -0.4082482904638631, -0.4082482904638629)};
  int votes = 0;
  for (const auto& dir : kDirections) {
    auto hits = ray_mesh_all_hits(Ray(p, dir), mesh);
    // Shared-edge crossings can be reported twice; merge near-equal parameters.
    std::size_t crossings = 0;
    double last = -1.0;
    for (double t : hits) {
      if (crossings == 0 || t - last > 1e-9) ++crossings;
      last = t;
    }
    votes += static_cast<int>(crossings % 2);
  }
  return votes >= 2;
}

}  // namespace ventronav
