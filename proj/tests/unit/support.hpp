#pragma once

// Test fixtures and brute-force oracles. The oracles deliberately use
// different algorithms from the library code they check.

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "ventronav.hpp"

namespace vtest {

using namespace ventronav;

inline std::filesystem::path source_dir() { return VENTRONAV_SOURCE_DIR; }
inline std::filesystem::path phantom_scenario() { return source_dir() / "data" / "phantom" / "scenario.json"; }

inline const LoadedScenario& phantom() {
  static const LoadedScenario sc = load_scenario(phantom_scenario());
  return sc;
}

/// Icosphere, outward winding; vertices exactly on the sphere.
inline TriangleMesh icosphere(double radius, int subdivisions, const Point3& center = Point3::Zero()) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Point3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    for (const auto& tri : f) {
      const auto ab = midpoint(tri[0], tri[1]);
      const auto bc = midpoint(tri[1], tri[2]);
      const auto ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = center + radius * p;
  return TriangleMesh(std::move(v), std::move(f));
}

/// Largest distance between the sphere and a point of the mesh (chord sagitta bound).
inline double sphere_chord_tolerance(const TriangleMesh& mesh, double radius) {
  double worst = 0.0;
  for (const auto& tri : mesh.triangles()) {
    const Point3 c = (mesh.vertices()[tri[0]] + mesh.vertices()[tri[1]] + mesh.vertices()[tri[2]]) / 3.0;
    worst = std::max(worst, radius - c.norm());
  }
  return worst;
}

/// Axis-aligned box [lo, hi]^3 as 12 triangles, outward winding.
inline TriangleMesh box(const Point3& lo, const Point3& hi) {
  std::vector<Point3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  }
  std::vector<Triangle> f = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                             {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return TriangleMesh(std::move(v), std::move(f));
}

/// Triangle soup of `n` random triangles inside a 200 mm cube.
inline TriangleMesh random_soup(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> pos(-100.0, 100.0);
  std::uniform_real_distribution<double> size(2.0, 30.0);
  std::normal_distribution<double> gauss;
  std::vector<Point3> v;
  std::vector<Triangle> f;
  for (int i = 0; i < n; ++i) {
    const Point3 c(pos(rng), pos(rng), pos(rng));
    const double s = size(rng);
    for (int k = 0; k < 3; ++k) v.push_back(c + s * Vector3(gauss(rng), gauss(rng), gauss(rng)).normalized());
    const auto b = static_cast<std::uint32_t>(v.size() - 3);
    f.push_back({b, b + 1, b + 2});
  }
  return TriangleMesh(std::move(v), std::move(f));
}

inline Vector3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  return Vector3(gauss(rng), gauss(rng), gauss(rng)).normalized();
}

inline Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  return Rotation::from_quaternion(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
}

inline SimilarityTransform random_similarity(std::mt19937_64& rng, double scale_lo = 0.95, double scale_hi = 1.05,
                                             double translation = 200.0) {
  std::uniform_real_distribution<double> s(scale_lo, scale_hi);
  std::uniform_real_distribution<double> t(-translation, translation);
  const double scale = s(rng);
  const Rotation r = random_rotation(rng);
  const double tx = t(rng), ty = t(rng), tz = t(rng);
  return {scale, r, Vector3(tx, ty, tz)};
}

// --- brute-force oracles ---------------------------------------------------

/// Ray/triangle by plane intersection and same-side edge tests.
inline std::optional<double> oracle_ray_triangle(const Ray& ray, const Point3& a, const Point3& b, const Point3& c) {
  const Vector3 n = (b - a).cross(c - a);
  const double denom = n.dot(ray.direction);
  if (std::abs(denom) < 1e-14 * n.norm()) return std::nullopt;
  const double t = n.dot(a - ray.origin) / denom;
  if (!(t > 1e-9)) return std::nullopt;
  const Point3 p = ray.at(t);
  const double tol = -1e-12 * n.squaredNorm();
  if ((b - a).cross(p - a).dot(n) < tol) return std::nullopt;
  if ((c - b).cross(p - b).dot(n) < tol) return std::nullopt;
  if ((a - c).cross(p - c).dot(n) < tol) return std::nullopt;
  return t;
}

struct OracleHit {
  double t;
  std::size_t triangle;
};

inline std::optional<OracleHit> oracle_ray_mesh(const Ray& ray, const TriangleMesh& mesh) {
  std::optional<OracleHit> best;
  for (std::size_t i = 0; i < mesh.triangles().size(); ++i) {
    const auto t = oracle_ray_triangle(ray, mesh.vertex(i, 0), mesh.vertex(i, 1), mesh.vertex(i, 2));
    if (t && (!best || *t < best->t)) best = OracleHit{*t, i};
  }
  return best;
}

inline Point3 oracle_closest_on_segment(const Point3& p, const Point3& a, const Point3& b) {
  const Vector3 ab = b - a;
  const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return a + s * ab;
}

/// Closest point on a triangle: plane projection if it lands inside, else the
/// best of the three edges.
inline Point3 oracle_closest_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  const Vector3 n = (b - a).cross(c - a).normalized();
  const Point3 q = p - n.dot(p - a) * n;
  const bool inside = (b - a).cross(q - a).dot(n) >= 0.0 && (c - b).cross(q - b).dot(n) >= 0.0 &&
                      (a - c).cross(q - c).dot(n) >= 0.0;
  if (inside) return q;
  Point3 best = oracle_closest_on_segment(p, a, b);
  for (const Point3& cand : {oracle_closest_on_segment(p, b, c), oracle_closest_on_segment(p, c, a)}) {
    if ((cand - p).squaredNorm() < (best - p).squaredNorm()) best = cand;
  }
  return best;
}

inline double oracle_point_mesh_distance(const Point3& p, const TriangleMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.triangles().size(); ++i) {
    const Point3 q = oracle_closest_on_triangle(p, mesh.vertex(i, 0), mesh.vertex(i, 1), mesh.vertex(i, 2));
    best = std::min(best, (q - p).norm());
  }
  return best;
}

/// Explicit 3x3 product, written out by hand.
inline Point3 oracle_matvec(const double m[3][3], const Point3& p) {
  return {m[0][0] * p.x() + m[0][1] * p.y() + m[0][2] * p.z(), m[1][0] * p.x() + m[1][1] * p.y() + m[1][2] * p.z(),
          m[2][0] * p.x() + m[2][1] * p.y() + m[2][2] * p.z()};
}

inline LandmarkSet make_set(const std::vector<Point3>& pts, Space space) {
  LandmarkSet s(space);
  for (std::size_t i = 0; i < pts.size(); ++i) s.set(kLandmarkOrder[i], pts[i]);
  return s;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace vtest

namespace vtest {

/// Ray from outside the head aimed at the scenario's planned entry point.
inline Ray entry_ray(const LoadedScenario& sc) {
  const Point3 planned = sc.scene->model_to_world().apply(*sc.scenario.planned_entry_model);
  const Vector3 out = (planned - sc.scene->head_mesh().surface_centroid()).normalized();
  return Ray(planned + 200.0 * out, -out);
}

/// Marker pose that puts the catheter tip at `tip`, shaft along the planned line.
inline MarkerPose marker_for_tip(const LoadedScenario& sc, const Point3& entry_world, const Point3& tip) {
  const Vector3 axis = (tip - entry_world).normalized();
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vector3::UnitZ(), axis);
  const Rotation r = Rotation::from_quaternion(q.w(), q.x(), q.y(), q.z());
  return MarkerPose{r, tip - r.apply(sc.scenario.catheter.marker_to_tip_offset)};
}

/// Scripted clinical walkthrough: seven acquisitions, register, confirm, entry,
/// catheter tracking, one marker update.
inline std::vector<SessionEvent> walkthrough(const LoadedScenario& sc, std::uint64_t seed) {
  std::vector<SessionEvent> log;
  Rng rng(seed);
  const auto session = simulate_session(*sc.scene, sc.acquisition(), sc.scenario.noise, rng);
  for (auto id : kLandmarkOrder) {
    log.push_back(events::Acquire{session.world.at(id)});
    log.push_back(events::Next{});
  }
  log.push_back(events::Register{});
  log.push_back(events::Confirm{});
  const Ray ray = entry_ray(sc);
  log.push_back(events::PlaceEntry{ray});
  log.push_back(events::Next{});
  const Point3 entry = ray_mesh_intersect(ray, sc.scene->head_mesh())->point;
  const Point3 target = sc.scene->model_to_world().apply(sc.scenario.planned_target_model);
  log.push_back(events::MarkerUpdate{marker_for_tip(sc, entry, entry + 0.5 * (target - entry))});
  return log;
}

/// Random event with a plausible payload for the current state: picks near the
/// true landmark, entry rays aimed at the head, tips near the target.
class EventFuzzer {
 public:
  EventFuzzer(const LoadedScenario& sc, std::uint64_t seed)
      : scene_(*sc.scene),
        center_(sc.scene->head_mesh().surface_centroid()),
        target_(sc.scene->model_to_world().apply(sc.scenario.planned_target_model)),
        rng_(seed) {}

  SessionEvent next(const SessionState& s) {
    std::uniform_int_distribution<int> kind(0, 12);
    std::normal_distribution<double> jitter(0.0, 2.0);
    switch (kind(rng_)) {
      case 0:
      case 1:
      case 2: {
        const Point3 p = scene_.true_world_landmarks().at(s.current);
        return events::Acquire{p + Vector3(jitter(rng_), jitter(rng_), jitter(rng_))};
      }
      case 3: return events::Delete{};
      case 4:
      case 5: return events::Next{};
      case 6: return events::Back{};
      case 7: return events::Register{};
      case 8: return events::Confirm{};
      case 9: {
        const Point3 o = center_ + 300.0 * random_unit(rng_);
        return events::PlaceEntry{Ray(o, center_ + 40.0 * random_unit(rng_) - o)};
      }
      case 10: return events::DeleteEntry{};
      case 11: return events::MarkerUpdate{MarkerPose{random_rotation(rng_), target_ + 30.0 * random_unit(rng_)}};
      default: return (++count_ % 97 == 0) ? SessionEvent{events::Reset{}} : SessionEvent{events::Next{}};
    }
  }

 private:
  const VirtualScene& scene_;
  Point3 center_;
  Point3 target_;
  std::mt19937_64 rng_;
  long count_ = 0;
};

/// Outcome of a fuzz run; `violation` is empty when every state was sound.
struct FuzzOutcome {
  long accepted = 0;
  long rejected = 0;
  std::string violation;
};

/// Drives `n` fuzzed events through dispatch, checking the invariants after
/// each and that a rejected event leaves the state untouched.
inline FuzzOutcome fuzz_session(const LoadedScenario& sc, long n, std::uint64_t seed) {
  const auto ctx = sc.context();
  EventFuzzer fuzzer(sc, seed);
  SessionState s = new_session();
  FuzzOutcome out;
  for (long i = 0; i < n; ++i) {
    const SessionEvent e = fuzzer.next(s);
    const SessionState before = s;
    try {
      s = dispatch(ctx, s, e).state;
      ++out.accepted;
    } catch (const RejectedEvent&) {
      ++out.rejected;
      if (!(s == before)) {
        out.violation = "rejected event changed the state at event " + std::to_string(i);
        return out;
      }
    }
    if (const auto bad = invariant_violation(s)) {
      out.violation = *bad + " after event " + std::to_string(i) + " (" + std::string(event_name(e)) + ")";
      return out;
    }
  }
  return out;
}

}  // namespace vtest
