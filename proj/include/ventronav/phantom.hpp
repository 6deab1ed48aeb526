#pragma once

// Procedural head phantom: a superellipsoid skull-and-scalp surface with nose
// and ear protrusions, two curved ventricle bodies, seven facial landmarks, a
// Kocher's-point-like entry and a frontal-horn target. Every dimension is a
// plausibility choice for a synthetic patient; none are anatomical data.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "ventronav/scenario.hpp"

namespace ventronav {

struct PhantomParams {
  // Head: superellipsoid semi-axes (x right, y anterior, z superior), mm.
  double half_width = 90.0;
  double half_length = 110.0;
  double half_height = 95.0;
  double exponent = 2.4;
  // Nose ridge bump.
  double nose_height = 22.0;
  double nose_elevation_deg = -22.0;
  double nose_sigma_az_deg = 6.0;
  double nose_sigma_el_deg = 12.0;
  // Eye-socket dips and ear bumps.
  double eye_depth = 5.0;
  double eye_azimuth_deg = 22.0;
  double eye_elevation_deg = -8.0;
  double eye_sigma_deg = 9.0;
  double ear_height = 10.0;
  double ear_azimuth_deg = 92.0;
  double ear_elevation_deg = -18.0;
  double ear_sigma_deg = 8.0;
  // Surface tessellation, degrees per step.
  double resolution_deg = 1.5;
  // Landmark loci (azimuth from anterior toward the right, elevation), degrees.
  double tragus_azimuth_deg = 80.0;
  double tragus_elevation_deg = -20.0;
  double outer_canthus_azimuth_deg = 33.0;
  double inner_canthus_azimuth_deg = 11.0;
  double canthus_elevation_deg = -8.0;
  double nose_bridge_elevation_deg = -4.0;
  // Ventricle bodies: curved tubes either side of the midline.
  double ventricle_offset_x = 14.0;
  double ventricle_front_y = 32.0;
  double ventricle_back_y = -40.0;
  double ventricle_base_z = 28.0;
  double ventricle_arch_z = 10.0;
  double ventricle_half_width = 6.0;
  double ventricle_half_height = 9.0;
  int ventricle_stations = 40;
  int ventricle_ring = 24;
  // Entry: arc length behind the nasion along the midline, then lateral shift.
  double entry_arc_mm = 110.0;
  double entry_lateral_mm = 30.0;
  double target_station = 0.08;  ///< fraction along the right ventricle from its front
  // Ground-truth pose: random rotation up to this angle, translation up to this offset.
  double truth_max_rotation_deg = 30.0;
  double truth_max_translation_mm = 150.0;
};

inline Json phantom_params_to_json(const PhantomParams& p) {
  return Json{{"half_width", p.half_width},
              {"half_length", p.half_length},
              {"half_height", p.half_height},
              {"exponent", p.exponent},
              {"nose_height", p.nose_height},
              {"nose_elevation_deg", p.nose_elevation_deg},
              {"nose_sigma_az_deg", p.nose_sigma_az_deg},
              {"nose_sigma_el_deg", p.nose_sigma_el_deg},
              {"eye_depth", p.eye_depth},
              {"eye_azimuth_deg", p.eye_azimuth_deg},
              {"eye_elevation_deg", p.eye_elevation_deg},
              {"eye_sigma_deg", p.eye_sigma_deg},
              {"ear_height", p.ear_height},
              {"ear_azimuth_deg", p.ear_azimuth_deg},
              {"ear_elevation_deg", p.ear_elevation_deg},
              {"ear_sigma_deg", p.ear_sigma_deg},
              {"resolution_deg", p.resolution_deg},
              {"tragus_azimuth_deg", p.tragus_azimuth_deg},
              {"tragus_elevation_deg", p.tragus_elevation_deg},
              {"outer_canthus_azimuth_deg", p.outer_canthus_azimuth_deg},
              {"inner_canthus_azimuth_deg", p.inner_canthus_azimuth_deg},
              {"canthus_elevation_deg", p.canthus_elevation_deg},
              {"nose_bridge_elevation_deg", p.nose_bridge_elevation_deg},
              {"ventricle_offset_x", p.ventricle_offset_x},
              {"ventricle_front_y", p.ventricle_front_y},
              {"ventricle_back_y", p.ventricle_back_y},
              {"ventricle_base_z", p.ventricle_base_z},
              {"ventricle_arch_z", p.ventricle_arch_z},
              {"ventricle_half_width", p.ventricle_half_width},
              {"ventricle_half_height", p.ventricle_half_height},
              {"ventricle_stations", p.ventricle_stations},
              {"ventricle_ring", p.ventricle_ring},
              {"entry_arc_mm", p.entry_arc_mm},
              {"entry_lateral_mm", p.entry_lateral_mm},
              {"target_station", p.target_station},
              {"truth_max_rotation_deg", p.truth_max_rotation_deg},
              {"truth_max_translation_mm", p.truth_max_translation_mm}};
}

/// Missing keys keep their defaults, so a params file can override a few values.
inline PhantomParams phantom_params_from_json(const Json& j) {
  PhantomParams p;
  const Json defaults = phantom_params_to_json(p);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw Error(ErrorCode::ParseError, "unknown phantom parameter '" + key + "'");
  }
  Json merged = defaults;
  merged.update(j);
  auto get = [&](const char* k) { return merged.at(k).get<double>(); };
  p.half_width = get("half_width");
  p.half_length = get("half_length");
  p.half_height = get("half_height");
  p.exponent = get("exponent");
  p.nose_height = get("nose_height");
  p.nose_elevation_deg = get("nose_elevation_deg");
  p.nose_sigma_az_deg = get("nose_sigma_az_deg");
  p.nose_sigma_el_deg = get("nose_sigma_el_deg");
  p.eye_depth = get("eye_depth");
  p.eye_azimuth_deg = get("eye_azimuth_deg");
  p.eye_elevation_deg = get("eye_elevation_deg");
  p.eye_sigma_deg = get("eye_sigma_deg");
  p.ear_height = get("ear_height");
  p.ear_azimuth_deg = get("ear_azimuth_deg");
  p.ear_elevation_deg = get("ear_elevation_deg");
  p.ear_sigma_deg = get("ear_sigma_deg");
  p.resolution_deg = get("resolution_deg");
  p.tragus_azimuth_deg = get("tragus_azimuth_deg");
  p.tragus_elevation_deg = get("tragus_elevation_deg");
  p.outer_canthus_azimuth_deg = get("outer_canthus_azimuth_deg");
  p.inner_canthus_azimuth_deg = get("inner_canthus_azimuth_deg");
  p.canthus_elevation_deg = get("canthus_elevation_deg");
  p.nose_bridge_elevation_deg = get("nose_bridge_elevation_deg");
  p.ventricle_offset_x = get("ventricle_offset_x");
  p.ventricle_front_y = get("ventricle_front_y");
  p.ventricle_back_y = get("ventricle_back_y");
  p.ventricle_base_z = get("ventricle_base_z");
  p.ventricle_arch_z = get("ventricle_arch_z");
  p.ventricle_half_width = get("ventricle_half_width");
  p.ventricle_half_height = get("ventricle_half_height");
  p.ventricle_stations = merged.at("ventricle_stations").get<int>();
  p.ventricle_ring = merged.at("ventricle_ring").get<int>();
  p.entry_arc_mm = get("entry_arc_mm");
  p.entry_lateral_mm = get("entry_lateral_mm");
  p.target_station = get("target_station");
  p.truth_max_rotation_deg = get("truth_max_rotation_deg");
  p.truth_max_translation_mm = get("truth_max_translation_mm");
  if (!(p.resolution_deg > 0.1 && p.resolution_deg <= 10.0) || p.ventricle_stations < 2 || p.ventricle_ring < 3) {
    throw Error(ErrorCode::InvalidArgument, "phantom tessellation parameters out of range");
  }
  return p;
}

/// Shape of the sensor noise before calibration; only the ratios matter.
inline NoiseModel base_noise() {
  NoiseModel n;
  n.aim_sigma_px = 3.0;
  n.depth_sigma_mm = 1.0;
  n.pose_rot_sigma_deg = 0.15;
  n.pose_trans_sigma_mm = 0.8;
  return n;
}

/// base_noise() times the multiplier found by `ventronav calibrate` on the
/// shipped phantom (10000 trials, seed 1, target mean RMSE 2.54 mm).
inline constexpr double kCalibratedMultiplier = 1.427978515625;

/// Committed calibrated sensor-noise profile; see README "Noise calibration".
inline NoiseModel calibrated_noise() { return base_noise().scaled(kCalibratedMultiplier); }

inline NoiseProfiles default_noise_profiles() {
  NoiseProfiles p;
  p.profiles["zero"] = NoiseModel{};
  p.profiles["base"] = base_noise();
  p.profiles["calibrated"] = calibrated_noise();
  p.calibration = Json{{"procedure", "bisection on a common multiplier of the base profile, "
                                     "common random numbers across evaluations"},
                       {"command", "ventronav calibrate --scenario data/phantom/scenario.json --base-profile base "
                                   "--trials 10000 --seed 1"},
                       {"base_profile", "base"},
                       {"target_mean_rmse_mm", 2.54},
                       {"trials", 10000},
                       {"seed", 1},
                       {"multiplier", kCalibratedMultiplier}};
  return p;
}

namespace detail {

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Star-shaped head surface radius as a function of direction.
class HeadShape {
 public:
  explicit HeadShape(const PhantomParams& p) : p_(p) {}

  static Vector3 direction(double az_deg, double el_deg) {
    const double az = az_deg * kDeg, el = el_deg * kDeg;
    return {std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el)};
  }

  double radius(const Vector3& d) const {
    const double n = p_.exponent;
    const double base = std::pow(std::pow(std::abs(d.x()) / p_.half_width, n) +
                                     std::pow(std::abs(d.y()) / p_.half_length, n) +
                                     std::pow(std::abs(d.z()) / p_.half_height, n),
                                 -1.0 / n);
    const double az = std::atan2(d.x(), d.y()) / kDeg;
    const double el = std::asin(std::clamp(d.z(), -1.0, 1.0)) / kDeg;
    double r = base;
    r += p_.nose_height * bump(az, el, 0.0, p_.nose_elevation_deg, p_.nose_sigma_az_deg, p_.nose_sigma_el_deg);
    for (double side : {-1.0, 1.0}) {
      r -= p_.eye_depth * bump(az, el, side * p_.eye_azimuth_deg, p_.eye_elevation_deg, p_.eye_sigma_deg, p_.eye_sigma_deg);
      r += p_.ear_height * bump(az, el, side * p_.ear_azimuth_deg, p_.ear_elevation_deg, p_.ear_sigma_deg, p_.ear_sigma_deg);
    }
    return r;
  }

  Point3 surface(const Vector3& d) const { return radius(d) * d; }

 private:
  static double bump(double az, double el, double az0, double el0, double saz, double sel) {
    double daz = std::remainder(az - az0, 360.0);
    // Azimuth is compressed toward the poles.
    daz *= std::cos(el * kDeg);
    const double del = el - el0;
    return std::exp(-0.5 * (daz * daz / (saz * saz) + del * del / (sel * sel)));
  }

  PhantomParams p_;
};

inline TriangleMesh tessellate_head(const HeadShape& shape, double resolution_deg) {
  const int n_az = static_cast<int>(std::lround(360.0 / resolution_deg));
  const int n_el = static_cast<int>(std::lround(180.0 / resolution_deg));
  std::vector<Point3> vertices;
  std::vector<Triangle> tris;
  vertices.push_back(shape.surface(Vector3(0, 0, -1)));  // south pole
  for (int i = 1; i < n_el; ++i) {
    const double el = -90.0 + 180.0 * i / n_el;
    for (int k = 0; k < n_az; ++k) vertices.push_back(shape.surface(HeadShape::direction(360.0 * k / n_az, el)));
  }
  vertices.push_back(shape.surface(Vector3(0, 0, 1)));  // north pole
  const auto north = static_cast<std::uint32_t>(vertices.size() - 1);
  auto ring = [&](int i, int k) { return static_cast<std::uint32_t>(1 + (i - 1) * n_az + ((k % n_az) + n_az) % n_az); };
  // Counter-clockwise seen from outside.
  for (int k = 0; k < n_az; ++k) tris.push_back({0, ring(1, k), ring(1, k + 1)});
  for (int i = 1; i + 1 < n_el; ++i) {
    for (int k = 0; k < n_az; ++k) {
      tris.push_back({ring(i, k), ring(i + 1, k + 1), ring(i, k + 1)});
      tris.push_back({ring(i, k), ring(i + 1, k), ring(i + 1, k + 1)});
    }
  }
  for (int k = 0; k < n_az; ++k) tris.push_back({north, ring(n_el - 1, k + 1), ring(n_el - 1, k)});
  return TriangleMesh(std::move(vertices), std::move(tris));
}

/// Centerline of one ventricle body, s in [0, 1] from front to back.
inline Point3 ventricle_center(const PhantomParams& p, double side, double s) {
  return {side * p.ventricle_offset_x, p.ventricle_front_y + (p.ventricle_back_y - p.ventricle_front_y) * s,
          p.ventricle_base_z + p.ventricle_arch_z * std::sin(std::numbers::pi * s)};
}

/// Closed tube with an elliptical cross-section tapering at both ends.
inline void append_ventricle(const PhantomParams& p, double side, std::vector<Point3>& vertices,
                             std::vector<Triangle>& tris) {
  const int stations = p.ventricle_stations;
  const int ring = p.ventricle_ring;
  const auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.push_back(ventricle_center(p, side, 0.0));
  for (int i = 0; i < stations; ++i) {
    const double s = (i + 0.5) / stations;
    const Point3 c = ventricle_center(p, side, s);
    const double taper = std::sqrt(std::sin(std::numbers::pi * std::clamp(s, 0.0, 1.0)));
    for (int k = 0; k < ring; ++k) {
      const double a = 2.0 * std::numbers::pi * k / ring;
      vertices.emplace_back(c.x() + taper * p.ventricle_half_width * std::cos(a), c.y(),
                            c.z() + taper * p.ventricle_half_height * std::sin(a));
    }
  }
  vertices.push_back(ventricle_center(p, side, 1.0));
  const auto front = base;
  const auto back = static_cast<std::uint32_t>(vertices.size() - 1);
  auto idx = [&](int i, int k) { return static_cast<std::uint32_t>(base + 1 + i * ring + (k % ring)); };
  for (int k = 0; k < ring; ++k) tris.push_back({front, idx(0, k + 1), idx(0, k)});
  for (int i = 0; i + 1 < stations; ++i) {
    for (int k = 0; k < ring; ++k) {
      tris.push_back({idx(i, k), idx(i, k + 1), idx(i + 1, k + 1)});
      tris.push_back({idx(i, k), idx(i + 1, k + 1), idx(i + 1, k)});
    }
  }
  for (int k = 0; k < ring; ++k) tris.push_back({back, idx(stations - 1, k), idx(stations - 1, k + 1)});
}

inline SimilarityTransform random_truth_pose(const PhantomParams& p, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector3 axis;
  do {
    axis = Vector3(unit(rng), unit(rng), unit(rng));
  } while (axis.norm() < 1e-3 || axis.norm() > 1.0);
  const double angle = p.truth_max_rotation_deg * kDeg * std::abs(unit(rng));
  const Vector3 t(unit(rng), unit(rng), unit(rng));
  return SimilarityTransform::rigid(Rotation::from_axis_angle(axis, angle), p.truth_max_translation_mm * t);
}

}  // namespace detail

struct PhantomData {
  Scenario scenario;
  TriangleMesh head_model;
  TriangleMesh ventricles_model;
};

inline PhantomData generate_phantom(const PhantomParams& params, Rng& rng) {
  const detail::HeadShape shape(params);
  PhantomData out;
  out.head_model = detail::tessellate_head(shape, params.resolution_deg);

  std::vector<Point3> vv;
  std::vector<Triangle> vt;
  detail::append_ventricle(params, -1.0, vv, vt);
  detail::append_ventricle(params, 1.0, vv, vt);
  out.ventricles_model = TriangleMesh(std::move(vv), std::move(vt));

  Scenario& s = out.scenario;
  auto on_surface = [&](double az, double el) {
    return point_mesh_distance(shape.surface(detail::HeadShape::direction(az, el)), out.head_model).point;
  };
  s.model_landmarks.set(LandmarkId::RightTragus, on_surface(params.tragus_azimuth_deg, params.tragus_elevation_deg));
  s.model_landmarks.set(LandmarkId::RightOuterCanthus,
                        on_surface(params.outer_canthus_azimuth_deg, params.canthus_elevation_deg));
  s.model_landmarks.set(LandmarkId::RightInnerCanthus,
                        on_surface(params.inner_canthus_azimuth_deg, params.canthus_elevation_deg));
  s.model_landmarks.set(LandmarkId::NoseBridge, on_surface(0.0, params.nose_bridge_elevation_deg));
  s.model_landmarks.set(LandmarkId::LeftInnerCanthus,
                        on_surface(-params.inner_canthus_azimuth_deg, params.canthus_elevation_deg));
  s.model_landmarks.set(LandmarkId::LeftOuterCanthus,
                        on_surface(-params.outer_canthus_azimuth_deg, params.canthus_elevation_deg));
  s.model_landmarks.set(LandmarkId::LeftTragus, on_surface(-params.tragus_azimuth_deg, params.tragus_elevation_deg));

  // Walk the midline from the nasion over the vertex until the arc length is reached.
  double el = params.nose_bridge_elevation_deg;
  Point3 prev = shape.surface(detail::HeadShape::direction(0.0, el));
  double arc = 0.0;
  while (arc < params.entry_arc_mm && el < 179.0) {
    el += 0.05;
    const Point3 next = shape.surface(detail::HeadShape::direction(0.0, el));
    arc += (next - prev).norm();
    prev = next;
  }
  const Point3 lateral = prev + Vector3(params.entry_lateral_mm, 0.0, 0.0);
  const auto entry_hit = ray_mesh_intersect(Ray(Point3::Zero(), lateral), out.head_model);
  if (!entry_hit) throw Error(ErrorCode::NoSurfaceHit, "phantom entry ray missed the head");
  s.planned_entry_model = entry_hit->point;
  s.planned_target_model = detail::ventricle_center(params, 1.0, params.target_station);

  s.model_to_world = detail::random_truth_pose(params, rng);
  s.noise = calibrated_noise();
  s.noise_profile = "calibrated";
  s.description = "Synthetic procedural head phantom (dimensions are plausibility choices, not patient data)";
  s.metadata = Json{{"synthetic", true}, {"generator", "ventronav phantom"}, {"params", phantom_params_to_json(params)}};
  s.validate();
  return out;
}

/// Writes scenario.json, head.obj, ventricles.obj and noise_profiles.json into `dir`.
inline std::filesystem::path write_phantom(const PhantomData& data, const std::filesystem::path& dir,
                                           const NoiseProfiles& profiles = default_noise_profiles()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  save_mesh(data.head_model, dir / data.scenario.head_mesh);
  save_mesh(data.ventricles_model, dir / data.scenario.ventricle_mesh);
  save_json(profiles_to_json(profiles), dir / "noise_profiles.json");
  const auto path = dir / "scenario.json";
  save_scenario_file(data.scenario, path);
  return path;
}

}  // namespace ventronav
