#pragma once

// Scenario files: everything needed to stand up a simulated patient. A
// scenario is a JSON document that references its meshes by path relative to
// the scenario file.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "ventronav/acquisition.hpp"
#include "ventronav/mesh_io.hpp"
#include "ventronav/serialization.hpp"
#include "ventronav/session.hpp"

namespace ventronav {

struct Scenario {
  std::string id = "phantom";
  std::string description;
  std::filesystem::path head_mesh = "head.obj";            ///< model space
  std::filesystem::path ventricle_mesh = "ventricles.obj";  ///< model space
  LandmarkSet model_landmarks{Space::Model};
  SimilarityTransform model_to_world;
  std::optional<Point3> planned_entry_model;
  Point3 planned_target_model = Point3::Zero();
  NoiseModel noise;
  std::string noise_profile = "calibrated";
  CatheterModel catheter;
  std::uint64_t seed = 1;
  CameraIntrinsics intrinsics;
  double standoff_mm = 300.0;
  ScaleMode scale_mode = ScaleMode::Estimated;
  ScaleBounds scale_bounds;
  Json metadata = Json::object();

  void validate() const {
    if (!model_landmarks.complete()) throw Error(ErrorCode::IncompleteCorrespondence, "scenario needs all seven landmarks");
    noise.validate();
    catheter.validate();
    intrinsics.validate();
    scale_bounds.validate();
    if (!(standoff_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "standoff must be positive");
  }
};

inline Json scenario_to_json(const Scenario& s) {
  return Json{{"schema_version", kSchemaVersion},
              {"id", s.id},
              {"description", s.description},
              {"head_mesh", s.head_mesh.generic_string()},
              {"ventricle_mesh", s.ventricle_mesh.generic_string()},
              {"model_landmarks", landmarks_to_json(s.model_landmarks)},
              {"model_to_world", transform_to_json(s.model_to_world)},
              {"planned_entry_model", s.planned_entry_model ? vec_to_json(*s.planned_entry_model) : Json(nullptr)},
              {"planned_target_model", vec_to_json(s.planned_target_model)},
              {"noise_profile", s.noise_profile},
              {"noise", noise_to_json(s.noise)},
              {"catheter_offset_mm", vec_to_json(s.catheter.marker_to_tip_offset)},
              {"seed", s.seed},
              {"intrinsics", intrinsics_to_json(s.intrinsics)},
              {"standoff_mm", s.standoff_mm},
              {"scale_mode", std::string(to_string(s.scale_mode))},
              {"scale_bounds", Json::array({s.scale_bounds.lo, s.scale_bounds.hi})},
              {"metadata", s.metadata}};
}

inline Scenario scenario_from_json(const Json& j) {
  const int version = detail::json_get<int>(j, "schema_version");
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::ParseError, "unsupported scenario schema_version " + std::to_string(version));
  }
  Scenario s;
  s.id = detail::json_get<std::string>(j, "id");
  s.description = j.value("description", std::string());
  s.head_mesh = detail::json_get<std::string>(j, "head_mesh");
  s.ventricle_mesh = detail::json_get<std::string>(j, "ventricle_mesh");
  s.model_landmarks = landmarks_from_json(detail::json_get<Json>(j, "model_landmarks"));
  if (s.model_landmarks.space() != Space::Model) throw Error(ErrorCode::ParseError, "scenario landmarks must be model space");
  s.model_to_world = transform_from_json(detail::json_get<Json>(j, "model_to_world"));
  if (j.contains("planned_entry_model") && !j.at("planned_entry_model").is_null()) {
    s.planned_entry_model = vec_from_json(j.at("planned_entry_model"));
  }
  s.planned_target_model = vec_from_json(detail::json_get<Json>(j, "planned_target_model"));
  s.noise_profile = j.value("noise_profile", std::string("calibrated"));
  s.noise = noise_from_json(detail::json_get<Json>(j, "noise"));
  s.catheter.marker_to_tip_offset = vec_from_json(detail::json_get<Json>(j, "catheter_offset_mm"));
  s.seed = detail::json_get<std::uint64_t>(j, "seed");
  s.intrinsics = intrinsics_from_json(detail::json_get<Json>(j, "intrinsics"));
  s.standoff_mm = detail::json_get<double>(j, "standoff_mm");
  s.scale_mode = parse_scale_mode(detail::json_get<std::string>(j, "scale_mode"));
  const auto bounds = detail::json_get<Json>(j, "scale_bounds");
  if (!bounds.is_array() || bounds.size() != 2) throw Error(ErrorCode::ParseError, "scale_bounds must be [lo, hi]");
  s.scale_bounds = {bounds[0].get<double>(), bounds[1].get<double>()};
  s.metadata = j.value("metadata", Json::object());
  s.validate();
  return s;
}

inline Json parse_json_text(const std::string& text, const std::string& name) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.byte, name + ": " + e.what());
  }
}

inline Json load_json(const std::filesystem::path& path) {
  return parse_json_text(detail::read_file(path), path.string());
}

/// Pretty JSON with a trailing newline; stable for identical input.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline void save_json(const Json& j, const std::filesystem::path& path) { detail::write_file(path, dump_json(j)); }

inline Scenario load_scenario_file(const std::filesystem::path& path) {
  try {
    return scenario_from_json(load_json(path));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::UnknownLandmark) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    throw;
  }
}

inline void save_scenario_file(const Scenario& s, const std::filesystem::path& path) {
  save_json(scenario_to_json(s), path);
}

inline LandmarkSet load_landmarks_file(const std::filesystem::path& path) {
  return landmarks_from_json(load_json(path));
}

inline void save_landmarks_file(const LandmarkSet& set, const std::filesystem::path& path) {
  save_json(landmarks_to_json(set), path);
}

// --- noise profiles -------------------------------------------------------

struct NoiseProfiles {
  std::map<std::string, NoiseModel> profiles;
  Json calibration = Json::object();  ///< how the calibrated profile was obtained
};

inline Json profiles_to_json(const NoiseProfiles& p) {
  Json profiles = Json::object();
  for (const auto& [name, model] : p.profiles) profiles[name] = noise_to_json(model);
  return Json{{"schema_version", kSchemaVersion}, {"profiles", profiles}, {"calibration", p.calibration}};
}

inline NoiseProfiles profiles_from_json(const Json& j) {
  NoiseProfiles p;
  const auto profiles = detail::json_get<Json>(j, "profiles");
  for (const auto& [name, value] : profiles.items()) p.profiles[name] = noise_from_json(value);
  p.calibration = j.value("calibration", Json::object());
  return p;
}

inline NoiseModel find_profile(const NoiseProfiles& p, const std::string& name) {
  const auto it = p.profiles.find(name);
  if (it == p.profiles.end()) throw Error(ErrorCode::InvalidArgument, "unknown noise profile '" + name + "'");
  return it->second;
}

// --- loaded scenario ------------------------------------------------------

/// A scenario with its meshes loaded and the simulated scene assembled.
struct LoadedScenario {
  Scenario scenario;
  std::filesystem::path directory;
  TriangleMesh head_model;
  std::shared_ptr<const VirtualScene> scene;

  SessionContext context() const {
    SessionContext ctx;
    ctx.scene = scene;
    ctx.planned_entry_model = scenario.planned_entry_model;
    ctx.planned_target_model = scenario.planned_target_model;
    ctx.catheter = scenario.catheter;
    ctx.scale_mode = scenario.scale_mode;
    ctx.scale_bounds = scenario.scale_bounds;
    return ctx;
  }

  AcquisitionSettings acquisition() const { return {scenario.intrinsics, scenario.standoff_mm}; }

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : directory / p; }
};

inline LoadedScenario assemble_scenario(Scenario s, TriangleMesh head_model, TriangleMesh ventricles_model,
                                        std::filesystem::path directory = {}) {
  LoadedScenario out;
  out.directory = std::move(directory);
  out.head_model = std::move(head_model);
  out.scene = std::make_shared<const VirtualScene>(out.head_model.transformed(s.model_to_world),
                                                   std::move(ventricles_model), s.model_to_world, s.model_landmarks);
  out.scenario = std::move(s);
  return out;
}

inline LoadedScenario load_scenario(const std::filesystem::path& path) {
  Scenario s = load_scenario_file(path);
  const auto dir = path.parent_path();
  auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : dir / p; };
  if (!std::filesystem::exists(resolve(s.head_mesh)) || !std::filesystem::exists(resolve(s.ventricle_mesh))) {
    throw Error(ErrorCode::IoError, "scenario " + path.string() + " references a missing mesh file");
  }
  TriangleMesh head = load_mesh(resolve(s.head_mesh));
  TriangleMesh ventricles = load_mesh(resolve(s.ventricle_mesh));
  return assemble_scenario(std::move(s), std::move(head), std::move(ventricles), dir);
}

}  // namespace ventronav
