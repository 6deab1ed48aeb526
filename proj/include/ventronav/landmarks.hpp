#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ventronav/geometry.hpp"

namespace ventronav {

/// The seven facial fiducials, declared in acquisition order.
enum class LandmarkId : std::uint8_t {
  RightTragus,
  RightOuterCanthus,
  RightInnerCanthus,
  NoseBridge,
  LeftInnerCanthus,
  LeftOuterCanthus,
  LeftTragus,
};

inline constexpr std::size_t kLandmarkCount = 7;

inline constexpr std::array<LandmarkId, kLandmarkCount> kLandmarkOrder = {
    LandmarkId::RightTragus,      LandmarkId::RightOuterCanthus, LandmarkId::RightInnerCanthus,
    LandmarkId::NoseBridge,       LandmarkId::LeftInnerCanthus,  LandmarkId::LeftOuterCanthus,
    LandmarkId::LeftTragus};

constexpr std::size_t index_of(LandmarkId id) { return static_cast<std::size_t>(id); }

constexpr std::string_view to_string(LandmarkId id) {
  constexpr std::array<std::string_view, kLandmarkCount> names = {
      "RightTragus", "RightOuterCanthus", "RightInnerCanthus", "NoseBridge",
      "LeftInnerCanthus", "LeftOuterCanthus", "LeftTragus"};
  return names[index_of(id)];
}

/// Human-readable prompt text ("Right Tragus").
constexpr std::string_view display_name(LandmarkId id) {
  constexpr std::array<std::string_view, kLandmarkCount> names = {
      "Right Tragus", "Right Outer Canthus", "Right Inner Canthus", "Nose Bridge",
      "Left Inner Canthus", "Left Outer Canthus", "Left Tragus"};
  return names[index_of(id)];
}

inline LandmarkId parse_landmark_id(std::string_view name) {
  for (auto id : kLandmarkOrder) {
    if (to_string(id) == name) return id;
  }
  throw Error(ErrorCode::UnknownLandmark, "unknown landmark '" + std::string(name) + "'");
}

enum class Space { Model, World };

constexpr std::string_view to_string(Space s) { return s == Space::Model ? "model" : "world"; }

/// Partial map LandmarkId -> Point3, tagged with the space the points live in.
class LandmarkSet {
 public:
  explicit LandmarkSet(Space space = Space::Model) : space_(space) {}

  Space space() const { return space_; }

  void set(LandmarkId id, const Point3& p) {
    require_finite(p, "landmark");
    points_[index_of(id)] = p;
  }
  void erase(LandmarkId id) { points_[index_of(id)].reset(); }

  bool contains(LandmarkId id) const { return points_[index_of(id)].has_value(); }
  const std::optional<Point3>& find(LandmarkId id) const { return points_[index_of(id)]; }

  const Point3& at(LandmarkId id) const {
    const auto& p = points_[index_of(id)];
    if (!p) throw Error(ErrorCode::UnknownLandmark, std::string(to_string(id)) + " is not set");
    return *p;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& p : points_) n += p.has_value();
    return n;
  }
  bool complete() const { return size() == kLandmarkCount; }

  std::vector<LandmarkId> ids() const {
    std::vector<LandmarkId> out;
    for (auto id : kLandmarkOrder) {
      if (contains(id)) out.push_back(id);
    }
    return out;
  }

  /// Points of the present ids, in canonical order.
  std::vector<Point3> points() const {
    std::vector<Point3> out;
    for (const auto& p : points_) {
      if (p) out.push_back(*p);
    }
    return out;
  }

  LandmarkSet transformed(const SimilarityTransform& t, Space target) const {
    LandmarkSet out(target);
    for (auto id : kLandmarkOrder) {
      if (contains(id)) out.set(id, t.apply(at(id)));
    }
    return out;
  }

  friend bool operator==(const LandmarkSet& a, const LandmarkSet& b) {
    return a.space_ == b.space_ && a.points_ == b.points_;
  }

 private:
  Space space_;
  std::array<std::optional<Point3>, kLandmarkCount> points_{};
};

}  // namespace ventronav
