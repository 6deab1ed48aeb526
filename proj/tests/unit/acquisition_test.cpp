#include <gtest/gtest.h>

#include "support.hpp"

using namespace ventronav;

namespace {

const VirtualScene& scene() { return *vtest::phantom().scene; }

NoiseModel only_depth(double sigma) {
  NoiseModel n;
  n.depth_sigma_mm = sigma;
  return n;
}

}  // namespace

TEST(AimCamera, StandoffAlongApproachLookingBack) {
  const auto& lm = scene().true_world_landmarks().at(LandmarkId::NoseBridge);
  const auto pose = aim_camera(scene(), LandmarkId::NoseBridge, 300.0, Vector3::UnitZ());
  EXPECT_LT((pose.center() - (lm + 300.0 * Vector3::UnitZ())).norm(), 1e-9);
  EXPECT_LT((pose.viewing_axis() - Vector3(0, 0, -1)).norm(), 1e-12);
}

TEST(AimCamera, LandmarkProjectsToPrincipalPoint) {
  const CameraIntrinsics intr;
  for (auto id : kLandmarkOrder) {
    const auto pose = aim_camera(scene(), id, 300.0);
    const auto px = project(intr, pose, scene().true_world_landmarks().at(id));
    EXPECT_NEAR(px.u, intr.cx, 1e-6);
    EXPECT_NEAR(px.v, intr.cy, 1e-6);
    EXPECT_NEAR(px.depth, 300.0, 1e-9);
  }
}

TEST(AimCamera, DifferentApproachesAgreeOnLandmark) {
  const CameraIntrinsics intr;
  const auto& lm = scene().true_world_landmarks().at(LandmarkId::LeftOuterCanthus);
  const auto a = aim_camera(scene(), LandmarkId::LeftOuterCanthus, 300.0, Vector3(1, 0.2, 0.1));
  const auto b = aim_camera(scene(), LandmarkId::LeftOuterCanthus, 250.0, Vector3(-0.3, 1, 0.5));
  const Point3 pa = unproject(intr, a, intr.cx, intr.cy, 300.0);
  const Point3 pb = unproject(intr, b, intr.cx, intr.cy, 250.0);
  EXPECT_LT((pa - pb).norm(), 1e-9);
  EXPECT_LT((pa - lm).norm(), 1e-9);
}

TEST(AimCamera, RejectsBadArguments) {
  EXPECT_THROW(aim_camera(scene(), LandmarkId::NoseBridge, 0.0), Error);
  EXPECT_THROW(aim_camera(scene(), LandmarkId::NoseBridge, 300.0, Vector3::Zero()), Error);
  try {
    parse_landmark_id("Chin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLandmark);
  }
}

TEST(VirtualScene, WorldLandmarksFollowTruth) {
  for (auto id : kLandmarkOrder) {
    const Point3 expected = scene().model_to_world().apply(scene().model_landmarks().at(id));
    EXPECT_LT((scene().true_world_landmarks().at(id) - expected).norm(), 1e-9);
    EXPECT_LE(point_mesh_distance(scene().true_world_landmarks().at(id), scene().head_mesh()).distance, 0.5);
  }
}

TEST(VirtualScene, RejectsOffSurfaceLandmark) {
  const auto& sc = vtest::phantom();
  auto landmarks = sc.scenario.model_landmarks;
  landmarks.set(LandmarkId::NoseBridge, landmarks.at(LandmarkId::NoseBridge) + Vector3(0, 5, 0));
  EXPECT_THROW(VirtualScene(scene().head_mesh(), scene().ventricle_mesh(), scene().model_to_world(), landmarks), Error);
}

TEST(AcquireLandmark, ZeroNoiseHitsLandmark) {
  Rng rng(1);
  const CameraIntrinsics intr;
  for (auto id : kLandmarkOrder) {
    const auto pose = aim_camera(scene(), id, 300.0);
    const auto s = acquire_landmark(scene(), pose, intr, id, NoiseModel{}, rng);
    EXPECT_LE((s.point - scene().true_world_landmarks().at(id)).norm(), 0.5);
    EXPECT_LT((unproject(intr, s.pose, s.u, s.v, s.depth) - s.point).norm(), 1e-12);
  }
}

TEST(AcquireLandmark, DepthBiasMovesPointAlongViewingRay) {
  Rng rng(1);
  const CameraIntrinsics intr;
  const Vector3 frontal = scene().model_to_world().rotation().apply(Vector3::UnitY());
  const auto pose = aim_camera(scene(), LandmarkId::NoseBridge, 300.0, frontal);
  const auto clean = acquire_landmark(scene(), pose, intr, LandmarkId::NoseBridge, NoiseModel{}, rng);
  NoiseModel biased;
  biased.depth_bias_mm = 5.0;
  const auto s = acquire_landmark(scene(), pose, intr, LandmarkId::NoseBridge, biased, rng);
  EXPECT_LT((s.point - (clean.point + 5.0 * pose.viewing_axis())).norm(), 1e-9);
}

TEST(AcquireLandmark, AimJitterLateralScatter) {
  Rng rng(2);
  const CameraIntrinsics intr;
  NoiseModel n;
  n.aim_sigma_px = 2.0;
  const auto id = LandmarkId::NoseBridge;
  const auto pose = aim_camera(scene(), id, 300.0);
  const Point3 lm_cam = pose.to_camera(scene().true_world_landmarks().at(id));
  double sx = 0.0, sy = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const Point3 c = pose.to_camera(acquire_landmark(scene(), pose, intr, id, n, rng).point) - lm_cam;
    sx += c.x() * c.x();
    sy += c.y() * c.y();
  }
  const double expected = 2.0 * 300.0 / 1500.0;
  EXPECT_NEAR(std::sqrt(sx / draws), expected, 0.05 * expected);
  EXPECT_NEAR(std::sqrt(sy / draws), expected, 0.05 * expected);
}

TEST(AcquireLandmark, DoublingDepthSigmaDoublesDepthResidual) {
  const CameraIntrinsics intr;
  const auto id = LandmarkId::RightTragus;
  const auto pose = aim_camera(scene(), id, 300.0);
  auto rms_residual = [&](double sigma, std::uint64_t seed) {
    Rng rng(seed);
    double ss = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const auto s = acquire_landmark(scene(), pose, intr, id, only_depth(sigma), rng);
      ss += (s.depth - s.surface_depth) * (s.depth - s.surface_depth);
    }
    return std::sqrt(ss / draws);
  };
  const double one = rms_residual(0.8, 3);
  const double two = rms_residual(1.6, 4);
  EXPECT_NEAR(two / one, 2.0, 0.05 * 2.0);
}

TEST(AcquireLandmark, NotVisibleFromBehind) {
  Rng rng(5);
  const auto id = LandmarkId::NoseBridge;
  const auto pose = aim_camera(scene(), id, 400.0, -scene().approach_direction(id));
  try {
    acquire_landmark(scene(), pose, CameraIntrinsics{}, id, NoiseModel{}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotVisible);
  }
}

TEST(NoiseModel, ValidatesAndScales) {
  NoiseModel n;
  n.depth_sigma_mm = -1.0;
  EXPECT_THROW(n.validate(), Error);
  NoiseModel m = calibrated_noise();
  const auto d = m.scaled(2.0);
  EXPECT_DOUBLE_EQ(d.aim_sigma_px, 2.0 * m.aim_sigma_px);
  EXPECT_DOUBLE_EQ(d.pose_trans_sigma_mm, 2.0 * m.pose_trans_sigma_mm);
}

TEST(SimulateSession, ZeroNoiseRegistersWithinDiscretization) {
  Rng rng(6);
  const auto session = simulate_session(scene(), vtest::phantom().acquisition(), NoiseModel{}, rng);
  ASSERT_TRUE(session.world.complete());
  const auto reg = estimate_similarity(scene().model_landmarks(), session.world);
  EXPECT_LE(reg.rmse, 0.5);
  for (double s : session.spread) EXPECT_EQ(s, 0.0);
}

TEST(SimulateSession, DeterministicForSeed) {
  Rng a(77), b(77);
  const auto s1 = simulate_session(scene(), vtest::phantom().acquisition(), calibrated_noise(), a, 3);
  const auto s2 = simulate_session(scene(), vtest::phantom().acquisition(), calibrated_noise(), b, 3);
  EXPECT_EQ(s1.world, s2.world);
  EXPECT_EQ(s1.spread, s2.spread);
  ASSERT_EQ(s1.samples.size(), 21u);
}

TEST(SimulateSession, MorePicksLowerMeanRmse) {
  const auto settings = vtest::phantom().acquisition();
  double one = 0.0, five = 0.0;
  const int trials = 500;
  for (int i = 0; i < trials; ++i) {
    Rng r1(1000 + i), r5(5000 + i);
    one += estimate_similarity(scene().model_landmarks(), simulate_session(scene(), settings, calibrated_noise(), r1, 1).world).rmse;
    five += estimate_similarity(scene().model_landmarks(), simulate_session(scene(), settings, calibrated_noise(), r5, 5).world).rmse;
  }
  EXPECT_LT(five / trials, one / trials);
  EXPECT_LT(five / trials, 0.7 * one / trials);
}

TEST(SimulateSession, RejectsZeroPicks) {
  Rng rng(1);
  EXPECT_THROW(simulate_session(scene(), vtest::phantom().acquisition(), NoiseModel{}, rng, 0), Error);
}
