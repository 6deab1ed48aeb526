#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace ventronav;
using vtest::oracle_matvec;

namespace {

constexpr double kPi = std::numbers::pi;

CameraIntrinsics simple_intrinsics() {
  CameraIntrinsics c;
  c.fx = c.fy = 500.0;
  c.cx = c.cy = 0.0;
  return c;
}

}  // namespace

TEST(ApplyTransform, IdentityLeavesPointUnchanged) {
  EXPECT_EQ(apply_transform(SimilarityTransform::identity(), Point3(1, 2, 3)), Point3(1, 2, 3));
}

TEST(ApplyTransform, PureScale) {
  const SimilarityTransform t(2.0, Rotation::identity(), Vector3::Zero());
  EXPECT_EQ(apply_transform(t, Point3(1, 0, 0)), Point3(2, 0, 0));
}

TEST(ApplyTransform, QuarterTurnAboutZThenShift) {
  const SimilarityTransform t(1.0, Rotation::from_axis_angle(Vector3::UnitZ(), kPi / 2), Vector3(1, 0, 0));
  const double rz[3][3] = {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}};
  const Point3 expected = oracle_matvec(rz, Point3(1, 0, 0)) + Vector3(1, 0, 0);
  EXPECT_LT((expected - Point3(1, 1, 0)).norm(), 1e-15);
  EXPECT_LT((apply_transform(t, Point3(1, 0, 0)) - expected).norm(), 1e-12);
}

TEST(ApplyTransform, MatchesExplicitMatrixProduct) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto t = vtest::random_similarity(rng, 0.5, 2.0);
    const Matrix3 r = t.rotation().matrix();
    double m[3][3];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) m[a][b] = t.scale() * r(a, b);
    const Point3 p = 100.0 * vtest::random_unit(rng);
    EXPECT_LT((t.apply(p) - (oracle_matvec(m, p) + t.translation())).norm(), 1e-9);
  }
}

TEST(SimilarityTransform, InverseRoundTripOnBall) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> radius(0.0, 1000.0);
  for (int i = 0; i < 1000; ++i) {
    const auto t = vtest::random_similarity(rng, 0.5, 2.0, 500.0);
    const Point3 p = radius(rng) * vtest::random_unit(rng);
    EXPECT_LT((t.inverse().apply(t.apply(p)) - p).norm(), 1e-9);
    EXPECT_LT((t.compose(t.inverse()).apply(p) - p).norm(), 1e-9);
  }
}

TEST(SimilarityTransform, DistancesScaleBySFactor) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto t = vtest::random_similarity(rng, 0.5, 2.0);
    const Point3 a = 300.0 * vtest::random_unit(rng);
    const Point3 b = 50.0 * vtest::random_unit(rng);
    EXPECT_LT(vtest::rel_err((t.apply(a) - t.apply(b)).norm(), t.scale() * (a - b).norm()), 1e-9);
  }
}

TEST(SimilarityTransform, ComposeAppliesRightThenLeft) {
  std::mt19937_64 rng(5);
  const auto a = vtest::random_similarity(rng);
  const auto b = vtest::random_similarity(rng);
  const Point3 p(10, -20, 30);
  EXPECT_LT((a.compose(b).apply(p) - a.apply(b.apply(p))).norm(), 1e-9);
}

TEST(SimilarityTransform, RejectsNonPositiveScale) {
  EXPECT_THROW(SimilarityTransform(0.0, Rotation::identity(), Vector3::Zero()), Error);
  EXPECT_THROW(SimilarityTransform(-1.0, Rotation::identity(), Vector3::Zero()), Error);
  EXPECT_THROW(SimilarityTransform(std::nan(""), Rotation::identity(), Vector3::Zero()), Error);
}

TEST(Rotation, IsProperOrthonormal) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    const Matrix3 m = vtest::random_rotation(rng).matrix();
    EXPECT_LT((m.transpose() * m - Matrix3::Identity()).norm(), 1e-9);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-9);
  }
}

TEST(Rotation, RejectsReflectionMatrix) {
  Matrix3 m = Matrix3::Identity();
  m(0, 0) = -1.0;
  EXPECT_THROW(Rotation::from_matrix(m), Error);
}

TEST(Rotation, MatrixRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = vtest::random_rotation(rng);
    EXPECT_LT(Rotation::from_matrix(r.matrix()).angle_to(r), 1e-12);
  }
}

TEST(Project, PrincipalAxis) {
  const auto px = project(simple_intrinsics(), CameraPose{}, Point3(0, 0, 100));
  EXPECT_DOUBLE_EQ(px.u, 0.0);
  EXPECT_DOUBLE_EQ(px.v, 0.0);
  EXPECT_DOUBLE_EQ(px.depth, 100.0);
}

TEST(Project, OffAxisPinholeFormula) {
  const auto px = project(simple_intrinsics(), CameraPose{}, Point3(10, 0, 100));
  EXPECT_DOUBLE_EQ(px.u, 500.0 * 10.0 / 100.0);
  EXPECT_DOUBLE_EQ(px.v, 0.0);
  EXPECT_DOUBLE_EQ(px.depth, 100.0);
}

TEST(Project, BehindCameraThrows) {
  try {
    project(simple_intrinsics(), CameraPose{}, Point3(0, 0, -5));
    FAIL() << "expected BehindCamera";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindCamera);
  }
  EXPECT_THROW(project(simple_intrinsics(), CameraPose{}, Point3(0, 0, 0)), Error);
}

TEST(Unproject, PrincipalAxisAndOffAxis) {
  EXPECT_LT((unproject(simple_intrinsics(), CameraPose{}, 0, 0, 100) - Point3(0, 0, 100)).norm(), 1e-12);
  EXPECT_LT((unproject(simple_intrinsics(), CameraPose{}, 50, 0, 100) - Point3(10, 0, 100)).norm(), 1e-12);
}

TEST(Unproject, NonPositiveDepthThrows) {
  for (double d : {0.0, -1.0}) {
    try {
      unproject(simple_intrinsics(), CameraPose{}, 0, 0, d);
      FAIL() << "expected NonPositiveDepth";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
    }
  }
}

TEST(Unproject, RoundTripWithRandomPoses) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1920), v(0, 1440), d(10, 2000);
  const CameraIntrinsics intr;
  for (int i = 0; i < 10000; ++i) {
    const CameraPose pose{vtest::random_rotation(rng), 500.0 * vtest::random_unit(rng)};
    const double uu = u(rng), vv = v(rng), dd = d(rng);
    const auto px = project(intr, pose, unproject(intr, pose, uu, vv, dd));
    EXPECT_NEAR(px.u, uu, 1e-9);
    EXPECT_NEAR(px.v, vv, 1e-9);
    EXPECT_NEAR(px.depth, dd, 1e-9);
  }
}

TEST(CameraIntrinsics, ValidatesRanges) {
  CameraIntrinsics c;
  EXPECT_NO_THROW(c.validate());
  c.fx = 0;
  EXPECT_THROW(c.validate(), Error);
  c = CameraIntrinsics{};
  c.cx = c.width;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Ray, DirectionIsNormalized) {
  const Ray r(Point3::Zero(), Vector3(3, 4, 12));
  EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
  EXPECT_THROW(Ray(Point3::Zero(), Vector3::Zero()), Error);
}

TEST(PixelRay, PassesThroughUnprojectedPoint) {
  const CameraIntrinsics intr;
  const CameraPose pose{Rotation::from_axis_angle(Vector3(1, 2, 3).normalized(), 0.7), Vector3(5, 6, 7)};
  const Ray r = pixel_ray(intr, pose, 100.0, 900.0);
  const Point3 p = unproject(intr, pose, 100.0, 900.0, 250.0);
  const Vector3 rel = p - r.origin;
  EXPECT_LT((rel - rel.dot(r.direction) * r.direction).norm(), 1e-9);
}
