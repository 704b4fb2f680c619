#include <gtest/gtest.h>

#include <algorithm>
#include <array>

#include "palf/geometry.hpp"
#include "palf/kitti_io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace palf;
using palf::testing::Rng;
using palf::testing::uniform;

namespace {

bool same_point_set(std::array<Vec3, 8> a, std::array<Vec3, 8> b, double tol) {
  for (const Vec3& p : a) {
    const bool found = std::any_of(b.begin(), b.end(),
                                   [&](const Vec3& q) { return (p - q).norm() < tol; });
    if (!found) return false;
  }
  return true;
}

Box3D random_box(Rng& rng) {
  return make_box(Vec3(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -1, 1)),
                  Vec3(uniform(rng, 0.5, 5), uniform(rng, 0.5, 3), uniform(rng, 0.5, 2.5)),
                  uniform(rng, -kPi, kPi));
}

}  // namespace

TEST(NormalizeYaw, WrapsIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(normalize_yaw(0.3), 0.3);
  EXPECT_DOUBLE_EQ(normalize_yaw(kPi), -kPi);
  EXPECT_NEAR(normalize_yaw(3 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_NEAR(normalize_yaw(-kPi - 0.2), kPi - 0.2, 1e-12);
}

TEST(BoxCorners, UnitCubeAtOrigin) {
  const auto c = box3d_corners(Box3D{});
  const std::array<Vec3, 8> expected = {
      Vec3(0.5, 0.5, -0.5),  Vec3(-0.5, 0.5, -0.5), Vec3(-0.5, -0.5, -0.5),
      Vec3(0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5),   Vec3(-0.5, 0.5, 0.5),
      Vec3(-0.5, -0.5, 0.5), Vec3(0.5, -0.5, 0.5)};
  for (int i = 0; i < 8; ++i) EXPECT_TRUE(c[i].isApprox(expected[i])) << i;
}

TEST(BoxCorners, QuarterTurnKeepsCubeCornerSet) {
  const Box3D turned = make_box(Vec3::Zero(), Vec3::Ones(), kPi / 2);
  EXPECT_TRUE(same_point_set(box3d_corners(turned), box3d_corners(Box3D{}), 1e-12));
}

TEST(BoxCorners, MatchesIndependentRotation) {
  // tests/oracles/gen_oracles.py
  const std::array<Vec3, 8> expected = {
      Vec3(11.615152771589873, 6.5463769024482854, -0.5),
      Vec3(7.7938068150874482, 5.364296075802927, -0.5),
      Vec3(8.384847228410127, 3.453623097551715, -0.5),
      Vec3(12.206193184912552, 4.635703924197073, -0.5),
      Vec3(11.615152771589873, 6.5463769024482854, 0.5),
      Vec3(7.7938068150874482, 5.364296075802927, 0.5),
      Vec3(8.384847228410127, 3.453623097551715, 0.5),
      Vec3(12.206193184912552, 4.635703924197073, 0.5)};
  const auto c = box3d_corners(make_box(Vec3(10, 5, 0), Vec3(4, 2, 1), 0.3));
  for (int i = 0; i < 8; ++i) EXPECT_LT((c[i] - expected[i]).norm(), 1e-12) << i;
}

TEST(PointsInBox, CenterAndFacesAreInside) {
  const Box3D box = make_box(Vec3(1, 2, 3), Vec3(4, 2, 2), 0.0);
  const std::vector<Vec3> pts = {Vec3(1, 2, 3), Vec3(3, 2, 3), Vec3(1, 3, 4),
                                 Vec3(3.0001, 2, 3)};
  EXPECT_EQ(points_in_box(pts, box), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(PointsInBox, AgreesWithInverseTransformOracle) {
  Rng rng(7);
  const Box3D box = make_box(Vec3(2, -1, 0.5), Vec3(4, 2, 1.5), 0.7);
  std::vector<Vec3> pts;
  for (int i = 0; i < 1000; ++i)
    pts.emplace_back(uniform(rng, -2, 6), uniform(rng, -5, 3), uniform(rng, -1, 2));
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (palf::testing::oracle_contains(box, pts[i])) expected.push_back(i);
  EXPECT_FALSE(expected.empty());
  EXPECT_EQ(points_in_box(pts, box), expected);
}

TEST(PointsInBox, RandomInstancesMatchOracleExactly) {
  Rng rng(11);
  for (int trial = 0; trial < 10000; ++trial) {
    const Box3D box = random_box(rng);
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i)
      pts.emplace_back(box.position + Vec3(uniform(rng, -3, 3), uniform(rng, -3, 3),
                                           uniform(rng, -1.5, 1.5)));
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (palf::testing::oracle_contains(box, pts[i])) expected.push_back(i);
    ASSERT_EQ(points_in_box(pts, box), expected) << "trial " << trial;
  }
}

TEST(ProjectPoints, OpticalAxisHitsPrincipalPoint) {
  const Calibration calib = palf::testing::identity_calibration(700, 600, 180);
  const std::vector<Vec3> pts = {Vec3(0, 0, 10), Vec3(0, 0, -1)};
  const auto proj = project_points(calib, pts);
  EXPECT_DOUBLE_EQ(proj.points[0].u, 600.0);
  EXPECT_DOUBLE_EQ(proj.points[0].v, 180.0);
  EXPECT_DOUBLE_EQ(proj.points[0].depth, 10.0);
  EXPECT_TRUE(proj.valid[0]);
  EXPECT_FALSE(proj.valid[1]);
}

TEST(ProjectPoints, OutsideImageIsInvalid) {
  const Calibration calib = palf::testing::identity_calibration(700, 600, 180, 1242, 375);
  const std::vector<Vec3> pts = {Vec3(-10, 0, 10), Vec3(0, 5, 10)};
  const auto proj = project_points(calib, pts);
  EXPECT_FALSE(proj.valid[0]);  // u = -100
  EXPECT_FALSE(proj.valid[1]);  // v = 530
}

TEST(ProjectPoints, RealKittiCalibrationMatchesMatrixChain) {
  const Calibration calib =
      load_calibration(std::string(PALF_TEST_DATA_DIR) + "/kitti_calib_000000.txt");
  // u, v, depth from tests/oracles/gen_oracles.py (numpy)
  const std::vector<Vec3> pts = {Vec3(10.0, 0.0, -1.0), Vec3(25.3, -4.2, 0.7),
                                 Vec3(7.5, 3.1, -1.6), Vec3(-5.0, 1.0, 0.0)};
  const double expected[4][3] = {
      {606.63665045136054, 245.22062957613088, 9.6775706299580335},
      {722.65656576374636, 153.64884929664967, 24.974762429152413},
      {303.26501623603593, 332.11408748679332, 7.1760454537684462},
      {730.63608492945104, 183.45700322969444, -5.3290202003129155}};
  const auto proj = project_points(calib, pts);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(proj.points[i].u, expected[i][0], 1e-6);
    EXPECT_NEAR(proj.points[i].v, expected[i][1], 1e-6);
    EXPECT_NEAR(proj.points[i].depth, expected[i][2], 1e-9);
    EXPECT_TRUE(proj.valid[i]);
  }
  EXPECT_NEAR(proj.points[3].depth, expected[3][2], 1e-9);
  EXPECT_FALSE(proj.valid[3]);
}

TEST(ProjectPoints, HomogeneousInCameraFrame) {
  const Calibration calib = palf::testing::identity_calibration();
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(uniform(rng, -5, 5), uniform(rng, -2, 2), uniform(rng, 2, 60));
    const double lambda = uniform(rng, 0.1, 10);
    const std::vector<Vec3> pts = {p, lambda * p};
    const auto proj = project_points(calib, pts);
    EXPECT_NEAR(proj.points[0].u, proj.points[1].u, 1e-9);
    EXPECT_NEAR(proj.points[0].v, proj.points[1].v, 1e-9);
  }
}

TEST(ProjectBox, BehindCameraIsOutOfView) {
  const Calibration calib = palf::testing::identity_calibration();
  EXPECT_FALSE(project_box3d_to_rect(calib, make_box(Vec3(0, 0, -10), Vec3(4, 2, 1.5), 0.2)));
}

TEST(ProjectBox, CenteredBoxSpansProjectedCorners) {
  const Calibration calib = palf::testing::identity_calibration(700, 600, 180);
  const Box3D box = make_box(Vec3(0, 0, 20), Vec3(4, 2, 1.5), 0.4);
  const auto rect = project_box3d_to_rect(calib, box);
  ASSERT_TRUE(rect);
  // corners projected by hand: u = f x / z + cx, v = f y / z + cy
  double umin = 1e9, umax = -1e9, vmin = 1e9, vmax = -1e9;
  for (const Vec3& c : box3d_corners(box)) {
    const double u = 700 * c.x() / c.z() + 600;
    const double v = 700 * c.y() / c.z() + 180;
    umin = std::min(umin, u), umax = std::max(umax, u);
    vmin = std::min(vmin, v), vmax = std::max(vmax, v);
  }
  EXPECT_NEAR(rect->xmin, umin, 1e-9);
  EXPECT_NEAR(rect->xmax, umax, 1e-9);
  EXPECT_NEAR(rect->ymin, vmin, 1e-9);
  EXPECT_NEAR(rect->ymax, vmax, 1e-9);
}

TEST(ProjectBox, StraddlingLeftEdgeIsClipped) {
  const Calibration calib = palf::testing::identity_calibration(700, 600, 180);
  // center projects to u = 700 * -17 / 20 + 600 = 5
  const auto rect = project_box3d_to_rect(calib, make_box(Vec3(-17, 0, 20), Vec3(4, 2, 1.5), 0));
  ASSERT_TRUE(rect);
  EXPECT_EQ(rect->xmin, 0.0);
  EXPECT_GT(rect->xmax, 5.0);
}

TEST(ProjectBox, ZeroWidthAfterClippingIsOutOfView) {
  const Calibration calib = palf::testing::identity_calibration(700, 600, 180);
  EXPECT_FALSE(project_box3d_to_rect(calib, make_box(Vec3(-40, 0, 20), Vec3(2, 2, 1.5), 0)));
}

TEST(ProjectBox, ClippedRectContainsClampedCorners) {
  const Calibration calib = palf::testing::kitti_like_calibration();
  Rng rng(5);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const Box3D box = make_box(Vec3(uniform(rng, -5, 40), uniform(rng, -25, 25), -0.8),
                               Vec3(4, 1.8, 1.6), uniform(rng, -kPi, kPi));
    const auto rect = project_box3d_to_rect(calib, box);
    if (!rect) continue;
    ++checked;
    for (const Vec3& c : box3d_corners(box)) {
      const Eigen::Vector3d h = project_homogeneous(calib, c);
      if (h.z() <= 0) continue;
      const double u = std::clamp(h.x() / h.z(), 0.0, 1242.0);
      const double v = std::clamp(h.y() / h.z(), 0.0, 375.0);
      ASSERT_TRUE(rect->contains(u, v));
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Iou2d, BasicCases) {
  const Box2D a{0, 0, 2, 2};
  EXPECT_DOUBLE_EQ(iou2d(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou2d(a, Box2D{5, 5, 6, 6}), 0.0);
  EXPECT_NEAR(iou2d(a, Box2D{1, 1, 3, 3}), 1.0 / 7.0, 1e-15);
  EXPECT_DOUBLE_EQ(iou2d(a, Box2D{2, 0, 4, 2}), 0.0);  // shared edge only
}

TEST(Iou2d, SymmetricAndBounded) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    auto rect = [&] {
      const double x = uniform(rng, 0, 100), y = uniform(rng, 0, 100);
      return Box2D{x, y, x + uniform(rng, 1, 50), y + uniform(rng, 1, 50)};
    };
    const Box2D a = rect(), b = rect();
    const double ab = iou2d(a, b);
    EXPECT_EQ(ab, iou2d(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Iou3d, IdenticalBoxesGiveOne) {
  const Box3D box = make_box(Vec3(3, 1, 0), Vec3(4, 2, 1.5), 0.9);
  EXPECT_NEAR(iou3d(box, box), 1.0, 1e-12);
}

TEST(Iou3d, AxisAlignedHalfOverlap) {
  const Box3D a = Box3D{};
  const Box3D b = make_box(Vec3(0.5, 0, 0), Vec3::Ones(), 0);
  EXPECT_NEAR(iou3d(a, b), 1.0 / 3.0, 1e-12);
}

TEST(Iou3d, DisjointBoxes) {
  EXPECT_EQ(iou3d(Box3D{}, make_box(Vec3(5, 0, 0), Vec3::Ones(), 0.3)), 0.0);
  EXPECT_EQ(iou3d(Box3D{}, make_box(Vec3(0, 0, 2), Vec3::Ones(), 0.0)), 0.0);
}

TEST(Iou3d, MatchesExactPolygonReference) {
  // shapely polygon intersection, tests/oracles/gen_oracles.py
  const Box3D a = make_box(Vec3(0, 0, 0), Vec3(4, 2, 1.5), 0.3);
  const Box3D b = make_box(Vec3(0.5, 0.3, 0.2), Vec3(3.5, 1.8, 1.6), 1.1);
  EXPECT_NEAR(iou3d(a, b), 0.38368620197899572, 1e-12);
  const Box3D c = make_box(Vec3(10, 5, -1), Vec3(4.2, 1.9, 1.6), -2.8);
  const Box3D d = make_box(Vec3(10.6, 5.4, -0.8), Vec3(3.9, 1.7, 1.5), -2.5);
  EXPECT_NEAR(iou3d(c, d), 0.44714612184720859, 1e-12);
}

TEST(Iou3d, MatchesMonteCarloVolume) {
  Rng rng(21);
  const Box3D a = make_box(Vec3(0, 0, 0), Vec3(4, 2, 1.5), 0.3);
  const Box3D b = make_box(Vec3(0.5, 0.3, 0.2), Vec3(3.5, 1.8, 1.6), 1.1);
  EXPECT_NEAR(iou3d(a, b), palf::testing::monte_carlo_iou3d(a, b, 1'000'000, rng), 0.01);
}

TEST(Iou3d, SymmetricAndRigidMotionInvariant) {
  Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const Box3D a = random_box(rng);
    Box3D b = random_box(rng);
    b.position.head<2>() = a.position.head<2>() + Vec2(uniform(rng, -2, 2), uniform(rng, -2, 2));
    const double ab = iou3d(a, b);
    EXPECT_NEAR(ab, iou3d(b, a), 1e-12);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);

    const double theta = uniform(rng, -kPi, kPi);
    const Vec3 shift(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -2, 2));
    const Eigen::Matrix2d rot = Eigen::Rotation2Dd(theta).toRotationMatrix();
    auto move = [&](Box3D box) {
      box.position.head<2>() = rot * box.position.head<2>();
      box.position += shift;
      box.yaw = normalize_yaw(box.yaw + theta);
      return box;
    };
    EXPECT_NEAR(iou3d(move(a), move(b)), ab, 1e-9);
  }
}

TEST(Iou3d, SquareSymmetricYawStillOne) {
  const Box3D a = make_box(Vec3(1, 1, 0), Vec3(2, 2, 1), 0.2);
  const Box3D b = make_box(Vec3(1, 1, 0), Vec3(2, 2, 1), 0.2 + kPi / 2);
  EXPECT_NEAR(iou3d(a, b), 1.0, 1e-9);
}
