#include <doctest.h>

#include "hoi/canonical.hpp"
#include "support.hpp"

using namespace hoi;
using hoi::test::max_abs;

namespace {

CameraModel camera() { return {500, 400, 32, 24, 64, 48}; }

}  // namespace

TEST_CASE("backproject pinhole") {
  const CameraModel cam = camera();
  DepthImage depth = DepthImage::Zero(48, 64);
  MaskImage mask = MaskImage::Constant(48, 64, false);
  CHECK(backproject(depth, mask, cam).cols() == 0);

  depth(24, 32) = 2.0;
  mask(24, 32) = true;
  PointSet p = backproject(depth, mask, cam);
  REQUIRE(p.cols() == 1);
  CHECK(max_abs(p.col(0) - Vec3d(0, 0, 2)) < 1e-15);

  // u = cx + fx lies outside a 64-wide image, so scale the camera instead.
  CameraModel wide{10, 10, 2, 2, 16, 16};
  DepthImage d2 = DepthImage::Zero(16, 16);
  MaskImage m2 = MaskImage::Constant(16, 16, false);
  d2(2, 12) = 1.0;
  m2(2, 12) = true;
  d2(3, 3) = std::numeric_limits<double>::quiet_NaN();
  m2(3, 3) = true;
  p = backproject(d2, m2, wide);
  REQUIRE(p.cols() == 1);
  CHECK(max_abs(p.col(0) - Vec3d(1, 0, 1)) < 1e-15);

  CHECK_THROWS_AS((void)backproject(DepthImage::Zero(4, 4), mask, cam), Error);
  CHECK_THROWS_AS((CameraModel{0, 1, 0, 0, 4, 4}.validate()), Error);
  CHECK_THROWS_AS((CameraModel{1, 1, 4, 0, 4, 4}.validate()), Error);
}

TEST_CASE("recover_scale") {
  PointSet cube(3, 8);
  for (int i = 0; i < 8; ++i) cube.col(i) = Vec3d(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const Aabbd unit(Vec3d::Zero(), Vec3d::Ones());
  CHECK(recover_scale(2 * cube, unit) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(recover_scale(cube, unit) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS((void)recover_scale(cube.leftCols(1), unit), "degenerate observation", Error);
  CHECK_THROWS_AS((void)recover_scale(cube, Aabbd()), Error);

  std::mt19937_64 rng(7);
  PointSet pts = PointSet::Random(3, 50);
  for (int i = 0; i < 20; ++i) {
    const double k = test::uniform(rng, 0.1, 10);
    CHECK(recover_scale(k * pts, unit) == doctest::Approx(k * recover_scale(pts, unit)).epsilon(1e-12));
  }
}

TEST_CASE("build_canonical_frame examples") {
  BodyAnchors a;
  CanonicalTransform t = build_canonical_frame(a, Vec3d::Zero());
  CHECK(test::pose_diff(t.world_to_canonical, Posed()) < 1e-15);

  a.approach = Vec3d::UnitX();
  t = build_canonical_frame(a, Vec3d::Zero());
  CHECK(max_abs(t.world_to_canonical.rot * Vec3d::UnitX() - Vec3d::UnitY()) < 1e-12);
  const Mat3d m = t.world_to_canonical.rot.matrix();
  CHECK(max_abs(m * m.transpose() - Mat3d::Identity()) < 1e-9);
  CHECK(std::abs(m.determinant() - 1) < 1e-9);

  a = BodyAnchors{};
  t = build_canonical_frame(a, Vec3d(1, 2, 3), 4);
  CHECK(max_abs(t.world_to_canonical.trans - Vec3d(-1, -2, -3)) < 1e-15);
  CHECK(t.t0 == 4);

  a.approach = Vec3d(0, 1e-4, 1).normalized();
  CHECK_THROWS_WITH_AS((void)build_canonical_frame(a, Vec3d::Zero()), "degenerate frame", Error);
}

TEST_CASE("canonical frame properties") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    BodyAnchors a;
    a.up = test::random_vec(rng).normalized();
    a.approach = test::random_vec(rng).normalized();
    if (std::acos(std::clamp(std::abs(a.up.dot(a.approach)), 0.0, 1.0)) < 0.01) continue;
    const Vec3d obj = test::random_vec(rng, 2);
    const CanonicalTransform t = build_canonical_frame(a, obj);
    const Mat3d r = t.world_to_canonical.rot.matrix();
    CHECK(max_abs(r * r.transpose() - Mat3d::Identity()) < 1e-9);
    CHECK(std::abs(r.determinant() - 1) < 1e-9);
    // Rows are the canonical axes expressed in world coordinates.
    CHECK(max_abs(r.row(2).transpose() - a.up) < 1e-9);
    CHECK(r.row(1).dot(a.approach) > 0);
    CHECK(max_abs(t.world_to_canonical * obj) < 1e-12);
  }
}

TEST_CASE("lateral hint is reported, not applied") {
  BodyAnchors a;
  a.has_body = true;
  a.hip_left = Vec3d(-0.2, 0, 1);
  a.hip_right = Vec3d(0.2, 0, 1);
  a.shoulder_left = Vec3d(-0.2, 0, 1.5);
  a.shoulder_right = Vec3d(0.2, 0, 1.5);
  const CanonicalTransform t = build_canonical_frame(a, Vec3d::Zero());
  CHECK(test::pose_diff(t.world_to_canonical, Posed()) < 1e-15);
  CHECK(t.lateral_agreement != 0);
}

TEST_CASE("apply_canonical preserves relative poses") {
  std::mt19937_64 rng(9);
  const CanonicalTransform ident;
  std::vector<Posed> hand, obj;
  for (int i = 0; i < 50; ++i) {
    hand.push_back(test::random_pose(rng));
    obj.push_back(test::random_pose(rng));
  }
  auto same = apply_canonical(ident, hand);
  for (std::size_t i = 0; i < hand.size(); ++i) CHECK(test::pose_diff(same[i], hand[i]) == 0);

  CanonicalTransform shift;
  shift.world_to_canonical = Posed::translation(Vec3d(1, -2, 0.5));
  same = apply_canonical(shift, hand);
  for (std::size_t i = 0; i < hand.size(); ++i) {
    CHECK(max_abs(same[i].trans - hand[i].trans - Vec3d(1, -2, 0.5)) < 1e-12);
    CHECK(same[i].rot.matrix() == hand[i].rot.matrix());
  }

  for (int k = 0; k < 20; ++k) {
    CanonicalTransform t;
    t.world_to_canonical = test::random_pose(rng);
    const auto h2 = apply_canonical(t, hand), o2 = apply_canonical(t, obj);
    for (std::size_t i = 0; i < hand.size(); ++i) {
      CHECK(test::pose_diff(hand[i].inverse() * obj[i], h2[i].inverse() * o2[i]) < 1e-12);
    }
  }
}

TEST_CASE("approach and t0 defaults") {
  std::vector<Vec3d> wrist, obj;
  for (int t = 0; t < 40; ++t) {
    obj.push_back(Vec3d(0, 0.5, 0));
    wrist.push_back(Vec3d(0, 0.5 - 0.5 * (1 - t / 39.0) - 0.02, 0));
  }
  const Vec3d ap = default_approach(wrist, obj);
  CHECK(max_abs(ap - Vec3d::UnitY()) < 1e-12);
  const int t0 = default_t0(wrist, obj);
  CHECK((obj[static_cast<std::size_t>(t0)] - wrist[static_cast<std::size_t>(t0)]).norm() < 0.15);
  CHECK((obj[static_cast<std::size_t>(t0 - 1)] - wrist[static_cast<std::size_t>(t0 - 1)]).norm() >= 0.15);
  CHECK(default_t0(wrist, obj, 0.001) == 39);
  CHECK_THROWS_AS((void)default_approach({}, {}), Error);
}
