#include <doctest.h>

#include "hoi/metrics.hpp"
#include "support.hpp"

using namespace hoi;

namespace {

double brute_fscore(const PointSet& p, const PointSet& g, double th) {
  auto frac = [th](const PointSet& a, const PointSet& b) {
    int hit = 0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      double best = 1e300;
      for (Eigen::Index j = 0; j < b.cols(); ++j) best = std::min(best, (a.col(i) - b.col(j)).norm());
      hit += best < th;
    }
    return double(hit) / double(a.cols());
  };
  const double pr = frac(p, g), rc = frac(g, p);
  return pr + rc == 0 ? 0.0 : 200 * pr * rc / (pr + rc);
}

}  // namespace

TEST_CASE("fscore") {
  std::mt19937_64 rng(50);
  const PointSet gt = PointSet::Random(3, 100);
  CHECK(fscore(gt, gt, 0.005) == 100);
  CHECK(fscore(gt, gt, 1e-9) == 100);

  PointSet one(3, 1), far(3, 1);
  one << 0, 0, 0;
  far << 0.02, 0, 0;
  CHECK(fscore(far, one, 0.01) == 0);

  // Half of pred near gt, gt fully covered.
  PointSet g2(3, 2), p2(3, 4);
  g2 << 0, 1, 0, 0, 0, 0;
  p2 << 0, 1, 5, 6, 0, 0, 0, 0, 0, 0, 0, 0;
  CHECK(fscore(p2, g2, 0.01) == doctest::Approx(200.0 * 0.5 / 1.5).epsilon(1e-12));

  for (int n = 0; n < 50; ++n) {
    const PointSet a = PointSet::Random(3, 1 + static_cast<int>(rng() % 200));
    const PointSet b = PointSet::Random(3, 1 + static_cast<int>(rng() % 200));
    double last = -1;
    for (double th : {0.05, 0.1, 0.2, 0.5, 10.0}) {
      const double f = fscore(a, b, th);
      CHECK(f == doctest::Approx(brute_fscore(a, b, th)).epsilon(1e-14));
      CHECK(f >= last);
      last = f;
    }
    CHECK(last == 100);
    const Posed t = test::random_pose(rng);
    CHECK(fscore(t * a, t * b, 0.2) == doctest::Approx(fscore(a, b, 0.2)));
  }
  CHECK_THROWS_AS((void)fscore(PointSet(3, 0), gt, 0.01), Error);
}

TEST_CASE("hand_jitter") {
  std::vector<Vec3d> line, still(10, Vec3d(1, 2, 3)), accel;
  for (int t = 0; t < 50; ++t) line.push_back(Vec3d(0.1, 0.2, 0.3) + 0.01 * t * Vec3d(1, -2, 0.5));
  CHECK(hand_jitter(line, 30) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(hand_jitter(still, 30) == 0);
  const double fps = 30, a = 2.0;  // m/s^2
  for (int t = 0; t < 60; ++t) {
    const double s = t / fps;
    accel.push_back(Vec3d(0.5 * a * s * s, 0, 0));
  }
  CHECK(hand_jitter(accel, fps) == doctest::Approx(100 * a).epsilon(1e-9));

  std::mt19937_64 rng(51);
  std::vector<Vec3d> noisy;
  for (int t = 0; t < 40; ++t) noisy.push_back(test::random_vec(rng, 0.01));
  const Posed tr = test::random_pose(rng);
  std::vector<Vec3d> moved;
  for (const auto& p : noisy) moved.push_back(tr * p);
  CHECK(hand_jitter(moved, 30) == doctest::Approx(hand_jitter(noisy, 30)).epsilon(1e-9));
  CHECK_THROWS_AS((void)hand_jitter(std::vector<Vec3d>(2), 30), Error);
  CHECK_THROWS_AS((void)hand_jitter(line, 0), Error);
}

TEST_CASE("rel_pose_consistency") {
  std::mt19937_64 rng(52);
  const Posed rel = test::random_pose(rng, 0.1);
  std::vector<Posed> hand, obj;
  for (int t = 0; t < 30; ++t) {
    hand.push_back(test::random_pose(rng));
    obj.push_back(hand.back() * rel);
  }
  RelPoseStd s = rel_pose_consistency(hand, obj);
  CHECK(s.trans_cm < 1e-9);
  CHECK(s.rot_deg < 1e-6);

  // Alternating +-1 cm along hand x: population std 1 cm.
  for (int t = 0; t < 30; ++t) obj[static_cast<std::size_t>(t)] = hand[static_cast<std::size_t>(t)] * Posed::translation(Vec3d(t % 2 ? 0.01 : -0.01, 0, 0));
  s = rel_pose_consistency(hand, obj);
  CHECK(s.trans_cm == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.rot_deg < 1e-6);

  // Alternating +-2 degrees about z: chordal mean is the identity.
  for (int t = 0; t < 30; ++t) obj[static_cast<std::size_t>(t)] = hand[static_cast<std::size_t>(t)] * Posed::rotation(Rot3d::rot_z((t % 2 ? 2.0 : -2.0) * std::numbers::pi / 180));
  s = rel_pose_consistency(hand, obj);
  CHECK(s.rot_deg == doctest::Approx(2.0).epsilon(1e-9));

  // Invariant to a global rigid transform of both streams.
  const Posed g = test::random_pose(rng);
  std::vector<Posed> h2, o2;
  for (int t = 0; t < 30; ++t) {
    h2.push_back(g * hand[static_cast<std::size_t>(t)]);
    o2.push_back(g * obj[static_cast<std::size_t>(t)]);
  }
  CHECK(rel_pose_consistency(h2, o2).rot_deg == doctest::Approx(s.rot_deg).epsilon(1e-9));
  CHECK_THROWS_AS((void)rel_pose_consistency(hand, std::vector<Posed>(29)), Error);
  CHECK_THROWS_AS((void)rel_pose_consistency(std::vector<Posed>(1), std::vector<Posed>(1)), Error);
}

TEST_CASE("report formats") {
  MetricReport r{1.5, 90, 99, 12.25, 0.26, 1.9, 30};
  CHECK_NOTHROW(r.validate());
  CHECK(to_json(r).find("\"rel_rot_std_deg\": 1.9") != std::string::npos);
  CHECK(csv_row("ep", r) == "ep,1.5,90,99,12.25,0.26,1.9,30");
  CHECK(csv_header().rfind("episode,", 0) == 0);
  r.f5_pct = 101;
  CHECK_THROWS_AS(r.validate(), Error);

  MetricReport m{0, 0, 0, 3, 0, 0, 30};
  m.has_geometry = false;
  m.has_relative = false;
  CHECK(csv_row("ep", m) == "ep,,,,3,,,30");
  CHECK(to_json(m).find("\"chamfer_cm\": null") != std::string::npos);
}
