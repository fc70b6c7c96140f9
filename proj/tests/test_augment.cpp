#include <doctest.h>

#include <algorithm>

#include "hoi/augment.hpp"
#include "support.hpp"

using namespace hoi;
using hoi::test::max_abs;

namespace {

GripperTrajectory from_commands(const std::vector<int>& closed, std::mt19937_64& rng) {
  GripperTrajectory g;
  for (int c : closed) g.frames.push_back({test::random_pose(rng), c ? GripperCommand::closed : GripperCommand::open, {}});
  return g;
}

// Run-length oracle written independently of segment_trajectory.
std::vector<Segment> rle(const std::vector<int>& c) {
  std::vector<Segment> out;
  for (int t = 0; t < static_cast<int>(c.size()); ++t) {
    if (t == 0 || c[static_cast<std::size_t>(t)] != c[static_cast<std::size_t>(t - 1)]) {
      out.push_back({t, t, c[static_cast<std::size_t>(t)] ? ContactState::hold : ContactState::open});
    } else {
      out.back().end = t;
    }
  }
  return out;
}

double brute_chamfer(const PointSet& a, const PointSet& b) {
  auto one = [](const PointSet& x, const PointSet& y) {
    double s = 0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      double best = 1e300;
      for (Eigen::Index j = 0; j < y.cols(); ++j) best = std::min(best, (x.col(i) - y.col(j)).norm());
      s += best;
    }
    return s / static_cast<double>(x.cols());
  };
  return 0.5 * (one(a, b) + one(b, a));
}

GripperTrajectory path_traj(const std::vector<Vec3d>& pts, GripperCommand c = GripperCommand::open) {
  GripperTrajectory g;
  for (const Vec3d& p : pts) g.frames.push_back({Posed::translation(p), c, {}});
  return g;
}

ObjectAsset asset(const std::string& id, const TriMesh& m) { return {id, m, Posed(), "thing", std::nullopt}; }

}  // namespace

TEST_CASE("segment_trajectory") {
  std::mt19937_64 rng(40);
  auto s = segment_trajectory(from_commands(std::vector<int>(12, 0), rng));
  REQUIRE(s.size() == 1);
  CHECK(s[0] == Segment{0, 11, ContactState::open});

  std::vector<int> c(5, 0);
  c.insert(c.end(), 10, 1);
  c.insert(c.end(), 5, 0);
  s = segment_trajectory(from_commands(c, rng));
  REQUIRE(s.size() == 3);
  CHECK(s[1] == Segment{5, 14, ContactState::hold});

  std::vector<int> alt;
  for (int t = 0; t < 17; ++t) alt.push_back(t % 2);
  CHECK(segment_trajectory(from_commands(alt, rng)).size() == 17);

  for (int n = 0; n < 100; ++n) {
    std::vector<int> r;
    const int len = 1 + static_cast<int>(rng() % 60);
    for (int t = 0; t < len; ++t) r.push_back(static_cast<int>(rng() % 4 == 0 ? 1 - (r.empty() ? 0 : r.back()) : (r.empty() ? 0 : r.back())));
    const auto got = segment_trajectory(from_commands(r, rng));
    CHECK(got == rle(r));
    int covered = 0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].start == covered);
      covered = got[k].end + 1;
    }
    CHECK(covered == len);
  }
}

TEST_CASE("transform_hold") {
  std::mt19937_64 rng(41);
  const GripperTrajectory g = from_commands(std::vector<int>(10, 1), rng);
  const Segment seg{0, 9, ContactState::hold};
  auto out = transform_hold(g, seg, Posed(), 0.3);
  for (int t = 0; t < 10; ++t) CHECK(test::pose_diff(out[static_cast<std::size_t>(t)].pose, g.frames[static_cast<std::size_t>(t)].pose) == 0);

  out = transform_hold(g, seg, Posed::translation(Vec3d(0.1, 0, 0)), 0.3);
  for (int t = 0; t < 10; ++t) {
    CHECK(max_abs(out[static_cast<std::size_t>(t)].pose.trans - g.frames[static_cast<std::size_t>(t)].pose.trans - Vec3d(0.1, 0, 0)) < 1e-15);
    CHECK(out[static_cast<std::size_t>(t)].command == GripperCommand::closed);
  }

  out = transform_hold(g, seg, Posed::rotation(Rot3d::rot_z(0.1)), 0.3);
  for (int t = 0; t + 1 < 10; ++t) {
    const auto& a = g.frames[static_cast<std::size_t>(t)].pose;
    const auto& b = g.frames[static_cast<std::size_t>(t + 1)].pose;
    const auto& a2 = out[static_cast<std::size_t>(t)].pose;
    const auto& b2 = out[static_cast<std::size_t>(t + 1)].pose;
    CHECK(test::pose_diff(a.inverse() * b, a2.inverse() * b2) < 1e-12);
  }
  CHECK_THROWS_AS((void)transform_hold(g, seg, Posed::rotation(Rot3d::rot_z(0.5)), 0.3), Error);
  CHECK_THROWS_AS((void)transform_hold(g, {0, 9, ContactState::open}, Posed(), 0.3), Error);
}

TEST_CASE("remap_open") {
  std::mt19937_64 rng(42);
  std::vector<Vec3d> curve;
  for (int t = 0; t < 30; ++t) curve.push_back(Vec3d(0.01 * t, 0.05 * std::sin(0.2 * t), 0.002 * t * t));
  GripperTrajectory g = path_traj(curve);
  for (auto& f : g.frames) f.pose.rot = test::random_rot(rng);
  const Segment seg{0, 29, ContactState::open};

  auto out = remap_open(g, seg, {curve.front(), curve.back()}, Rot3d());
  for (int t = 0; t < 30; ++t) CHECK(test::pose_diff(out[static_cast<std::size_t>(t)].pose, g.frames[static_cast<std::size_t>(t)].pose) < 1e-12);

  // Deviation from chord is preserved, computed here from the formula directly.
  const Vec3d ns(0.1, -0.2, 0.3), ne(-0.1, 0.4, 0.2);
  const Rot3d rd = Rot3d::rot_z(0.2);
  out = remap_open(g, seg, {ns, ne}, rd);
  std::vector<double> arc(30, 0.0);
  for (int t = 1; t < 30; ++t) arc[static_cast<std::size_t>(t)] = arc[static_cast<std::size_t>(t - 1)] + (curve[static_cast<std::size_t>(t)] - curve[static_cast<std::size_t>(t - 1)]).norm();
  for (int t = 0; t < 30; ++t) {
    const double a = arc[static_cast<std::size_t>(t)] / arc.back();
    const Vec3d resid = curve[static_cast<std::size_t>(t)] - (curve.front() + a * (curve.back() - curve.front()));
    const Vec3d expect = ns + a * (ne - ns) + resid;
    CHECK(max_abs(out[static_cast<std::size_t>(t)].pose.trans - expect) < 1e-12);
    CHECK(max_abs(out[static_cast<std::size_t>(t)].pose.rot.matrix() - (rd * g.frames[static_cast<std::size_t>(t)].pose.rot).matrix()) < 1e-15);
  }
  CHECK(out.front().pose.trans == ns);
  CHECK(out.back().pose.trans == ne);

  // Straight line maps onto the new chord.
  std::vector<Vec3d> line;
  for (int t = 0; t < 20; ++t) line.push_back(Vec3d(0.1, 0.2, 0.3) + (t * t / 361.0) * Vec3d(0.3, -0.1, 0.2));
  out = remap_open(path_traj(line), {0, 19, ContactState::open}, {ns, ne}, Rot3d());
  for (const auto& f : out) {
    const Vec3d d = f.pose.trans - ns;
    CHECK(d.cross((ne - ns).normalized()).norm() < 1e-12);
  }

  std::vector<Vec3d> loop = {Vec3d::Zero(), Vec3d(0.1, 0, 0), Vec3d::Zero()};
  CHECK_THROWS_WITH_AS((void)remap_open(path_traj(loop), {0, 2, ContactState::open}, {ns, ne}, Rot3d()),
                       "degenerate chord", Error);
  CHECK_THROWS_AS((void)remap_open(path_traj(loop), {0, 0, ContactState::open}, {ns, ne}, Rot3d()), Error);
}

TEST_CASE("mirror pose algebra") {
  const Posed p(Rot3d(), Vec3d(1, 2, 3));
  const Posed m = mirror_pose(p);
  CHECK(m.trans == Vec3d(-1, 2, 3));
  CHECK(max_abs(m.rot.matrix() - Rot3d::rot_y(std::numbers::pi).matrix()) < 1e-15);

  std::mt19937_64 rng(43);
  for (int n = 0; n < 1000; ++n) {
    const Posed q = test::random_pose(rng);
    const Posed mm = mirror_pose(mirror_pose(q));
    CHECK(test::pose_diff(mm, q) <= 1e-12);
    CHECK(std::abs(mirror_pose(q).rot.matrix().determinant() - 1) <= 1e-12);
  }
}

TEST_CASE("mirrored relative poses are conjugated by diag(1, 1, -1)") {
  // T'_rel = M T_rel M with M = Ry(pi) S: rotation M R M, translation M t.
  const Mat3d mm = Vec3d(1, 1, -1).asDiagonal();
  std::mt19937_64 rng(44);
  for (int n = 0; n < 200; ++n) {
    const Posed h = test::random_pose(rng), o = test::random_pose(rng);
    const Posed rel = h.inverse() * o;
    const Posed rel2 = mirror_pose(h).inverse() * mirror_pose(o);
    CHECK(max_abs(rel2.rot.matrix() - mm * rel.rot.matrix() * mm) < 1e-12);
    CHECK(max_abs(rel2.trans - mm * rel.trans) < 1e-12);
    // Distances and relative rotation angles survive.
    CHECK(rel2.trans.norm() == doctest::Approx(rel.trans.norm()).epsilon(1e-12));
    CHECK(std::abs(rel2.rot.angle() - rel.rot.angle()) < 1e-9);
  }
}

TEST_CASE("screw_component and mirror rejection") {
  std::vector<Posed> obj(31, Posed::translation(Vec3d(0.1, 0, 0)));
  const Segment seg{0, 30, ContactState::hold};
  CHECK(screw_component(obj, seg, Vec3d::UnitZ()) == 0);
  for (int t = 0; t <= 30; ++t) obj[static_cast<std::size_t>(t)].rot = Rot3d::rot_z(std::numbers::pi / 2 * t / 30);
  CHECK(screw_component(obj, seg, Vec3d::UnitZ()) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
  for (int t = 0; t <= 30; ++t) obj[static_cast<std::size_t>(t)].rot = Rot3d::rot_x(std::numbers::pi / 2 * t / 30);
  CHECK(std::abs(screw_component(obj, seg, Vec3d::UnitZ())) < 1e-12);
  CHECK_THROWS_AS((void)screw_component(obj, {3, 3, ContactState::hold}, Vec3d::UnitZ()), Error);

  std::vector<Posed> hand(31);
  const std::vector<Segment> segs = {seg};
  MirrorResult r = mirror_trajectory(hand, obj, segs, {}, Vec3d::UnitZ());
  CHECK(r.accepted);
  CHECK(r.hand.size() == 31);
  for (int t = 0; t <= 30; ++t) obj[static_cast<std::size_t>(t)].rot = Rot3d::rot_z(0.5 * t / 30);
  r = mirror_trajectory(hand, obj, segs, {}, Vec3d::UnitZ());
  CHECK(!r.accepted);
  CHECK(r.hand.empty());
  CHECK(!r.reason.empty());
  // Screw outside hold segments does not count.
  r = mirror_trajectory(hand, obj, std::vector<Segment>{{0, 30, ContactState::open}}, {}, Vec3d::UnitZ());
  CHECK(r.accepted);
  CHECK_THROWS_AS((void)mirror_trajectory(hand, obj, segs, {0.0}, Vec3d::UnitZ()), Error);

  GripperTrajectory g;
  g.handedness = Handedness::right;
  g.frames.push_back({Posed::translation(Vec3d(1, 0, 0)), GripperCommand::open, {}});
  const GripperTrajectory gm = mirror_gripper(g);
  CHECK(gm.handedness == Handedness::left);
  CHECK(gm.frames[0].pose.trans == Vec3d(-1, 0, 0));
}

TEST_CASE("chamfer distance") {
  PointSet a(3, 1), b(3, 1);
  a << 0, 0, 0;
  b << 1, 0, 0;
  CHECK(chamfer_distance(a, b) == 1.0);
  std::mt19937_64 rng(45);
  for (int n = 0; n < 50; ++n) {
    const PointSet x = PointSet::Random(3, 1 + static_cast<int>(rng() % 200));
    const PointSet y = PointSet::Random(3, 1 + static_cast<int>(rng() % 200));
    CHECK(chamfer_distance(x, y) == doctest::Approx(brute_chamfer(x, y)).epsilon(1e-14));
    CHECK(chamfer_distance(x, y) == chamfer_distance(y, x));
    CHECK(chamfer_distance(x, x) == 0);
  }
  const PointSet big = PointSet::Random(3, 100);
  const PointSet sub = big.leftCols(30);
  CHECK(chamfer_distance(sub, big) == doctest::Approx(brute_chamfer(sub, big)).epsilon(1e-14));
  CHECK_THROWS_AS((void)chamfer_distance(PointSet(3, 0), big), Error);
}

TEST_CASE("retrieval scoring and ranking") {
  SimilarityWeights w;
  w.surface_samples = 512;
  ObjectAsset src = asset("mug", make_cylinder(0.04, 0.05, 24));
  src.embedding = Eigen::Vector3d(1, 0, 0);
  RetrievalScore s = retrieval_score(src, src, w);
  CHECK(s.total == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.semantic_used);

  ObjectAsset ortho = src;
  ortho.embedding = Eigen::Vector3d(0, 1, 0);
  s = retrieval_score(src, ortho, w);
  CHECK(s.total == doctest::Approx(w.gamma).epsilon(1e-12));

  ObjectAsset bare = src;
  bare.embedding.reset();
  s = retrieval_score(src, bare, w);
  CHECK(!s.semantic_used);
  CHECK(!s.warnings.empty());

  // Exact duplicate strictly beats a jittered duplicate.
  std::mt19937_64 rng(46);
  std::normal_distribution<double> noise(0.0, 0.01);
  ObjectAsset jit = src;
  for (Eigen::Index i = 0; i < jit.mesh.vertices.size(); ++i) jit.mesh.vertices.data()[i] += noise(rng);
  CHECK(retrieval_score(src, src, w).total < retrieval_score(src, jit, w).total);

  // Uniform scale does not change the normalized geometry.
  ObjectAsset scaled = asset("mug2", src.mesh.scaled(3.0));
  scaled.embedding = src.embedding;
  CHECK(retrieval_score(src, scaled, w).total < 1e-12);

  const std::vector<ObjectAsset> lib = {asset("box", make_box(Vec3d(0.1, 0.05, 0.02))),
                                        asset("ball", make_icosphere(0.05, 2)), src,
                                        asset("can", make_cylinder(0.03, 0.1, 24))};
  auto ranked = rank_substitutes(src, lib, w, 10);
  REQUIRE(ranked.size() == 4);
  CHECK(ranked[0].id == "mug");
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].score.total == doctest::Approx(retrieval_score(src, lib[ranked[i].index], w).total).epsilon(1e-15));
    if (i > 0) CHECK(ranked[i - 1].score.total <= ranked[i].score.total);
  }
  CHECK(rank_substitutes(src, lib, w, 2).size() == 2);

  // Equal scores fall back to id order.
  const std::vector<ObjectAsset> twins = {asset("b", src.mesh), asset("a", src.mesh)};
  ranked = rank_substitutes(src, twins, w, 2);
  CHECK(ranked[0].id == "a");

  CHECK_THROWS_AS((void)retrieval_score(src, asset("flat", TriMesh(PointSet::Zero(3, 3), Triangles::Zero(3, 1))), w), Error);
  CHECK_THROWS_AS((SimilarityWeights{0, 0, 0}.validate()), Error);
}

TEST_CASE("bind_substitute") {
  const ObjectAsset src = asset("box", make_box(Vec3d(0.1, 0.05, 0.02)));
  std::mt19937_64 rng(47);
  std::vector<Posed> poses;
  for (int t = 0; t < 10; ++t) poses.push_back(test::random_pose(rng));

  Binding b = bind_substitute(poses, src, src);
  CHECK(b.scale == 1);
  CHECK(!b.pca_fallback);
  CHECK(max_abs(b.rotation.matrix() - Mat3d::Identity()) < 1e-9);
  CHECK(max_abs(b.translation) < 1e-12);
  for (int t = 0; t < 10; ++t) CHECK(test::pose_diff(b.object_poses[static_cast<std::size_t>(t)], poses[static_cast<std::size_t>(t)]) < 1e-9);

  const ObjectAsset big = asset("big", src.mesh.scaled(2.0));
  b = bind_substitute(poses, src, big);
  CHECK(b.scale == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(max_abs(b.bound_mesh.vertices - src.mesh.vertices) < 1e-15);

  // A rotated copy is rotated back onto the source axes.
  const Posed turn(Rot3d::rot_z(0.4), Vec3d(0.3, 0, 0));
  b = bind_substitute(poses, src, asset("turned", src.mesh.transformed(turn)));
  const TriMesh aligned = b.bound_mesh.transformed(b.substitute_to_source());
  CHECK(max_abs(aligned.aabb().min - src.mesh.aabb().min) < 1e-9);
  CHECK(max_abs(aligned.aabb().max - src.mesh.aabb().max) < 1e-9);

  b = bind_substitute(poses, src, asset("ball", make_icosphere(0.05, 2)));
  CHECK(b.pca_fallback);
  CHECK(!b.warnings.empty());

  const PrincipalAxes pa = principal_axes(src.mesh);
  CHECK(!pa.degenerate);
  CHECK(pa.variances[0] >= pa.variances[1]);
  CHECK(pa.variances[1] >= pa.variances[2]);
  CHECK(max_abs(pa.axes - Mat3d::Identity()) < 1e-9);
  CHECK(principal_axes(make_box(Vec3d::Constant(0.1))).degenerate);
}

TEST_CASE("augment_trajectory") {
  std::vector<Vec3d> pts;
  for (int t = 0; t < 30; ++t) pts.push_back(Vec3d(0.01 * t, 0.1 + 0.02 * std::sin(0.3 * t), 0.1));
  GripperTrajectory g = path_traj(pts);
  for (int t = 10; t < 20; ++t) g.frames[static_cast<std::size_t>(t)].command = GripperCommand::closed;

  AugmentSampler sampler;
  std::mt19937_64 rng(48);
  const Posed t_o = sample_object_transform(sampler, rng);
  CHECK(t_o.rot.angle() <= sampler.rotation_cap);
  CHECK(sampler.object_shift.contains(t_o.trans));

  std::mt19937_64 r1(5), r2(5);
  const AugmentedTrajectory a = augment_trajectory(g, t_o, sampler, r1);
  const AugmentedTrajectory b = augment_trajectory(g, t_o, sampler, r2);
  REQUIRE(a.trajectory.size() == 30);
  for (int t = 0; t < 30; ++t) {
    CHECK(test::pose_diff(a.trajectory.frames[static_cast<std::size_t>(t)].pose, b.trajectory.frames[static_cast<std::size_t>(t)].pose) == 0);
    CHECK(a.trajectory.frames[static_cast<std::size_t>(t)].command == g.frames[static_cast<std::size_t>(t)].command);
  }
  for (int t = 10; t < 20; ++t) {
    CHECK(test::pose_diff(a.trajectory.frames[static_cast<std::size_t>(t)].pose, t_o * g.frames[static_cast<std::size_t>(t)].pose) < 1e-15);
  }
  // Open segments meet the transformed hold at the shared boundary frames.
  REQUIRE(a.anchors.size() == 2);
  CHECK(max_abs(a.trajectory.frames[9].pose.trans - t_o * pts[9]) < 1e-12);
  CHECK(max_abs(a.trajectory.frames[20].pose.trans - t_o * pts[20]) < 1e-12);
  CHECK(sampler.reachable.contains(a.trajectory.frames[0].pose.trans));
  CHECK(sampler.reachable.contains(a.trajectory.frames[29].pose.trans));

  AugmentSampler keep = sampler;
  keep.resample_free_anchors = false;
  const AugmentedTrajectory c = augment_trajectory(g, Posed(), keep, r1);
  for (int t = 0; t < 30; ++t) CHECK(test::pose_diff(c.trajectory.frames[static_cast<std::size_t>(t)].pose, g.frames[static_cast<std::size_t>(t)].pose) < 1e-12);
}
