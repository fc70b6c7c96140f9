// Writes the synthetic fixture: two clips whose gripper poses come from the
// forward kinematics of a smooth joint path, the box mesh, gesture
// exemplars, an asset library and a pipeline config.
//
//   make_fixture [output-dir]

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>

#include "hoi/io.hpp"
#include "hoi/kinematics.hpp"

namespace {

using namespace hoi;

constexpr int kFrames = 90;
constexpr int kGrasp = 30;
constexpr int kRelease = 65;
constexpr double kFps = 30;
constexpr double kPalmToObject = 0.045;  // m along the gripper z axis
constexpr double kCurl = 0.3;

// Right hand in its own frame: palm in the xy plane, fingers along +y,
// curling toward +z.
std::array<Vec3d, kNumKeypoints> local_hand(double curl, bool pinch = false) {
  std::array<Vec3d, kNumKeypoints> k{};
  k[0] = Vec3d(0, 0, 0);
  k[1] = Vec3d(-0.025, 0.02, 0.005);
  k[2] = Vec3d(-0.045, 0.04, 0.01);
  k[3] = Vec3d(-0.055, 0.065, 0.015);
  k[4] = Vec3d(-0.06, 0.085, 0.02);
  const double xs[4] = {-0.03, -0.01, 0.01, 0.03};
  for (int f = 0; f < 4; ++f) {
    const std::size_t base = 5 + 4 * static_cast<std::size_t>(f);
    k[base] = Vec3d(xs[f], 0.085, 0);
    const double c = pinch && f > 0 ? 2.6 : curl;
    double ang = 0;
    for (std::size_t j = 1; j < 4; ++j) {
      ang += c * 0.5;
      k[base + j] = k[base + j - 1] + Vec3d(0, 0.028 * std::cos(ang), 0.028 * std::sin(ang));
    }
  }
  if (pinch) k[4] = k[8] + Vec3d(-0.012, -0.004, 0.0);
  return k;
}

Json joints_json(const std::array<Vec3d, kNumKeypoints>& k) {
  Json a = Json::array();
  for (const Vec3d& p : k) a.push_back(vec_to_json(p));
  return a;
}

// Piecewise-linear joint path through four waypoints.
std::vector<JointConfig> joint_path(const JointConfig& q0, double wrist_turn) {
  JointConfig d1(6), d2(6), d3(6);
  d1 << 0.25, 0.15, -0.1, -0.05, 0, 0;
  // shoulder_lift, elbow and wrist_1 are parallel; their sum keeps the
  // orientation, so the hold is a pure translation plus the pan and turn.
  d2 << 0.3, -0.5, 0.3, 0.2, 0, wrist_turn;
  d3 << 0.1, 0.15, -0.1, -0.05, 0, 0;
  const JointConfig qg = q0 + d1, ql = qg + d2, qr = ql + d3;
  std::vector<JointConfig> q;
  for (int t = 0; t < kFrames; ++t) {
    if (t <= kGrasp) {
      q.push_back(q0 + (qg - q0) * (static_cast<double>(t) / kGrasp));
    } else if (t <= kRelease) {
      q.push_back(qg + (ql - qg) * (static_cast<double>(t - kGrasp) / (kRelease - kGrasp)));
    } else {
      q.push_back(ql + (qr - ql) * (static_cast<double>(t - kRelease) / (kFrames - 1 - kRelease)));
    }
  }
  return q;
}

std::string jsonl(const std::vector<Json>& lines) {
  std::string s;
  for (const Json& j : lines) s += j.dump() + "\n";
  return s;
}

struct ClipSpec {
  std::string id;
  double wrist_turn;
  bool anchors;
};

}  // namespace

int main(int argc, char** argv) {
  try {
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data/fixture");
    fs::create_directories(dir / "meshes");
    fs::create_directories(dir / "library");

    const KinematicChain chain = load_chain((dir / "arm6.urdf").string(), {"world", "tool0", true});
    JointConfig q0(6);
    q0 << 0.1, -1.2, 1.5, -1.9, -1.5, 0.2;

    // Gripper frame of the local hand under the palm-plane construction.
    constexpr int kSign = -1;
    const auto hand = local_hand(kCurl);
    const Posed g0 = gripper_pose_wholehand(hand[0], hand[5], hand[13], 0.0, kSign);

    // Object frame: offset along the palm normal, z aligned with the last
    // joint axis (expressed in the end-effector frame).
    const double h = 1e-6;
    JointConfig qh = q0;
    qh[5] += h;
    const Vec3d turn_axis = (fk(chain, q0).inverse() * fk(chain, qh)).rot.log().normalized();
    const Rot3d r_rel = Rot3d::project(
        Eigen::Quaterniond::FromTwoVectors(Vec3d::UnitZ(), turn_axis).toRotationMatrix());
    const Posed t_rel(r_rel, Vec3d(0, 0, kPalmToObject));

    // Robot base chosen so the object rests at the canonical origin.
    const std::vector<JointConfig> nominal = joint_path(q0, 0.0);
    const Posed base = Posed::translation(-(fk(chain, nominal[kGrasp]) * t_rel).trans);

    // Free anchors of augmented open segments are drawn near the demonstrated
    // start and end.
    Aabbd reach;
    reach.min = reach.max = (base * fk(chain, nominal.front())).trans;
    for (const JointConfig& q : {nominal.front(), nominal.back()}) {
      const Vec3d p = (base * fk(chain, q)).trans;
      reach.min = reach.min.cwiseMin(p);
      reach.max = reach.max.cwiseMax(p);
    }
    reach.min -= Vec3d::Constant(0.03);
    reach.max += Vec3d::Constant(0.03);

    const Posed cam_to_world(Rot3d::from_rpy(-2.0, 0.1, 0.4), Vec3d(0.3, -0.8, 0.9));
    const Posed world_to_cam = cam_to_world.inverse();
    const TriMesh box = make_box(Vec3d::Constant(0.025));
    write_text(dir / "meshes" / "box.obj", to_obj(box));

    for (const ClipSpec& spec : {ClipSpec{"pick_box", 0.0, true}, ClipSpec{"screw_box", 1.2, false}}) {
      fs::create_directories(dir / spec.id);
      const auto q = joint_path(q0, spec.wrist_turn);
      std::vector<Json> hand_lines, object_lines, kp_lines;
      for (int t = 0; t < kFrames; ++t) {
        const Posed t_g = base * fk(chain, q[static_cast<std::size_t>(t)]);
        const int held = std::clamp(t, kGrasp, kRelease);
        const Posed t_o = base * fk(chain, q[static_cast<std::size_t>(held)]) * t_rel;
        const Posed place = world_to_cam * t_g * g0.inverse();

        std::array<Vec3d, kNumKeypoints> k;
        for (int i = 0; i < kNumKeypoints; ++i) k[static_cast<std::size_t>(i)] = place * hand[static_cast<std::size_t>(i)];
        hand_lines.push_back(Json{{"schema_version", kSchemaVersion}, {"joints", joints_json(k)}, {"handedness", "right"}});

        const Posed o_cam = world_to_cam * t_o;
        Json obj = pose_to_json(o_cam);
        object_lines.push_back(Json{{"schema_version", kSchemaVersion}, {"t", obj["t"]}, {"q", obj["q"]}});

        Json pts = Json::array();
        for (Eigen::Index c = 0; c < box.vertices.cols(); ++c) pts.push_back(vec_to_json(o_cam * Vec3d(box.vertices.col(c))));
        kp_lines.push_back(Json{{"schema_version", kSchemaVersion}, {"points", pts}});
      }
      write_text(dir / spec.id / "hand.jsonl", jsonl(hand_lines));
      write_text(dir / spec.id / "object.jsonl", jsonl(object_lines));
      write_text(dir / spec.id / "keypoints.jsonl", jsonl(kp_lines));

      Json m;
      m["schema_version"] = kSchemaVersion;
      m["clip_id"] = spec.id;
      m["fps"] = kFps;
      m["camera"] = Json{{"fx", 600.0}, {"fy", 600.0}, {"cx", 320.0}, {"cy", 240.0}, {"width", 640}, {"height", 480}};
      m["cam_to_world"] = pose_to_json(cam_to_world);
      m["streams"] = Json{{"hand", "hand.jsonl"}, {"object", "object.jsonl"}, {"keypoints", "keypoints.jsonl"}};
      m["mesh"] = "../meshes/box.obj";
      if (spec.anchors) {
        m["anchors"] = "anchors.json";
        Json a;
        a["schema_version"] = kSchemaVersion;
        a["up"] = vec_to_json(Vec3d::UnitZ());
        a["approach"] = vec_to_json(Vec3d::UnitY());
        a["hip_left"] = vec_to_json(Vec3d(-0.15, -0.7, 0.0));
        a["hip_right"] = vec_to_json(Vec3d(0.15, -0.7, 0.0));
        a["shoulder_left"] = vec_to_json(Vec3d(-0.2, -0.7, 0.45));
        a["shoulder_right"] = vec_to_json(Vec3d(0.2, -0.7, 0.45));
        write_text(dir / spec.id / "anchors.json", dump(a));
      }
      m["notes"] = spec.wrist_turn != 0 ? "object turned about its own z while held" : "pick and place";
      write_text(dir / spec.id / "manifest.json", dump(m));
    }

    // Gesture features are not rotation-normalized, so exemplars are posed
    // like the canonical-frame hand at the grasp.
    const Rot3d ex_rot = (base * fk(chain, nominal[kGrasp]) * g0.inverse()).rot;
    auto posed = [&](const std::array<Vec3d, kNumKeypoints>& k) {
      std::array<Vec3d, kNumKeypoints> out;
      for (std::size_t i = 0; i < k.size(); ++i) out[i] = ex_rot * k[i];
      return joints_json(out);
    };
    Json ex = Json::array();
    for (double c : {0.0, 0.3, 0.6}) ex.push_back(Json{{"label", "whole_hand"}, {"joints", posed(local_hand(c))}});
    for (double c : {0.0, 0.3, 0.6}) ex.push_back(Json{{"label", "finger_only"}, {"joints", posed(local_hand(c, true))}});
    write_text(dir / "exemplars.json", dump(Json{{"schema_version", kSchemaVersion}, {"exemplars", ex}}));

    struct Asset {
      std::string id;
      TriMesh mesh;
      std::string category;
    };
    const std::vector<Asset> assets = {
        {"box_small", make_box(Vec3d::Constant(0.02)), "box"},
        {"box_tall", make_box(Vec3d(0.025, 0.025, 0.05)), "box"},
        {"brick", make_box(Vec3d(0.04, 0.02, 0.015)), "box"},
        {"can", make_cylinder(0.025, 0.04, 24), "cylinder"},
        {"ball", make_icosphere(0.03, 2), "sphere"},
    };
    Json lib = Json::array();
    for (const Asset& a : assets) {
      write_text(dir / "library" / (a.id + ".obj"), to_obj(a.mesh));
      lib.push_back(Json{{"id", a.id},
                         {"mesh_path", a.id + ".obj"},
                         {"canonical_pose", pose_to_json(Posed::identity())},
                         {"category", a.category}});
    }
    write_text(dir / "library" / "library.json", dump(Json{{"schema_version", kSchemaVersion}, {"assets", lib}}));

    char qbuf[256];
    std::snprintf(qbuf, sizeof qbuf, "%.17g %.17g %.17g %.17g %.17g %.17g", q0[0], q0[1], q0[2], q0[3], q0[4], q0[5]);
    char rbuf[256];
    std::snprintf(rbuf, sizeof rbuf, "reachable_min = %.17g %.17g %.17g\nreachable_max = %.17g %.17g %.17g\n",
                  reach.min.x(), reach.min.y(), reach.min.z(), reach.max.x(), reach.max.y(), reach.max.z());
    char bbuf[128];
    std::snprintf(bbuf, sizeof bbuf, "%.17g %.17g %.17g", base.trans.x(), base.trans.y(), base.trans.z());
    std::string ini =
        "# Pipeline config for the synthetic fixture; paths are relative to this file.\n"
        "[input]\n"
        "clips = pick_box/manifest.json screw_box/manifest.json\n\n"
        "[run]\n"
        "seed = 7\n\n"
        "[canonical]\n"
        "up = 0 0 1\n"
        "approach = 0 1 0\n"
        "t0 = 0\n\n"
        "[retarget]\n"
        "exemplars = exemplars.json\n"
        "sign = -1\n"
        "d_z = 0\n\n"
        "[plausibility]\n"
        "mode = flag\n\n"
        "[augment]\n"
        "object_transforms = 2\n"
        "mirror = true\n"
        "tau_screw = 0.35\n"
        "library = library/library.json\n"
        "substitutes = 2\n" + std::string(rbuf) + "\n"
        "[robot.arm6]\n"
        "chain = arm6.urdf\n"
        "root = world\n"
        "ee = tool0\n"
        "q0 = " + std::string(qbuf) + "\n"
        "base_xyz = " + std::string(bbuf) + "\n";
    write_text(dir / "fixture.ini", ini);
    std::cout << "fixture written to " << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
