#include "hoi/io.hpp"

#include <fstream>
#include <sstream>

namespace hoi {

Json vec_to_json(const Vec3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3d vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("expected a 3-vector, got " + j.dump());
  Vec3d v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) throw Error("non-finite vector component");
  return v;
}

Json pose_to_json(const Posed& p) {
  Eigen::Quaterniond q = p.rot.quaternion();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  return Json{{"t", vec_to_json(p.trans)}, {"q", Json::array({q.w(), q.x(), q.y(), q.z()})}};
}

Posed pose_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("t") || !j.contains("q")) throw Error("pose needs t and q");
  const Json& q = j.at("q");
  if (!q.is_array() || q.size() != 4) throw Error("quaternion must be [w, x, y, z]");
  return Posed(Rot3d::from_quaternion(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                      q[3].get<double>()),
               vec_from_json(j.at("t")));
}

void check_schema(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(where + ": missing schema_version");
  }
  const Json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw Error(where + ": unsupported schema_version " + v.dump());
  }
}

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

Json read_json(const fs::path& path) {
  try {
    return Json::parse(slurp(path));
  } catch (const Json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<Json> read_jsonl(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<Json> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(n);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(where + ": " + e.what());
    }
    check_schema(j, where);
    out.push_back(std::move(j));
  }
  return out;
}

ClipManifest load_manifest(const fs::path& path) {
  const Json j = read_json(path);
  check_schema(j, path.string());
  const fs::path base = path.parent_path();
  auto existing = [&](const std::string& rel) {
    const fs::path p = base / rel;
    if (!fs::exists(p)) throw Error(path.string() + ": referenced file " + p.string() + " does not exist");
    return p;
  };
  auto optional_path = [&](const Json& obj, const char* key) -> std::optional<fs::path> {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return existing(obj.at(key).get<std::string>());
  };

  ClipManifest m;
  m.source = path;
  try {
    m.clip_id = j.at("clip_id").get<std::string>();
    m.fps = j.at("fps").get<double>();
    const Json& cam = j.at("camera");
    m.camera = {cam.at("fx").get<double>(), cam.at("fy").get<double>(), cam.at("cx").get<double>(),
                cam.at("cy").get<double>(), cam.at("width").get<int>(), cam.at("height").get<int>()};
    if (j.contains("cam_to_world")) m.cam_to_world = pose_from_json(j.at("cam_to_world"));
    const Json& streams = j.at("streams");
    m.hand_path = existing(streams.at("hand").get<std::string>());
    m.object_path = optional_path(streams, "object");
    m.keypoints_path = optional_path(streams, "keypoints");
    m.mesh_path = optional_path(j, "mesh");
    m.anchors_path = optional_path(j, "anchors");
    m.notes = j.value("notes", "");
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  if (m.clip_id.empty()) throw Error(path.string() + ": empty clip_id");
  if (!(m.fps > 0)) throw Error(path.string() + ": fps must be positive");
  m.camera.validate();
  return m;
}

namespace {

HandFrame hand_from_json(const Json& j) {
  HandFrame h;
  const Json& joints = j.at("joints");
  if (!joints.is_array() || joints.size() != kNumKeypoints) throw Error("hand frame needs 21 joints");
  for (int i = 0; i < kNumKeypoints; ++i) h.keypoints[static_cast<std::size_t>(i)] = vec_from_json(joints[static_cast<std::size_t>(i)]);
  const std::string side = j.at("handedness").get<std::string>();
  if (side == "left") {
    h.handedness = Handedness::left;
  } else if (side != "right") {
    throw Error("handedness must be left or right");
  }
  if (j.contains("wrist") && !j.at("wrist").is_null()) h.wrist_pose = pose_from_json(j.at("wrist"));
  h.validate();
  return h;
}

BodyAnchors anchors_from_json(const Json& j) {
  BodyAnchors a;
  if (j.contains("up")) a.up = vec_from_json(j.at("up"));
  if (j.contains("approach")) a.approach = vec_from_json(j.at("approach"));
  if (j.contains("hip_left")) {
    a.hip_left = vec_from_json(j.at("hip_left"));
    a.hip_right = vec_from_json(j.at("hip_right"));
    a.shoulder_left = vec_from_json(j.at("shoulder_left"));
    a.shoulder_right = vec_from_json(j.at("shoulder_right"));
    a.has_body = true;
  }
  return a;
}

template <typename F>
auto per_line(const fs::path& path, F f) {
  const std::vector<Json> lines = read_jsonl(path);
  std::vector<decltype(f(lines.front()))> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(f(lines[i]));
    } catch (const Json::exception& e) {
      throw Error(path.filename().string() + " frame " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path.filename().string() + " frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

Clip load_clip(const fs::path& manifest_path) {
  Clip c;
  c.manifest = load_manifest(manifest_path);
  const ClipManifest& m = c.manifest;
  c.hand = per_line(m.hand_path, hand_from_json);
  if (c.hand.empty()) throw Error(m.hand_path.string() + ": hand stream is empty");
  const std::size_t n = c.hand.size();
  auto check_length = [&](const fs::path& p, std::size_t len) {
    if (len != n) {
      throw Error("stream length mismatch: hand stream " + m.hand_path.filename().string() + " has " +
                  std::to_string(n) + " frames, " + p.filename().string() + " has " + std::to_string(len));
    }
  };

  if (m.object_path) {
    c.object = per_line(*m.object_path, [](const Json& j) { return pose_from_json(j); });
    check_length(*m.object_path, c.object->size());
  }
  if (m.keypoints_path) {
    KeypointTrack track;
    track.dim = 0;
    const auto lines = read_jsonl(*m.keypoints_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const Json& pts = lines[i].at("points");
      const int dim = pts.empty() ? 3 : static_cast<int>(pts[0].size());
      if (track.dim == 0) track.dim = dim;
      Eigen::MatrixXd mtx(track.dim, static_cast<Eigen::Index>(pts.size()));
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (static_cast<int>(pts[k].size()) != track.dim) {
          throw Error(m.keypoints_path->filename().string() + " frame " + std::to_string(i) +
                      ": inconsistent keypoint dimensionality");
        }
        for (int d = 0; d < track.dim; ++d) mtx(d, static_cast<Eigen::Index>(k)) = pts[k][static_cast<std::size_t>(d)].get<double>();
      }
      std::vector<bool> valid(pts.size(), true);
      if (lines[i].contains("valid")) valid = lines[i].at("valid").get<std::vector<bool>>();
      track.points.push_back(std::move(mtx));
      track.valid.push_back(std::move(valid));
    }
    if (track.dim == 0) track.dim = 3;
    track.validate();
    check_length(*m.keypoints_path, track.size());
    c.keypoints = std::move(track);
  }
  if (m.mesh_path) c.mesh = load_obj(*m.mesh_path);
  if (m.anchors_path) {
    const Json j = read_json(*m.anchors_path);
    check_schema(j, m.anchors_path->string());
    c.anchors = anchors_from_json(j);
    c.anchors->validate();
  }
  return c;
}

std::vector<GestureExemplar> load_exemplars(const fs::path& path) {
  const Json j = read_json(path);
  check_schema(j, path.string());
  std::vector<GestureExemplar> out;
  for (const Json& e : j.at("exemplars")) {
    const std::string label = e.at("label").get<std::string>();
    HandFrame h;
    h.keypoints = hand_from_json(Json{{"joints", e.at("joints")}, {"handedness", "right"}}).keypoints;
    if (label == "whole_hand") {
      out.push_back({Gesture::whole_hand, gesture_features(h)});
    } else if (label == "finger_only") {
      out.push_back({Gesture::finger_only, gesture_features(h)});
    } else {
      throw Error(path.string() + ": unknown gesture label '" + label + "'");
    }
  }
  return out;
}

std::vector<ObjectAsset> load_asset_library(const fs::path& path) {
  const Json j = read_json(path);
  check_schema(j, path.string());
  std::vector<ObjectAsset> out;
  for (const Json& e : j.at("assets")) {
    ObjectAsset a;
    a.id = e.at("id").get<std::string>();
    a.mesh = load_obj(path.parent_path() / e.at("mesh_path").get<std::string>());
    if (e.contains("canonical_pose")) a.canonical_pose = pose_from_json(e.at("canonical_pose"));
    a.category = e.value("category", "");
    if (e.contains("embedding") && !e.at("embedding").is_null()) {
      const auto v = e.at("embedding").get<std::vector<double>>();
      a.embedding = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string trajectory_to_jsonl(const GripperTrajectory& traj) {
  std::string out;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const GripperFrame& f = traj.frames[t];
    Json j{{"schema_version", kSchemaVersion},
           {"t", t},
           {"pose", pose_to_json(f.pose)},
           {"command", to_string(f.command)},
           {"width", f.width ? Json(*f.width) : Json(nullptr)},
           {"interpolated", !traj.interpolated.empty() && traj.interpolated[t]}};
    out += j.dump() + "\n";
  }
  return out;
}

GripperTrajectory load_trajectory(const fs::path& path) {
  GripperTrajectory g;
  for (const Json& j : read_jsonl(path)) {
    GripperFrame f;
    f.pose = pose_from_json(j.at("pose"));
    const std::string c = j.at("command").get<std::string>();
    if (c != "open" && c != "closed") throw Error(path.string() + ": bad command '" + c + "'");
    f.command = c == "open" ? GripperCommand::open : GripperCommand::closed;
    if (j.contains("width") && !j.at("width").is_null()) f.width = j.at("width").get<double>();
    g.frames.push_back(f);
  }
  return g;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace hoi
