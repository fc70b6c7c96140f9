#include "hoi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace hoi {

namespace pt = boost::property_tree;

// ---------------------------------------------------------------- config

namespace {

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

class Section {
 public:
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {}

  // Every key must be consumed before `finish`.
  void finish() const {
    for (const auto& [key, value] : tree_) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
    }
  }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) return std::nullopt;
    return unquote(it->second.data());
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (auto s = raw(key)) out = convert<T>(key, *s);
  }
  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (auto s = raw(key)) out = convert<T>(key, *s);
  }

  template <typename T>
  T convert(const std::string& key, const std::string& s) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
      if (s == "false" || s == "no" || s == "off" || s == "0") return false;
      throw ConfigError(where(key) + ": expected a boolean, got '" + s + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, Vec3d>) {
      const auto v = numbers(key, s);
      if (v.size() != 3) throw ConfigError(where(key) + ": expected three numbers");
      return Vec3d(v[0], v[1], v[2]);
    } else if constexpr (std::is_same_v<T, Eigen::VectorXd>) {
      const auto v = numbers(key, s);
      return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
      std::istringstream in(s);
      T v{};
      if (!(in >> v) || !(in >> std::ws).eof()) {
        throw ConfigError(where(key) + ": cannot parse '" + s + "'");
      }
      return v;
    }
  }

 private:
  std::vector<double> numbers(const std::string& key, std::string s) const {
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<double> v;
    double x = 0;
    while (in >> x) v.push_back(x);
    if (!(in >> std::ws).eof()) throw ConfigError(where(key) + ": cannot parse '" + s + "'");
    return v;
  }

  std::string name_;
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

fs::path resolve_path(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

void positive(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what + " out of range");
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  PipelineConfig c;
  for (const auto& [name, sub] : tree) {
    if (!sub.data().empty()) throw ConfigError("key '" + name + "' outside a section");
    Section s(name, sub);
    if (name == "input") {
      if (auto v = s.raw("clips")) {
        for (const auto& w : split_words(*v)) c.clips.push_back(resolve_path(base_dir, w));
      }
    } else if (name == "output") {
      if (auto v = s.raw("dir")) c.output_dir = resolve_path(base_dir, *v);
    } else if (name == "run") {
      s.get("seed", c.seed);
      s.get("jobs", c.jobs);
    } else if (name == "canonical") {
      for (const char* key : {"up", "approach"}) {
        if (auto v = s.raw(key); v && *v != "auto") {
          (std::string(key) == "up" ? c.up : c.approach) = s.convert<Vec3d>(key, *v);
        }
      }
      if (auto v = s.raw("t0"); v && *v != "auto") c.t0 = s.convert<int>("t0", *v);
      s.get("salient_distance", c.salient_distance);
    } else if (name == "retarget") {
      if (auto v = s.raw("exemplars")) c.exemplars = resolve_path(base_dir, *v);
      RetargetConfig& r = c.retarget;
      s.get("k", r.k);
      s.get("d_z", r.d_z);
      if (auto v = s.raw("sign"); v && *v != "auto") {
        r.sign = s.convert<int>("sign", *v);
        if (*r.sign != 1 && *r.sign != -1) throw ConfigError("[retarget] sign must be auto, 1 or -1");
      }
      s.get("window", r.window);
      s.get("threshold_3d", r.threshold_3d);
      s.get("threshold_2d", r.threshold_2d);
      s.get("hysteresis", r.hysteresis);
      s.get("max_gap", r.max_gap);
    } else if (name == "plausibility") {
      if (auto v = s.raw("mode")) {
        if (*v == "off") {
          c.plausibility = PlausibilityMode::off;
        } else if (*v == "flag") {
          c.plausibility = PlausibilityMode::flag;
        } else if (*v == "resolve") {
          c.plausibility = PlausibilityMode::resolve;
        } else {
          throw ConfigError("[plausibility] mode must be off, flag or resolve");
        }
      }
      s.get("voxel", c.tsdf.voxel);
      s.get("trunc", c.tsdf.trunc);
      s.get("padding", c.tsdf.padding);
      s.get("max_iterations", c.resolve.max_iterations);
      s.get("tolerance", c.resolve.tolerance);
      s.get("translation_only", c.resolve.translation_only);
      if (auto v = s.raw("subset")) {
        if (*v != "all" && *v != "palm") throw ConfigError("[plausibility] subset must be all or palm");
        c.resolve.subset = *v == "all" ? SurfaceSubset::all : SurfaceSubset::palm;
      }
    } else if (name == "augment") {
      s.get("object_transforms", c.object_transforms);
      s.get("shift_min", c.sampler.object_shift.min);
      s.get("shift_max", c.sampler.object_shift.max);
      s.get("rotation_cap", c.sampler.rotation_cap);
      s.get("reachable_min", c.sampler.reachable.min);
      s.get("reachable_max", c.sampler.reachable.max);
      s.get("resample_free_anchors", c.sampler.resample_free_anchors);
      if (auto v = s.raw("progress")) {
        if (*v != "arc_length" && *v != "frame_index") {
          throw ConfigError("[augment] progress must be arc_length or frame_index");
        }
        c.sampler.progress = *v == "arc_length" ? ProgressMode::arc_length : ProgressMode::frame_index;
      }
      s.get("mirror", c.mirror);
      s.get("tau_screw", c.mirror_spec.tau_screw);
      s.get("task_axis", c.task_axis);
      if (auto v = s.raw("library")) c.library = resolve_path(base_dir, *v);
      s.get("substitutes", c.substitutes);
      s.get("alpha", c.weights.alpha);
      s.get("beta", c.weights.beta);
      s.get("gamma", c.weights.gamma);
      s.get("surface_samples", c.weights.surface_samples);
    } else if (name == "metrics") {
      s.get("samples", c.metric_samples);
    } else if (name == "ik") {
      IkOptions& k = c.ik;
      s.get("max_iterations", k.max_iterations);
      s.get("damping", k.damping);
      s.get("pos_tol", k.pos_tol);
      s.get("rot_tol", k.rot_tol);
      s.get("rotation_weight", k.rotation_weight);
      s.get("max_update", k.max_update);
      s.get("rate_cap_revolute", k.rate_cap_revolute);
      s.get("rate_cap_prismatic", k.rate_cap_prismatic);
    } else if (name.rfind("robot.", 0) == 0 && name.size() > 6) {
      RobotSpec r;
      r.name = name.substr(6);
      ParseOptions opts;
      std::string chain;
      s.get("chain", chain);
      if (chain.empty()) throw ConfigError("[" + name + "] needs a chain path");
      r.chain_path = resolve_path(base_dir, chain);
      s.get("root", opts.root);
      s.get("ee", opts.ee);
      s.get("fold_fixed", opts.fold_fixed);
      Vec3d xyz = Vec3d::Zero(), rpy = Vec3d::Zero();
      s.get("base_xyz", xyz);
      s.get("base_rpy", rpy);
      r.base = Posed(Rot3d::from_rpy(rpy.x(), rpy.y(), rpy.z()), xyz);
      std::optional<Eigen::VectorXd> q0;
      s.get("q0", q0);
      try {
        r.chain = load_chain(r.chain_path.string(), opts);
      } catch (const Error& e) {
        throw ConfigError("[" + name + "] " + e.what());
      }
      r.q0 = q0 ? *q0 : Eigen::VectorXd((r.chain.lower() + r.chain.upper()) / 2);
      if (r.q0.size() != r.chain.dof()) {
        throw ConfigError("[" + name + "] q0 has " + std::to_string(r.q0.size()) + " values, chain has " +
                          std::to_string(r.chain.dof()) + " joints");
      }
      if (!r.chain.within_limits(r.q0)) throw ConfigError("[" + name + "] q0 violates joint limits");
      for (const RobotSpec& other : c.robots) {
        if (other.name == r.name) throw ConfigError("robot '" + r.name + "' defined twice");
      }
      c.robots.push_back(std::move(r));
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
    s.finish();
  }

  positive(c.salient_distance > 0, "[canonical] salient_distance");
  positive(c.retarget.k >= 1 && c.retarget.window >= 1 && c.retarget.hysteresis >= 1 &&
               c.retarget.max_gap >= 0,
           "[retarget] integer settings");
  positive(c.tsdf.voxel > 0 && c.tsdf.trunc > 0 && c.tsdf.padding >= 0, "[plausibility] grid settings");
  positive(c.object_transforms >= 0 && c.object_transforms < 1000, "[augment] object_transforms");
  positive(c.sampler.rotation_cap >= 0, "[augment] rotation_cap");
  positive(c.mirror_spec.tau_screw > 0, "[augment] tau_screw");
  positive(c.task_axis.norm() > 0, "[augment] task_axis");
  positive(c.weights.surface_samples > 0, "[augment] surface_samples");
  positive(c.metric_samples > 0, "[metrics] samples");
  positive(c.ik.max_iterations > 0 && c.ik.pos_tol > 0 && c.ik.rot_tol > 0 && c.ik.damping >= 0,
           "[ik] settings");
  positive(c.jobs >= 1, "[run] jobs");
  c.weights.validate();
  if (c.substitutes > 0 && !c.library) throw ConfigError("[augment] substitutes requires a library");
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void select_robots(PipelineConfig& config, const std::vector<std::string>& names) {
  if (names.empty()) return;
  std::vector<RobotSpec> chosen;
  for (const std::string& n : names) {
    auto it = std::find_if(config.robots.begin(), config.robots.end(),
                           [&](const RobotSpec& r) { return r.name == n; });
    if (it == config.robots.end()) throw ConfigError("unknown robot '" + n + "'");
    chosen.push_back(*it);
  }
  config.robots = std::move(chosen);
}

// ---------------------------------------------------------------- stages

CanonicalClip canonicalize_clip(Clip clip, const PipelineConfig& config) {
  CanonicalClip out;
  const Posed& c2w = clip.manifest.cam_to_world;
  std::vector<HandFrame> world;
  world.reserve(clip.hand.size());
  for (const HandFrame& h : clip.hand) world.push_back(h.transformed(c2w));
  std::optional<std::vector<Posed>> object;
  if (clip.object) {
    object.emplace();
    for (const Posed& p : *clip.object) object->push_back(c2w * p);
  }

  std::vector<Vec3d> wrist;
  for (const HandFrame& h : world) wrist.push_back(h.at(Keypoint::wrist));
  std::vector<Vec3d> obj_pos;
  if (object) {
    for (const Posed& p : *object) obj_pos.push_back(p.trans);
  }

  BodyAnchors anchors = clip.anchors.value_or(BodyAnchors{});
  if (config.up) anchors.up = *config.up;
  if (config.approach) {
    anchors.approach = *config.approach;
  } else if (!(clip.anchors) && object) {
    anchors.approach = default_approach(wrist, obj_pos);
  }

  int t0 = 0;
  if (config.t0) {
    t0 = *config.t0;
    if (t0 < 0 || static_cast<std::size_t>(t0) >= world.size()) {
      throw Error("t0 " + std::to_string(t0) + " outside the clip");
    }
  } else if (object) {
    t0 = default_t0(wrist, obj_pos, config.salient_distance);
  }

  Vec3d origin;
  if (object) {
    origin = obj_pos[static_cast<std::size_t>(t0)];
  } else {
    origin = wrist[static_cast<std::size_t>(t0)];
    out.warnings.emplace_back("no object stream; canonical origin placed at the wrist");
  }
  out.transform = build_canonical_frame(anchors, origin, t0);

  const Posed& w2c = out.transform.world_to_canonical;
  out.hand.reserve(world.size());
  for (const HandFrame& h : world) out.hand.push_back(h.transformed(w2c));
  if (object) out.object = apply_canonical(out.transform, *object);
  out.clip = std::move(clip);
  return out;
}

Json canonical_json(const CanonicalClip& clip) {
  const CanonicalTransform& t = clip.transform;
  return Json{{"world_to_canonical", pose_to_json(t.world_to_canonical)},
              {"t0", t.t0},
              {"lateral", vec_to_json(t.lateral)},
              {"lateral_agreement", t.lateral_agreement}};
}

GripperTrajectory retarget_clip(const CanonicalClip& clip, const PipelineConfig& config,
                                std::span<const GestureExemplar> exemplars) {
  std::vector<Vec3d> centroids;
  if (clip.object) {
    for (const Posed& p : *clip.object) centroids.push_back(p.trans);
  }
  const KeypointTrack* track = clip.clip.keypoints ? &*clip.clip.keypoints : nullptr;
  return retarget_trajectory(clip.hand, track, exemplars, config.retarget, centroids);
}

namespace {

const std::vector<int> kPalmKeypoints = {0, 1, 5, 9, 13, 17};

HandSurface local_surface(const HandFrame& hand, const Posed& frame) {
  HandSurface s;
  s.points.resize(3, kNumKeypoints);
  const Posed inv = frame.inverse();
  for (int i = 0; i < kNumKeypoints; ++i) s.points.col(i) = inv * hand.keypoints[static_cast<std::size_t>(i)];
  s.palm = kPalmKeypoints;
  return s;
}

}  // namespace

PlausibilityReport check_plausibility(const CanonicalClip& clip, GripperTrajectory& traj,
                                      const PipelineConfig& config) {
  PlausibilityReport rep;
  rep.mode = config.plausibility;
  if (config.plausibility == PlausibilityMode::off) return rep;
  if (!clip.object || !clip.clip.mesh) {
    rep.warnings.emplace_back("penetration check skipped: no object mesh and pose stream");
    return rep;
  }
  TsdfGrid grid;
  try {
    grid = build_tsdf(*clip.clip.mesh, config.tsdf);
  } catch (const Error& e) {
    rep.warnings.push_back(std::string("penetration check skipped: ") + e.what());
    return rep;
  }
  rep.checked = true;

  ResolveOptions ropts = config.resolve;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Posed& t_o = (*clip.object)[t];
    const Posed& t_g = traj.frames[t].pose;
    const HandSurface surface = local_surface(clip.hand[t], t_g);
    const Posed initial = t_o.inverse() * t_g;
    const double energy = penetration_energy(surface, ropts.subset, grid, initial);
    double depth = 0;
    for (Eigen::Index i = 0; i < surface.points.cols(); ++i) {
      depth = std::max(depth, -query_sdf(grid, initial * Vec3d(surface.points.col(i))));
    }
    rep.max_depth = std::max(rep.max_depth, depth);
    rep.max_energy = std::max(rep.max_energy, energy);
    if (energy <= ropts.tolerance) continue;
    ++rep.frames_penetrating;
    if (config.plausibility != PlausibilityMode::resolve) {
      rep.final_max_energy = std::max(rep.final_max_energy, energy);
      continue;
    }
    const ResolveResult r = resolve_penetration(initial, surface, grid, ropts);
    rep.final_max_energy = std::max(rep.final_max_energy, r.final_energy);
    if (r.converged) {
      ++rep.frames_resolved;
      traj.frames[t].pose = t_o * r.pose;
    } else {
      ++rep.frames_unresolved;
    }
  }
  if (rep.frames_unresolved > 0) {
    rep.warnings.push_back(std::to_string(rep.frames_unresolved) + " frame(s) still penetrate after resolution");
  }
  return rep;
}

Resources load_resources(const PipelineConfig& config) {
  Resources r;
  try {
    if (config.exemplars) r.exemplars = load_exemplars(*config.exemplars);
    if (config.library && config.substitutes > 0) r.library = load_asset_library(*config.library);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return r;
}

std::uint64_t episode_seed(std::uint64_t seed, const std::string& clip_id, int k) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : clip_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed ^ h ^ (static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

char hex_digit(int v) { return "0123456789abcdef"[v & 15]; }

std::string two_digits(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", k);
  return buf;
}

TriMesh mirrored_mesh(const TriMesh& mesh) {
  // Object-frame geometry seen through R' = S R S Ry(pi): q = diag(1, 1, -1) p.
  PointSet v = mesh.vertices;
  v.row(2) *= -1;
  Triangles t = mesh.triangles;
  t.row(1).swap(t.row(2));
  return TriMesh(v, t);
}

}  // namespace

std::vector<EpisodeRecord> augment_clip(const CanonicalClip& clip, const GripperTrajectory& base,
                                        const PlausibilityReport& plausibility,
                                        const PipelineConfig& config, const Resources& resources,
                                        std::vector<Rejection>& rejections) {
  const std::string& cid = clip.clip.manifest.clip_id;
  const std::string manifest = clip.clip.manifest.source.filename().string();
  std::vector<EpisodeRecord> out;

  EpisodeRecord b;
  b.id = cid + "__base";
  b.trajectory = base;
  b.object = clip.object;
  b.mesh = clip.clip.mesh;
  b.segments = segment_trajectory(base);
  b.plausibility = plausibility;
  b.lineage = {cid, manifest, "none", Json::object(), std::nullopt, config.seed};
  b.canonical = canonical_json(clip);
  b.warnings = clip.warnings;
  b.warnings.insert(b.warnings.end(), base.warnings.begin(), base.warnings.end());
  out.push_back(b);

  for (int k = 0; k < config.object_transforms; ++k) {
    const std::uint64_t seed = episode_seed(config.seed, cid, k);
    std::mt19937_64 rng(seed);
    const Posed t_o = sample_object_transform(config.sampler, rng);
    AugmentedTrajectory a = augment_trajectory(base, t_o, config.sampler, rng);
    EpisodeRecord e;
    e.id = cid + "__objtf" + two_digits(k);
    e.trajectory = std::move(a.trajectory);
    if (clip.object) {
      e.object.emplace();
      for (const Posed& p : *clip.object) e.object->push_back(t_o * p);
    }
    e.mesh = clip.clip.mesh;
    e.canonical = b.canonical;
    e.segments = segment_trajectory(e.trajectory);
    Json anchors = Json::array();
    for (const OpenAnchors& oa : a.anchors) {
      anchors.push_back(Json{{"start", vec_to_json(oa.start)}, {"end", vec_to_json(oa.end)}});
    }
    e.lineage = {cid, manifest, "object_transform",
                 Json{{"index", k}, {"object_transform", pose_to_json(t_o)}, {"anchors", anchors}},
                 b.id, seed};
    out.push_back(std::move(e));
  }

  if (config.mirror) {
    const std::string id = cid + "__mirror";
    if (!clip.object) {
      rejections.push_back({id, "no object stream to mirror"});
    } else {
      const auto poses = base.poses();
      const MirrorResult m =
          mirror_trajectory(poses, *clip.object, b.segments, config.mirror_spec, config.task_axis.normalized());
      if (!m.accepted) {
        rejections.push_back({id, m.reason});
      } else {
        EpisodeRecord e;
        e.id = id;
        e.trajectory = mirror_gripper(base);
        e.object = m.object;
        if (clip.clip.mesh) e.mesh = mirrored_mesh(*clip.clip.mesh);
        e.segments = b.segments;
        e.canonical = b.canonical;
        e.lineage = {cid, manifest, "mirror", Json{{"screw", m.screw}}, b.id, config.seed};
        out.push_back(std::move(e));
      }
    }
  }

  if (config.substitutes > 0) {
    if (!clip.object || !clip.clip.mesh) {
      rejections.push_back({cid + "__sub", "substitution needs an object mesh and pose stream"});
    } else {
      ObjectAsset source;
      source.id = cid;
      source.mesh = *clip.clip.mesh;
      const auto ranked = rank_substitutes(source, resources.library, config.weights, config.substitutes);
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        const ObjectAsset& asset = resources.library[ranked[r].index];
        const Binding bind = bind_substitute(*clip.object, source, asset);
        EpisodeRecord e;
        e.id = cid + "__sub_" + asset.id;
        e.trajectory = base;
        e.object = bind.object_poses;
        e.mesh = bind.bound_mesh;
        e.segments = b.segments;
        e.canonical = b.canonical;
        e.warnings = bind.warnings;
        e.warnings.insert(e.warnings.end(), ranked[r].score.warnings.begin(), ranked[r].score.warnings.end());
        const RetrievalScore& sc = ranked[r].score;
        e.lineage = {cid, manifest, "substitution",
                     Json{{"asset", asset.id},
                          {"rank", r},
                          {"score", Json{{"total", sc.total},
                                         {"chamfer", sc.chamfer},
                                         {"iou", sc.iou},
                                         {"semantic", sc.semantic_used ? Json(sc.semantic) : Json()}}},
                          {"scale", bind.scale},
                          {"substitute_to_source", pose_to_json(bind.substitute_to_source())},
                          {"pca_fallback", bind.pca_fallback}},
                     b.id, config.seed};
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

void replay_episode(EpisodeRecord& episode, std::span<const RobotSpec> robots, const IkOptions& ik) {
  for (const RobotSpec& robot : robots) {
    std::vector<Posed> targets;
    targets.reserve(episode.trajectory.size());
    const Posed inv = robot.base.inverse();
    for (const GripperFrame& f : episode.trajectory.frames) targets.push_back(inv * f.pose);
    ReplayResult r;
    try {
      r = replay_trajectory(robot.chain, targets, robot.q0, ik);
    } catch (const IkFailure& e) {
      r.report.feasible = false;
      r.report.failed_frame = 0;
      r.report.failure = e.what();
    }
    std::vector<Posed> ee;
    ee.reserve(r.joints.size());
    for (const JointConfig& q : r.joints) ee.push_back(fk(robot.chain, q));
    episode.joints[robot.name] = std::move(r.joints);
    episode.ee[robot.name] = std::move(ee);
    episode.replay[robot.name] = std::move(r.report);
  }
}

void score_episode(EpisodeRecord& episode, double fps, const std::optional<TriMesh>& source_mesh,
                   int samples) {
  MetricReport& m = episode.metrics;
  m = MetricReport{};
  m.fps = fps;
  const std::vector<Posed> poses = episode.trajectory.poses();
  if (poses.size() >= 3) {
    std::vector<Vec3d> p;
    for (const Posed& x : poses) p.push_back(x.trans);
    m.jitter_cm_s2 = hand_jitter(p, fps);
  } else {
    episode.warnings.emplace_back("jitter needs three frames; reported as 0");
  }

  m.has_relative = false;
  if (episode.object) {
    std::vector<Posed> h, o;
    for (const Segment& s : episode.segments) {
      if (s.state != ContactState::hold) continue;
      for (int t = s.start; t <= s.end; ++t) {
        h.push_back(poses[static_cast<std::size_t>(t)]);
        o.push_back((*episode.object)[static_cast<std::size_t>(t)]);
      }
    }
    if (h.size() >= 2) {
      const RelPoseStd r = rel_pose_consistency(h, o);
      m.rel_trans_std_cm = r.trans_cm;
      m.rel_rot_std_deg = r.rot_deg;
      m.has_relative = true;
    }
  }

  m.has_geometry = false;
  if (episode.mesh && source_mesh) {
    TriMesh mesh = *episode.mesh;
    if (episode.lineage.augmentation == "substitution") {
      const Json& p = episode.lineage.params.at("substitute_to_source");
      mesh = mesh.transformed(pose_from_json(p));
    }
    constexpr std::uint64_t kMetricSeed = 0x6d657472;
    const PointSet a = sample_surface(mesh, samples, kMetricSeed);
    const PointSet b = sample_surface(*source_mesh, samples, kMetricSeed);
    m.chamfer_cm = 100 * chamfer_distance(a, b);
    m.f5_pct = fscore(a, b, 0.005);
    m.f10_pct = fscore(a, b, 0.010);
    m.has_geometry = true;
  }
  m.validate();
}

namespace {

const char* to_string(PlausibilityMode m) {
  switch (m) {
    case PlausibilityMode::off: return "off";
    case PlausibilityMode::flag: return "flag";
    case PlausibilityMode::resolve: return "resolve";
  }
  return "?";
}

Json optional_int(const std::optional<int>& v) { return v ? Json(*v) : Json(); }

}  // namespace

Json episode_report(const EpisodeRecord& e) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["episode"] = e.id;
  j["frames"] = e.trajectory.size();
  j["gesture"] = to_string(e.trajectory.gesture);
  j["handedness"] = to_string(e.trajectory.handedness);
  Json segs = Json::array();
  for (const Segment& s : e.segments) {
    segs.push_back(Json{{"start", s.start}, {"end", s.end}, {"state", to_string(s.state)}});
  }
  j["segments"] = segs;
  j["canonical"] = e.canonical;

  Json replay = Json::object();
  for (const auto& [name, r] : e.replay) {
    double pos = 0, rot = 0;
    for (const ReplayFrame& f : r.frames) {
      pos = std::max(pos, f.pos_err);
      rot = std::max(rot, f.rot_err);
    }
    replay[name] = Json{{"feasible", r.feasible},
                        {"frames_solved", e.joints.at(name).size()},
                        {"failed_frame", optional_int(r.failed_frame)},
                        {"first_rate_violation", optional_int(r.first_rate_violation)},
                        {"failure", r.failure},
                        {"max_joint_step", r.max_joint_step},
                        {"max_pos_err", pos},
                        {"max_rot_err", rot}};
  }
  j["replay"] = replay;
  j["metrics"] = Json::parse(to_json(e.metrics));

  const PlausibilityReport& p = e.plausibility;
  j["plausibility"] = Json{{"mode", to_string(p.mode)},
                           {"checked", p.checked},
                           {"frames_penetrating", p.frames_penetrating},
                           {"frames_resolved", p.frames_resolved},
                           {"frames_unresolved", p.frames_unresolved},
                           {"max_energy", p.max_energy},
                           {"max_depth_m", p.max_depth},
                           {"final_max_energy", p.final_max_energy},
                           {"warnings", p.warnings}};
  j["warnings"] = e.warnings;
  return j;
}

Json lineage_json(const EpisodeRecord& e) {
  const Lineage& l = e.lineage;
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["episode"] = e.id;
  j["source_clip"] = l.source_clip;
  j["manifest"] = l.manifest;
  j["augmentation"] = Json{{"type", l.augmentation}, {"params", l.params}};
  j["parent"] = l.parent ? Json(*l.parent) : Json();
  // Seeds are 64-bit; hex keeps them exact for every JSON reader.
  std::string hex = "0x";
  for (int s = 60; s >= 0; s -= 4) hex += hex_digit(static_cast<int>(l.seed >> s));
  j["seed"] = hex;
  return j;
}

void write_episode(const fs::path& episodes_dir, const EpisodeRecord& e) {
  fs::create_directories(episodes_dir);
  const fs::path final_dir = episodes_dir / e.id;
  const fs::path tmp = episodes_dir / ("." + e.id + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  write_text(tmp / "trajectory.jsonl", trajectory_to_jsonl(e.trajectory));
  for (const auto& [name, joints] : e.joints) {
    std::string lines;
    const auto& ee = e.ee.at(name);
    for (std::size_t t = 0; t < joints.size(); ++t) {
      Json q = Json::array();
      for (Eigen::Index i = 0; i < joints[t].size(); ++i) q.push_back(joints[t][i]);
      lines += Json{{"schema_version", kSchemaVersion}, {"t", t}, {"q", q}, {"ee", pose_to_json(ee[t])}}.dump() + "\n";
    }
    write_text(tmp / ("joints_" + name + ".jsonl"), lines);
  }
  if (e.object) {
    std::string lines;
    for (std::size_t t = 0; t < e.object->size(); ++t) {
      Json j = pose_to_json((*e.object)[t]);
      lines += Json{{"schema_version", kSchemaVersion}, {"t", t}, {"pose", j}}.dump() + "\n";
    }
    write_text(tmp / "object.jsonl", lines);
  }
  if (e.mesh) write_text(tmp / "object.obj", to_obj(*e.mesh));
  write_text(tmp / "report.json", dump(episode_report(e)));
  write_text(tmp / "lineage.json", dump(lineage_json(e)));

  fs::remove_all(final_dir);
  fs::rename(tmp, final_dir);
}

ClipOutcome process_clip(const fs::path& manifest, const PipelineConfig& config,
                         const Resources& resources, Stage last) {
  ClipOutcome out;
  out.manifest = manifest;
  out.clip_id = manifest.stem().string();
  try {
    Clip clip = load_clip(manifest);
    out.clip_id = clip.manifest.clip_id;
    const double fps = clip.manifest.fps;
    CanonicalClip canon = canonicalize_clip(std::move(clip), config);
    out.warnings = canon.warnings;
    if (last == Stage::canonicalize) return out;

    GripperTrajectory traj = retarget_clip(canon, config, resources.exemplars);
    PlausibilityReport plaus;
    if (last != Stage::retarget) plaus = check_plausibility(canon, traj, config);

    if (last == Stage::retarget || last == Stage::check) {
      PipelineConfig base_only = config;
      base_only.object_transforms = 0;
      base_only.mirror = false;
      base_only.substitutes = 0;
      out.episodes = augment_clip(canon, traj, plaus, base_only, resources, out.rejections);
    } else {
      out.episodes = augment_clip(canon, traj, plaus, config, resources, out.rejections);
    }
    for (EpisodeRecord& e : out.episodes) {
      if (last == Stage::replay) replay_episode(e, config.robots, config.ik);
      score_episode(e, fps, canon.clip.mesh, config.metric_samples);
    }
  } catch (const Error& e) {
    out.episodes.clear();
    out.error = e.what();
  }
  return out;
}

RunResult run_pipeline(const PipelineConfig& config, Stage last) {
  if (last == Stage::replay && config.robots.empty()) {
    throw ConfigError("no robot chain registered");
  }
  const Resources resources = load_resources(config);
  const fs::path episodes_dir = config.output_dir / "episodes";

  RunResult result;
  result.clips.resize(config.clips.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_error_mutex;
  std::optional<std::string> io_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < config.clips.size(); i = next++) {
      ClipOutcome o = process_clip(config.clips[i], config, resources, last);
      try {
        for (const EpisodeRecord& e : o.episodes) write_episode(episodes_dir, e);
      } catch (const std::exception& e) {
        const std::lock_guard lock(io_error_mutex);
        if (!io_error) io_error = e.what();
      }
      result.clips[i] = std::move(o);
    }
  };
  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(config.clips.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (io_error) throw Error("writing episodes failed: " + *io_error);

  Json summary;
  summary["schema_version"] = kSchemaVersion;
  std::size_t failed = 0, episodes = 0;
  Json robots = Json::object();
  for (const RobotSpec& r : config.robots) robots[r.name] = Json{{"feasible", 0}, {"infeasible", 0}};
  Json errors = Json::array(), rejections = Json::array(), warnings = Json::array();
  std::vector<std::pair<std::string, std::string>> rows;
  for (const ClipOutcome& o : result.clips) {
    if (o.error) {
      ++failed;
      errors.push_back(Json{{"clip", o.clip_id}, {"manifest", o.manifest.filename().string()}, {"error", *o.error}});
      continue;
    }
    for (const Rejection& r : o.rejections) rejections.push_back(Json{{"episode", r.episode}, {"reason", r.reason}});
    for (const EpisodeRecord& e : o.episodes) {
      ++episodes;
      for (const auto& [name, rep] : e.replay) {
        auto& slot = robots[name][rep.feasible ? "feasible" : "infeasible"];
        slot = slot.get<int>() + 1;
      }
      rows.emplace_back(e.id, csv_row(e.id, e.metrics));
    }
  }
  if (config.clips.empty()) warnings.push_back("no clips given");
  std::sort(rows.begin(), rows.end());

  summary["gate"] = "kinematic feasibility";
  summary["clips"] = Json{{"total", config.clips.size()}, {"succeeded", config.clips.size() - failed}, {"failed", failed}};
  summary["episodes"] = episodes;
  summary["robots"] = robots;
  summary["clip_errors"] = errors;
  summary["rejections"] = rejections;
  summary["warnings"] = warnings;
  result.summary = summary;

  result.metrics_csv = csv_header() + "\n";
  for (const auto& [id, row] : rows) result.metrics_csv += row + "\n";

  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "summary.json", dump(summary));
  write_text(config.output_dir / "metrics.csv", result.metrics_csv);
  result.exit_code = !config.clips.empty() && failed == config.clips.size() ? 1 : 0;
  return result;
}

}  // namespace hoi
