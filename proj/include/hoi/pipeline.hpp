// Batch pipeline: canonicalize -> retarget -> penetration check -> augment
// -> replay -> metrics, with one output directory per episode.

#ifndef HOI_PIPELINE_HPP
#define HOI_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoi/augment.hpp"
#include "hoi/canonical.hpp"
#include "hoi/hand.hpp"
#include "hoi/io.hpp"
#include "hoi/kinematics.hpp"
#include "hoi/metrics.hpp"
#include "hoi/plausibility.hpp"

namespace hoi {

enum class PlausibilityMode { off, flag, resolve };

struct RobotSpec {
  std::string name;
  fs::path chain_path;
  KinematicChain chain;
  JointConfig q0;
  Posed base;  // robot base in the canonical frame
};

struct PipelineConfig {
  // canonical
  std::optional<Vec3d> up;
  std::optional<Vec3d> approach;
  std::optional<int> t0;
  double salient_distance = 0.15;

  // retarget
  std::optional<fs::path> exemplars;
  RetargetConfig retarget;

  // plausibility
  PlausibilityMode plausibility = PlausibilityMode::flag;
  TsdfOptions tsdf;
  ResolveOptions resolve;

  // augment
  int object_transforms = 0;
  AugmentSampler sampler;
  bool mirror = false;
  MirrorSpec mirror_spec;
  Vec3d task_axis = Vec3d::UnitZ();
  std::optional<fs::path> library;
  std::size_t substitutes = 0;  // top-k retrieved assets, 0 disables
  SimilarityWeights weights;

  // metrics
  int metric_samples = 2000;

  IkOptions ik;
  std::vector<RobotSpec> robots;

  fs::path output_dir = "out";
  std::vector<fs::path> clips;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Key/value file with [sections]; relative paths resolve against
/// `base_dir`. Unknown sections or keys are a ConfigError.
[[nodiscard]] PipelineConfig parse_config(const std::string& text, const fs::path& base_dir);
[[nodiscard]] PipelineConfig load_config(const fs::path& path);

/// Keeps only the named robots, in the given order.
void select_robots(PipelineConfig& config, const std::vector<std::string>& names);

/// Clip expressed in the canonical frame.
struct CanonicalClip {
  Clip clip;
  CanonicalTransform transform;
  std::vector<HandFrame> hand;
  std::optional<std::vector<Posed>> object;
  std::vector<std::string> warnings;
};

/// Up and approach come from the config, then the anchors file; the approach
/// otherwise defaults to the near-contact wrist->object direction.
[[nodiscard]] CanonicalClip canonicalize_clip(Clip clip, const PipelineConfig& config);

/// Transform, t0 and the lateral hint, for reports.
[[nodiscard]] Json canonical_json(const CanonicalClip& clip);

[[nodiscard]] GripperTrajectory retarget_clip(const CanonicalClip& clip, const PipelineConfig& config,
                                              std::span<const GestureExemplar> exemplars);

struct PlausibilityReport {
  PlausibilityMode mode = PlausibilityMode::off;
  bool checked = false;
  int frames_penetrating = 0;
  int frames_resolved = 0;
  int frames_unresolved = 0;
  double max_energy = 0;     // before resolution
  double max_depth = 0;      // m, deepest keypoint before resolution
  double final_max_energy = 0;
  std::vector<std::string> warnings;
};

/// Scores the hand keypoints against the object TSDF on every frame. In
/// resolve mode the gripper poses of penetrating frames are corrected.
[[nodiscard]] PlausibilityReport check_plausibility(const CanonicalClip& clip, GripperTrajectory& traj,
                                                    const PipelineConfig& config);

struct Lineage {
  std::string source_clip;
  std::string manifest;  // file name only
  std::string augmentation = "none";
  Json params = Json::object();
  std::optional<std::string> parent;
  std::uint64_t seed = 0;
};

struct EpisodeRecord {
  std::string id;
  GripperTrajectory trajectory;
  std::optional<std::vector<Posed>> object;  // canonical frame
  std::optional<TriMesh> mesh;                // object frame
  std::vector<Segment> segments;
  Json canonical = Json::object();
  std::map<std::string, std::vector<JointConfig>> joints;
  std::map<std::string, std::vector<Posed>> ee;
  std::map<std::string, ReplayReport> replay;
  MetricReport metrics;
  PlausibilityReport plausibility;
  Lineage lineage;
  std::vector<std::string> warnings;
};

struct Rejection {
  std::string episode;
  std::string reason;
};

struct Resources {
  std::vector<GestureExemplar> exemplars;
  std::vector<ObjectAsset> library;
};

[[nodiscard]] Resources load_resources(const PipelineConfig& config);

/// Base episode plus the configured augmentations; rejected augmentations
/// are appended to `rejections`.
[[nodiscard]] std::vector<EpisodeRecord> augment_clip(const CanonicalClip& clip,
                                                      const GripperTrajectory& base,
                                                      const PlausibilityReport& plausibility,
                                                      const PipelineConfig& config,
                                                      const Resources& resources,
                                                      std::vector<Rejection>& rejections);

/// Targets are base^-1 T_g. A first-frame failure is recorded as infeasible.
void replay_episode(EpisodeRecord& episode, std::span<const RobotSpec> robots, const IkOptions& ik);

void score_episode(EpisodeRecord& episode, double fps, const std::optional<TriMesh>& source_mesh,
                   int samples);

[[nodiscard]] Json episode_report(const EpisodeRecord& episode);
[[nodiscard]] Json lineage_json(const EpisodeRecord& episode);

/// Writes into a sibling temporary directory, then renames it into place.
void write_episode(const fs::path& episodes_dir, const EpisodeRecord& episode);

/// Seed for the k-th augmentation of a clip.
[[nodiscard]] std::uint64_t episode_seed(std::uint64_t seed, const std::string& clip_id, int k);

struct ClipOutcome {
  std::string clip_id;
  fs::path manifest;
  std::vector<EpisodeRecord> episodes;
  std::vector<Rejection> rejections;
  std::vector<std::string> warnings;
  std::optional<std::string> error;
};

enum class Stage { canonicalize, retarget, check, augment, replay };

/// Runs one clip up to `last`. Errors are captured in the outcome.
[[nodiscard]] ClipOutcome process_clip(const fs::path& manifest, const PipelineConfig& config,
                                       const Resources& resources, Stage last = Stage::replay);

struct RunResult {
  std::vector<ClipOutcome> clips;
  Json summary;
  std::string metrics_csv;
  int exit_code = 0;
};

/// Processes every configured clip (up to `jobs` in parallel), writes
/// episodes, summary.json and metrics.csv under the output directory.
[[nodiscard]] RunResult run_pipeline(const PipelineConfig& config, Stage last = Stage::replay);

}  // namespace hoi

#endif  // HOI_PIPELINE_HPP
