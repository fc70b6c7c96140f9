// On-disk formats: clip manifests, JSONL streams, episode records.
//
// Poses are {"t": [x, y, z], "q": [w, x, y, z]} in meters; every JSONL line
// and every JSON document carries "schema_version".

#ifndef HOI_IO_HPP
#define HOI_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoi/augment.hpp"
#include "hoi/canonical.hpp"
#include "hoi/geom.hpp"
#include "hoi/hand.hpp"
#include "hoi/mesh.hpp"

namespace hoi {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

[[nodiscard]] Json pose_to_json(const Posed& p);
/// Rejects quaternions whose norm is off by more than 1e-3.
[[nodiscard]] Posed pose_from_json(const Json& j);
[[nodiscard]] Json vec_to_json(const Vec3d& v);
[[nodiscard]] Vec3d vec_from_json(const Json& j);

/// Throws unless `j` carries the supported schema version.
void check_schema(const Json& j, const std::string& where);

[[nodiscard]] Json read_json(const fs::path& path);
/// One object per non-empty line, schema-checked; errors name file and line.
[[nodiscard]] std::vector<Json> read_jsonl(const fs::path& path);

struct ClipManifest {
  std::string clip_id;
  double fps = 30;
  CameraModel camera;
  Posed cam_to_world;
  fs::path hand_path;
  std::optional<fs::path> object_path;
  std::optional<fs::path> keypoints_path;
  std::optional<fs::path> mesh_path;
  std::optional<fs::path> anchors_path;
  std::string notes;
  fs::path source;  // manifest file
};

/// Paths resolve relative to the manifest; all referenced files must exist.
[[nodiscard]] ClipManifest load_manifest(const fs::path& path);

struct Clip {
  ClipManifest manifest;
  std::vector<HandFrame> hand;          // camera frame
  std::optional<std::vector<Posed>> object;  // camera frame
  std::optional<KeypointTrack> keypoints;
  std::optional<TriMesh> mesh;          // object frame
  std::optional<BodyAnchors> anchors;   // world frame

  [[nodiscard]] std::size_t size() const { return hand.size(); }
};

/// Loads and validates every stream; stream lengths must agree.
[[nodiscard]] Clip load_clip(const fs::path& manifest_path);

[[nodiscard]] std::vector<GestureExemplar> load_exemplars(const fs::path& path);

/// JSON array of {id, mesh_path, canonical_pose, category, embedding}.
[[nodiscard]] std::vector<ObjectAsset> load_asset_library(const fs::path& path);

/// One line per frame: pose, command, width, interpolated flag.
[[nodiscard]] std::string trajectory_to_jsonl(const GripperTrajectory& traj);
[[nodiscard]] GripperTrajectory load_trajectory(const fs::path& path);

/// Serializes `j` with two-space indentation and a trailing newline.
[[nodiscard]] std::string dump(const Json& j);
void write_text(const fs::path& path, const std::string& text);

}  // namespace hoi

#endif  // HOI_IO_HPP
