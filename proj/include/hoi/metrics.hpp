// Reconstruction and trajectory quality metrics, reported in cm, percent and
// degrees.

#ifndef HOI_METRICS_HPP
#define HOI_METRICS_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hoi/geom.hpp"

namespace hoi {

struct MetricReport {
  double chamfer_cm = 0;
  double f5_pct = 0;
  double f10_pct = 0;
  double jitter_cm_s2 = 0;
  double rel_trans_std_cm = 0;
  double rel_rot_std_deg = 0;
  double fps = 0;
  // Unset groups are written as null (JSON) or empty (CSV).
  bool has_geometry = true;  // chamfer and F-scores
  bool has_relative = true;  // relative-pose spread

  void validate() const;
};

/// F-score in percent; a point counts when strictly closer than `threshold`.
[[nodiscard]] double fscore(const PointSet& pred, const PointSet& gt, double threshold);

/// Mean second-difference magnitude times fps^2, in cm/s^2.
[[nodiscard]] double hand_jitter(std::span<const Vec3d> positions, double fps);

struct RelPoseStd {
  double trans_cm = 0;  // sqrt of the trace of the translation covariance
  double rot_deg = 0;   // RMS geodesic angle to the chordal mean
};

/// Spread of T_rel(t) = T_h(t)^-1 T_o(t).
[[nodiscard]] RelPoseStd rel_pose_consistency(std::span<const Posed> hand,
                                              std::span<const Posed> object);

/// Chordal L2 mean: projection of the arithmetic mean matrix onto SO(3).
[[nodiscard]] Rot3d chordal_mean(std::span<const Rot3d> rotations);

[[nodiscard]] std::string to_json(const MetricReport& r);
[[nodiscard]] std::string csv_header();
[[nodiscard]] std::string csv_row(const std::string& id, const MetricReport& r);

}  // namespace hoi

#endif  // HOI_METRICS_HPP
