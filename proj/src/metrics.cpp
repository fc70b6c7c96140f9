#include "hoi/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "hoi/nearest.hpp"

namespace hoi {

void MetricReport::validate() const {
  for (double v : {chamfer_cm, f5_pct, f10_pct, jitter_cm_s2, rel_trans_std_cm, rel_rot_std_deg, fps}) {
    if (!(v >= 0)) throw Error("metric values must be non-negative");
  }
  if (f5_pct > 100 || f10_pct > 100) throw Error("F-score above 100%");
}

double fscore(const PointSet& pred, const PointSet& gt, double threshold) {
  if (pred.cols() == 0 || gt.cols() == 0) throw Error("F-score of an empty point set");
  if (!(threshold > 0)) throw Error("F-score threshold must be positive");
  const Eigen::VectorXd dp = nearest_distances(pred, gt);
  const Eigen::VectorXd dg = nearest_distances(gt, pred);
  const double precision = static_cast<double>((dp.array() < threshold).count()) / static_cast<double>(dp.size());
  const double recall = static_cast<double>((dg.array() < threshold).count()) / static_cast<double>(dg.size());
  if (precision + recall == 0) return 0;
  return 200 * precision * recall / (precision + recall);
}

double hand_jitter(std::span<const Vec3d> positions, double fps) {
  if (positions.size() < 3) throw Error("jitter needs at least three frames");
  if (!(fps > 0)) throw Error("fps must be positive");
  double sum = 0;
  for (std::size_t t = 1; t + 1 < positions.size(); ++t) {
    sum += (positions[t + 1] - 2 * positions[t] + positions[t - 1]).norm();
  }
  return 100 * sum / static_cast<double>(positions.size() - 2) * fps * fps;
}

Rot3d chordal_mean(std::span<const Rot3d> rotations) {
  if (rotations.empty()) throw Error("mean of no rotations");
  Mat3d sum = Mat3d::Zero();
  for (const Rot3d& r : rotations) sum += r.matrix();
  return Rot3d::project(sum);
}

RelPoseStd rel_pose_consistency(std::span<const Posed> hand, std::span<const Posed> object) {
  if (hand.size() != object.size()) throw Error("hand and object streams differ in length");
  if (hand.size() < 2) throw Error("relative-pose spread needs at least two frames");
  const auto n = static_cast<double>(hand.size());
  std::vector<Rot3d> rots;
  rots.reserve(hand.size());
  Vec3d mean = Vec3d::Zero();
  std::vector<Vec3d> trans;
  trans.reserve(hand.size());
  for (std::size_t t = 0; t < hand.size(); ++t) {
    const Posed rel = hand[t].inverse() * object[t];
    rots.push_back(rel.rot);
    trans.push_back(rel.trans);
    mean += rel.trans;
  }
  mean /= n;
  double var = 0;
  for (const Vec3d& p : trans) var += (p - mean).squaredNorm();
  const Rot3d ref = chordal_mean(rots);
  double ang = 0;
  for (const Rot3d& r : rots) {
    const double a = (ref.inverse() * r).angle();
    ang += a * a;
  }
  return {100 * std::sqrt(var / n), std::sqrt(ang / n) * 180 / std::numbers::pi};
}

std::string to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  auto opt = [](bool has, double v) { return has ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
  j["chamfer_cm"] = opt(r.has_geometry, r.chamfer_cm);
  j["f5_pct"] = opt(r.has_geometry, r.f5_pct);
  j["f10_pct"] = opt(r.has_geometry, r.f10_pct);
  j["jitter_cm_s2"] = r.jitter_cm_s2;
  j["rel_trans_std_cm"] = opt(r.has_relative, r.rel_trans_std_cm);
  j["rel_rot_std_deg"] = opt(r.has_relative, r.rel_rot_std_deg);
  j["fps"] = r.fps;
  return j.dump(2);
}

std::string csv_header() {
  return "episode,chamfer_cm,f5_pct,f10_pct,jitter_cm_s2,rel_trans_std_cm,rel_rot_std_deg,fps";
}

std::string csv_row(const std::string& id, const MetricReport& r) {
  std::string row = id;
  auto cell = [&row](bool has, double v) {
    row += ',';
    if (!has) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    row += buf;
  };
  cell(r.has_geometry, r.chamfer_cm);
  cell(r.has_geometry, r.f5_pct);
  cell(r.has_geometry, r.f10_pct);
  cell(true, r.jitter_cm_s2);
  cell(r.has_relative, r.rel_trans_std_cm);
  cell(r.has_relative, r.rel_rot_std_deg);
  cell(true, r.fps);
  return row;
}

}  // namespace hoi
