// Serial kinematic chains: URDF-subset parsing, forward kinematics, damped
// least-squares IK and seeded per-frame trajectory replay.

#ifndef HOI_KINEMATICS_HPP
#define HOI_KINEMATICS_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hoi/geom.hpp"

namespace hoi {

enum class JointType { revolute, prismatic, fixed };

struct Joint {
  std::string name;
  JointType type = JointType::fixed;
  Posed origin;  // parent link -> joint frame
  Vec3d axis = Vec3d::UnitZ();
  double lower = 0, upper = 0;
};

struct KinematicChain {
  std::vector<Joint> joints;  // root to EE
  Posed ee_offset;
  std::vector<std::string> warnings;

  [[nodiscard]] int dof() const;
  [[nodiscard]] Eigen::VectorXd lower() const;
  [[nodiscard]] Eigen::VectorXd upper() const;
  [[nodiscard]] std::vector<JointType> movable_types() const;
  [[nodiscard]] bool within_limits(const Eigen::VectorXd& q, double tol = 1e-9) const;
  [[nodiscard]] Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;
};

using JointConfig = Eigen::VectorXd;

struct ParseOptions {
  std::string root;  // empty: the unique link without a parent
  std::string ee;    // empty: the unique leaf link
  bool fold_fixed = true;
};

/// Chain dialect: robot/link/joint with parent, child, origin (xyz, rpy),
/// axis and limit (lower, upper). Unknown elements are reported in
/// `warnings`; malformed XML errors carry the line number.
[[nodiscard]] KinematicChain parse_chain(const std::string& document, const ParseOptions& opts);
[[nodiscard]] KinematicChain load_chain(const std::string& path, const ParseOptions& opts);

/// Throws when q is outside the joint limits.
[[nodiscard]] Posed fk(const KinematicChain& chain, const JointConfig& q);

/// Geometric Jacobian in the base frame; rows are linear then angular velocity.
[[nodiscard]] Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const KinematicChain& chain,
                                                                const JointConfig& q);

/// Capsule (segment plus radius) attached to the frame after a movable joint
/// (`link` = movable joint index, -1 = base).
struct Capsule {
  int link = -1;
  Vec3d a = Vec3d::Zero(), b = Vec3d::Zero();
  double radius = 0;
};

/// Sphere-capsule self-collision stand-in; empty means disabled.
struct SelfCollisionModel {
  struct Sphere {
    int link = -1;
    Vec3d center = Vec3d::Zero();
    double radius = 0;
  };
  std::vector<std::pair<Sphere, Capsule>> pairs;

  /// Largest penetration depth over all pairs (<= 0 means collision free).
  [[nodiscard]] double max_penetration(const KinematicChain& chain, const JointConfig& q) const;
};

struct IkOptions {
  int max_iterations = 200;
  double damping = 0.05;
  double pos_tol = 1e-5;          // m
  double rot_tol = 1e-4;          // rad
  double rotation_weight = 0.5;   // m per rad; 0 gives position-only IK
  double max_update = 0.5;        // per-iteration joint update cap
  double rate_cap_revolute = 0.2;   // rad per frame (replay)
  double rate_cap_prismatic = 0.05; // m per frame (replay)
  SelfCollisionModel self_collision;
};

struct IkResult {
  JointConfig q;
  double pos_err = 0;
  double rot_err = 0;
  int iterations = 0;
  int saturated = 0;  // joints at a limit
  bool converged = false;
};

class IkFailure : public Error {
 public:
  IkFailure(const std::string& what, IkResult best) : Error(what), best_(std::move(best)) {}
  [[nodiscard]] const IkResult& best() const { return best_; }

 private:
  IkResult best_;
};

/// Throws IkFailure (carrying the best iterate) on non-convergence.
[[nodiscard]] IkResult ik_solve(const KinematicChain& chain, const Posed& target,
                                const JointConfig& seed, const IkOptions& opts);

struct ReplayFrame {
  double pos_err = 0, rot_err = 0;
  int iterations = 0;
  int saturated = 0;
  double max_step = 0;       // largest |dq| against the previous frame
  double max_step_ratio = 0; // largest |dq| / cap
  bool converged = false;
};

struct ReplayReport {
  std::vector<ReplayFrame> frames;
  bool feasible = false;
  std::optional<int> failed_frame;
  std::optional<int> first_rate_violation;
  std::string failure;
  double max_joint_step = 0;
};

struct ReplayResult {
  std::vector<JointConfig> joints;
  ReplayReport report;
};

/// Frame t is seeded with the solution of frame t-1 (q0 for the first).
/// A first-frame failure throws; later failures truncate the output.
[[nodiscard]] ReplayResult replay_trajectory(const KinematicChain& chain,
                                             std::span<const Posed> targets,
                                             const JointConfig& q0, const IkOptions& opts);

}  // namespace hoi

#endif  // HOI_KINEMATICS_HPP
