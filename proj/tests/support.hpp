// Shared helpers for the test binaries: seeded random rigid transforms and
// approximate comparisons.

#ifndef HOI_TESTS_SUPPORT_HPP
#define HOI_TESTS_SUPPORT_HPP

#include <cmath>
#include <numbers>
#include <random>

#include "hoi/geom.hpp"
#include "hoi/hand.hpp"

namespace hoi::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3d random_vec(std::mt19937_64& rng, double scale = 1.0) {
  return Vec3d(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

// Uniform on SO(3) via a normalized Gaussian quaternion.
inline Rot3d random_rot(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Rot3d::project(q.toRotationMatrix());
}

inline Posed random_pose(std::mt19937_64& rng, double scale = 1.0) {
  return Posed(random_rot(rng), random_vec(rng, scale));
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline double pose_diff(const Posed& a, const Posed& b) {
  return std::max(max_abs(a.rot.matrix() - b.rot.matrix()), max_abs(a.trans - b.trans));
}

// Rodrigues formula written out independently of Rot3::exp.
inline Mat3d rodrigues(const Vec3d& w) {
  const double th = w.norm();
  if (th == 0) return Mat3d::Identity();
  const Vec3d k = w / th;
  Mat3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3d::Identity() + std::sin(th) * K + (1 - std::cos(th)) * K * K;
}


// Right hand in its own frame: palm in the xy plane, fingers along +y, palm
// normal +z. `curl` in [0, 1] bends the four fingers toward +z.
inline HandFrame make_hand(const Posed& placement, double curl = 0.0) {
  HandFrame h;
  auto& k = h.keypoints;
  k[0] = Vec3d(0, 0, 0);
  k[1] = Vec3d(-0.025, 0.02, 0.005);
  k[2] = Vec3d(-0.045, 0.04, 0.01);
  k[3] = Vec3d(-0.055, 0.065, 0.015);
  k[4] = Vec3d(-0.06, 0.085, 0.02);
  const double xs[4] = {-0.03, -0.01, 0.01, 0.03};
  for (int f = 0; f < 4; ++f) {
    const int base = 5 + 4 * f;
    k[static_cast<std::size_t>(base)] = Vec3d(xs[f], 0.085, 0);
    double ang = 0;
    for (int j = 1; j < 4; ++j) {
      ang += curl * 0.5;
      const Vec3d step(0, 0.028 * std::cos(ang), 0.028 * std::sin(ang));
      k[static_cast<std::size_t>(base + j)] = k[static_cast<std::size_t>(base + j - 1)] + step;
    }
  }
  return h.transformed(placement);
}

}  // namespace hoi::test

#endif  // HOI_TESTS_SUPPORT_HPP
