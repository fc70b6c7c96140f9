// Rigid-body primitives shared by every stage: SO(3)/SE(3) value types,
// exp/log maps, geodesic distances and axis-aligned boxes.
//
// All types are immutable values templated on the scalar type. Rotations are
// stored as matrices; quaternions only appear at I/O boundaries.

#ifndef HOI_GEOM_HPP
#define HOI_GEOM_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "hoi/error.hpp"

namespace hoi {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

inline constexpr double kRotationTolerance = 1e-9;

template <typename Scalar>
[[nodiscard]] Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> s;
  // clang-format off
  s << Scalar(0), -v.z(),     v.y(),
       v.z(),     Scalar(0), -v.x(),
      -v.y(),     v.x(),      Scalar(0);
  // clang-format on
  return s;
}

template <typename Scalar>
[[nodiscard]] Vec3<Scalar> vee(const Mat3<Scalar>& m) {
  return Vec3<Scalar>(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) /
         Scalar(2);
}

/// Proper rotation matrix. Construction from arbitrary data goes through
/// `from_matrix` (validated), `project` (nearest rotation) or `from_quaternion`.
template <typename Scalar>
class Rot3 {
 public:
  using Vector = Vec3<Scalar>;
  using Matrix = Mat3<Scalar>;

  Rot3() : m_(Matrix::Identity()) {}

  static Rot3 identity() { return Rot3(); }

  /// Wraps `m` after checking orthonormality and det = +1 within `tol`.
  static Rot3 from_matrix(const Matrix& m, Scalar tol = Scalar(kRotationTolerance)) {
    if (!m.allFinite()) throw Error("rotation matrix has non-finite entries");
    if ((m.transpose() * m - Matrix::Identity()).cwiseAbs().maxCoeff() > tol ||
        std::abs(m.determinant() - Scalar(1)) > tol) {
      throw Error("matrix is not a proper rotation");
    }
    return Rot3(m);
  }

  /// Nearest proper rotation in Frobenius norm.
  static Rot3 project(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix d = Matrix::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < Scalar(0)) {
      d(2, 2) = Scalar(-1);
    }
    return Rot3(svd.matrixU() * d * svd.matrixV().transpose());
  }

  /// Quaternion ingest (w, x, y, z). Norms within 1e-3 of one are
  /// renormalized, anything further off is rejected.
  static Rot3 from_quaternion(Scalar w, Scalar x, Scalar y, Scalar z) {
    Eigen::Quaternion<Scalar> q(w, x, y, z);
    const Scalar n = q.norm();
    if (!std::isfinite(n) || std::abs(n - Scalar(1)) > Scalar(1e-3)) {
      throw Error("quaternion norm deviates from 1 by more than 1e-3");
    }
    q.coeffs() /= n;
    return Rot3(q.toRotationMatrix());
  }

  static Rot3 exp(const Vector& omega) {
    const Scalar theta = omega.norm();
    const Matrix k = skew<Scalar>(omega);
    if (theta < Scalar(1e-8)) {
      // second-order Taylor
      return Rot3(Matrix::Identity() + k + k * k / Scalar(2));
    }
    const Scalar a = std::sin(theta) / theta;
    const Scalar b = (Scalar(1) - std::cos(theta)) / (theta * theta);
    return Rot3(Matrix::Identity() + a * k + b * k * k);
  }

  static Rot3 about_axis(const Vector& axis, Scalar angle) {
    return exp(axis.normalized() * angle);
  }
  static Rot3 rot_x(Scalar a) { return about_axis(Vector::UnitX(), a); }
  static Rot3 rot_y(Scalar a) { return about_axis(Vector::UnitY(), a); }
  static Rot3 rot_z(Scalar a) { return about_axis(Vector::UnitZ(), a); }

  /// Fixed-axis roll/pitch/yaw: Rz(yaw) * Ry(pitch) * Rx(roll).
  static Rot3 from_rpy(Scalar roll, Scalar pitch, Scalar yaw) {
    return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
  }

  /// Axis-angle vector with angle in [0, pi].
  [[nodiscard]] Vector log() const {
    const Vector w = vee<Scalar>(m_);
    const Scalar s = w.norm();
    const Scalar c = std::clamp((m_.trace() - Scalar(1)) / Scalar(2), Scalar(-1), Scalar(1));
    const Scalar theta = std::atan2(s, c);
    if (c > Scalar(0)) {
      if (s < Scalar(1e-7)) return w;  // near identity: sin(theta) ~ theta
      return theta / s * w;
    }
    // Past pi/2 the antisymmetric part loses relative precision; recover the
    // axis from the symmetric part (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
    const Matrix sym = (m_ + m_.transpose()) / Scalar(2) - c * Matrix::Identity();
    Eigen::Index i = 0;
    sym.diagonal().maxCoeff(&i);
    Vector axis = sym.col(i).normalized();
    if (axis.dot(w) < Scalar(0)) axis = -axis;
    return theta * axis;
  }

  [[nodiscard]] Scalar angle() const { return log().norm(); }

  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] Vector col(int i) const { return m_.col(i); }
  [[nodiscard]] Rot3 inverse() const { return Rot3(m_.transpose()); }
  [[nodiscard]] Eigen::Quaternion<Scalar> quaternion() const {
    return Eigen::Quaternion<Scalar>(m_).normalized();
  }

  [[nodiscard]] Rot3 operator*(const Rot3& o) const { return Rot3(m_ * o.m_); }
  [[nodiscard]] Vector operator*(const Vector& v) const { return m_ * v; }

  template <typename Other>
  [[nodiscard]] Rot3<Other> cast() const {
    return Rot3<Other>::unchecked(m_.template cast<Other>());
  }

  /// No validation; for products of matrices already known to be rotations.
  static Rot3 unchecked(const Matrix& m) { return Rot3(m); }

 private:
  explicit Rot3(const Matrix& m) : m_(m) {}
  Matrix m_;
};

template <typename Scalar>
[[nodiscard]] Vec3<Scalar> so3_log(const Rot3<Scalar>& r) {
  return r.log();
}

/// Spherical interpolation between two rotations, `s` in [0, 1].
template <typename Scalar>
[[nodiscard]] Rot3<Scalar> slerp(const Rot3<Scalar>& a, const Rot3<Scalar>& b, Scalar s) {
  return a * Rot3<Scalar>::exp(s * (a.inverse() * b).log());
}

/// Rigid transform x -> rot * x + trans.
template <typename Scalar>
struct Pose {
  using Vector = Vec3<Scalar>;

  Rot3<Scalar> rot;
  Vector trans = Vector::Zero();

  Pose() = default;
  Pose(const Rot3<Scalar>& r, const Vector& t) : rot(r), trans(t) {}

  static Pose identity() { return Pose(); }
  static Pose translation(const Vector& t) { return Pose(Rot3<Scalar>(), t); }
  static Pose rotation(const Rot3<Scalar>& r) { return Pose(r, Vector::Zero()); }

  [[nodiscard]] Pose inverse() const {
    const Rot3<Scalar> ri = rot.inverse();
    return Pose(ri, -(ri * trans));
  }
  [[nodiscard]] Pose operator*(const Pose& o) const {
    return Pose(rot * o.rot, rot * o.trans + trans);
  }
  [[nodiscard]] Vector operator*(const Vector& p) const { return rot * p + trans; }
  [[nodiscard]] Points3<Scalar> operator*(const Points3<Scalar>& pts) const {
    return (rot.matrix() * pts).colwise() + trans;
  }
  [[nodiscard]] Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> h = Eigen::Matrix<Scalar, 4, 4>::Identity();
    h.template topLeftCorner<3, 3>() = rot.matrix();
    h.template topRightCorner<3, 1>() = trans;
    return h;
  }
};

template <typename Scalar>
struct GeodesicError {
  Scalar trans_err;
  Scalar rot_err;
};

template <typename Scalar>
[[nodiscard]] GeodesicError<Scalar> pose_geodesic(const Pose<Scalar>& a,
                                                  const Pose<Scalar>& b) {
  return {(a.trans - b.trans).norm(), (a.rot.inverse() * b.rot).log().norm()};
}

/// Linear translation / spherical rotation blend.
template <typename Scalar>
[[nodiscard]] Pose<Scalar> interpolate(const Pose<Scalar>& a, const Pose<Scalar>& b,
                                       Scalar s) {
  return Pose<Scalar>(slerp(a.rot, b.rot, s), (Scalar(1) - s) * a.trans + s * b.trans);
}

template <typename Scalar>
struct Aabb {
  using Vector = Vec3<Scalar>;
  Vector min = Vector::Zero();
  Vector max = Vector::Zero();

  Aabb() = default;
  Aabb(const Vector& lo, const Vector& hi) : min(lo), max(hi) {
    if ((lo.array() > hi.array()).any()) throw Error("aabb min exceeds max");
  }

  static Aabb from_points(const Points3<Scalar>& pts) {
    if (pts.cols() == 0) throw Error("aabb of empty point set");
    return Aabb(pts.rowwise().minCoeff(), pts.rowwise().maxCoeff());
  }

  [[nodiscard]] Vector extent() const { return max - min; }
  [[nodiscard]] Vector center() const { return (min + max) / Scalar(2); }
  [[nodiscard]] Scalar diagonal() const { return extent().norm(); }
  [[nodiscard]] Scalar volume() const { return extent().prod(); }
  [[nodiscard]] bool contains(const Vector& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

/// Intersection over union of box volumes; a zero-volume union yields 0.
template <typename Scalar>
[[nodiscard]] Scalar aabb_iou(const Aabb<Scalar>& a, const Aabb<Scalar>& b) {
  const Vec3<Scalar> lo = a.min.cwiseMax(b.min);
  const Vec3<Scalar> hi = a.max.cwiseMin(b.max);
  const Scalar inter = (hi - lo).cwiseMax(Vec3<Scalar>::Zero()).prod();
  const Scalar uni = a.volume() + b.volume() - inter;
  if (!(uni > Scalar(0))) return Scalar(0);
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using PointSet = Points3<double>;
using Rot3d = Rot3<double>;
using Posed = Pose<double>;
using Aabbd = Aabb<double>;

inline PointSet to_point_set(const std::vector<Vec3d>& pts) {
  PointSet out(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
  return out;
}

}  // namespace hoi

#endif  // HOI_GEOM_HPP
