#include "hoi/nearest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hoi {

namespace {
constexpr int kLeafSize = 8;
}

KdTree3::KdTree3(PointSet points) : points_(std::move(points)) {
  if (points_.cols() == 0) throw Error("kd-tree over an empty point set");
  order_.resize(static_cast<std::size_t>(points_.cols()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  nodes_.reserve(static_cast<std::size_t>(2 * points_.cols() / kLeafSize + 1));
  build(0, static_cast<int>(points_.cols()), 0);
}

int KdTree3::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  // Split along the widest axis at the median.
  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
  Vec3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[static_cast<std::size_t>(i)]));
    hi = hi.cwiseMax(points_.col(order_[static_cast<std::size_t>(i)]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Eigen::Index a, Eigen::Index b) { return points_(axis, a) < points_(axis, b); });
  const double split = points_(axis, order_[static_cast<std::size_t>(mid)]);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void KdTree3::search(int node, const Vec3d& q, double& best, Eigen::Index& best_i) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const Eigen::Index idx = order_[static_cast<std::size_t>(i)];
      const double d = (points_.col(idx) - q).squaredNorm();
      if (d < best || (d == best && idx < best_i)) {
        best = d;
        best_i = idx;
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, q, best, best_i);
  if (diff * diff <= best) search(far, q, best, best_i);
}

std::pair<double, Eigen::Index> KdTree3::nearest(const Vec3d& q) const {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_i = -1;
  search(0, q, best, best_i);
  return {best, best_i};
}

Eigen::VectorXd nearest_distances(const PointSet& from, const PointSet& to) {
  const KdTree3 tree(to);
  Eigen::VectorXd d(from.cols());
  for (Eigen::Index i = 0; i < from.cols(); ++i) d[i] = std::sqrt(tree.nearest(from.col(i)).first);
  return d;
}

}  // namespace hoi
