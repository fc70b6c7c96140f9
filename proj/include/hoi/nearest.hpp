#ifndef HOI_NEAREST_HPP
#define HOI_NEAREST_HPP

#include <utility>
#include <vector>

#include "hoi/geom.hpp"

namespace hoi {

/// Static 3D kd-tree for exact nearest-neighbour queries.
class KdTree3 {
 public:
  explicit KdTree3(PointSet points);

  /// Squared distance to, and index of, the closest stored point.
  [[nodiscard]] std::pair<double, Eigen::Index> nearest(const Vec3d& q) const;
  [[nodiscard]] Eigen::Index size() const { return points_.cols(); }

 private:
  struct Node {
    int begin = 0, end = 0;
    int left = -1, right = -1;
    int axis = 0;
    double split = 0;
  };
  int build(int begin, int end, int depth);
  void search(int node, const Vec3d& q, double& best, Eigen::Index& best_i) const;

  PointSet points_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
};

/// Euclidean distance from every column of `from` to its nearest point in `to`.
[[nodiscard]] Eigen::VectorXd nearest_distances(const PointSet& from, const PointSet& to);

}  // namespace hoi

#endif  // HOI_NEAREST_HPP
