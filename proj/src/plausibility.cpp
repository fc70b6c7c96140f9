#include "hoi/plausibility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hoi {

namespace {

// Parity votes from axis-aligned rays cast toward +axis through every voxel
// row. Adds one vote per axis for which the voxel lies inside.
void add_parity_votes(const TriMesh& mesh, const TsdfGrid& g, int axis,
                      std::vector<std::uint8_t>& votes) {
  const int b = (axis + 1) % 3, c = (axis + 2) % 3;
  const int nb = g.dims[b], nc = g.dims[c], na = g.dims[axis];
  std::vector<std::vector<double>> hits(static_cast<std::size_t>(nb) * nc);
  // Rays are nudged off the lattice so they never pass exactly through a
  // shared edge or vertex, which would count one crossing twice.
  const double nudge_b = 0.6180339887e-7 * g.voxel, nudge_c = 0.4142135623e-7 * g.voxel;

  for (Eigen::Index f = 0; f < mesh.triangles.cols(); ++f) {
    const Vec3d p0 = mesh.vertices.col(mesh.triangles(0, f));
    const Vec3d p1 = mesh.vertices.col(mesh.triangles(1, f));
    const Vec3d p2 = mesh.vertices.col(mesh.triangles(2, f));
    const double area = (p1[b] - p0[b]) * (p2[c] - p0[c]) - (p2[b] - p0[b]) * (p1[c] - p0[c]);
    if (std::abs(area) < 1e-18) continue;  // parallel to the ray

    const double lo_b = std::min({p0[b], p1[b], p2[b]}), hi_b = std::max({p0[b], p1[b], p2[b]});
    const double lo_c = std::min({p0[c], p1[c], p2[c]}), hi_c = std::max({p0[c], p1[c], p2[c]});
    const int jb0 = std::max(0, static_cast<int>(std::ceil((lo_b - g.origin[b]) / g.voxel)));
    const int jb1 = std::min(nb - 1, static_cast<int>(std::floor((hi_b - g.origin[b]) / g.voxel)));
    const int jc0 = std::max(0, static_cast<int>(std::ceil((lo_c - g.origin[c]) / g.voxel)));
    const int jc1 = std::min(nc - 1, static_cast<int>(std::floor((hi_c - g.origin[c]) / g.voxel)));
    for (int jc = jc0; jc <= jc1; ++jc) {
      const double yc = g.origin[c] + g.voxel * jc + nudge_c;
      for (int jb = jb0; jb <= jb1; ++jb) {
        const double yb = g.origin[b] + g.voxel * jb + nudge_b;
        // 2D barycentrics of (yb, yc) in the projected triangle.
        const double w1 = ((yb - p0[b]) * (p2[c] - p0[c]) - (p2[b] - p0[b]) * (yc - p0[c])) / area;
        const double w2 = ((p1[b] - p0[b]) * (yc - p0[c]) - (yb - p0[b]) * (p1[c] - p0[c])) / area;
        const double w0 = 1 - w1 - w2;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        hits[static_cast<std::size_t>(jb) + static_cast<std::size_t>(nb) * jc].push_back(
            w0 * p0[axis] + w1 * p1[axis] + w2 * p2[axis]);
      }
    }
  }

  Eigen::Vector3i idx;
  for (int jc = 0; jc < nc; ++jc) {
    for (int jb = 0; jb < nb; ++jb) {
      auto& row = hits[static_cast<std::size_t>(jb) + static_cast<std::size_t>(nb) * jc];
      if (row.empty()) continue;
      std::sort(row.begin(), row.end());
      idx[b] = jb;
      idx[c] = jc;
      std::size_t first_ahead = 0;
      for (int ja = 0; ja < na; ++ja) {
        const double ya = g.origin[axis] + g.voxel * ja;
        while (first_ahead < row.size() && row[first_ahead] <= ya) ++first_ahead;
        if ((row.size() - first_ahead) % 2 == 1) {
          idx[axis] = ja;
          ++votes[static_cast<std::size_t>(g.index(idx.x(), idx.y(), idx.z()))];
        }
      }
    }
  }
}

}  // namespace

TsdfGrid build_tsdf(const TriMesh& mesh, const TsdfOptions& opts) {
  if (!mesh.watertight) throw Error("sign undefined: mesh is not watertight");
  if (!(opts.voxel > 0)) throw Error("voxel size must be positive");
  if (opts.trunc < opts.voxel) throw Error("truncation must be at least one voxel");
  if (opts.padding < 0) throw Error("padding must be non-negative");

  TsdfGrid g;
  g.voxel = opts.voxel;
  g.trunc = opts.trunc;
  const Aabbd box = mesh.aabb();
  g.origin = box.min.array() - opts.padding;
  const Vec3d extent = box.extent().array() + 2 * opts.padding;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(std::ceil(extent[a] / g.voxel)) + 1;
  const auto n = static_cast<Eigen::Index>(g.dims.cast<Eigen::Index>().prod());

  // Narrow-band unsigned distance: each triangle only touches voxels within
  // its bounding box grown by the truncation distance.
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, g.trunc);
  for (Eigen::Index f = 0; f < mesh.triangles.cols(); ++f) {
    const Vec3d a = mesh.vertices.col(mesh.triangles(0, f));
    const Vec3d b = mesh.vertices.col(mesh.triangles(1, f));
    const Vec3d c = mesh.vertices.col(mesh.triangles(2, f));
    const Vec3d lo = a.cwiseMin(b).cwiseMin(c).array() - g.trunc;
    const Vec3d hi = a.cwiseMax(b).cwiseMax(c).array() + g.trunc;
    Eigen::Vector3i i0, i1;
    for (int k = 0; k < 3; ++k) {
      i0[k] = std::max(0, static_cast<int>(std::ceil((lo[k] - g.origin[k]) / g.voxel)));
      i1[k] = std::min(g.dims[k] - 1, static_cast<int>(std::floor((hi[k] - g.origin[k]) / g.voxel)));
    }
    for (int k = i0.z(); k <= i1.z(); ++k) {
      for (int j = i0.y(); j <= i1.y(); ++j) {
        for (int i = i0.x(); i <= i1.x(); ++i) {
          const Vec3d p = g.center(i, j, k);
          const double d = (closest_point_on_triangle(p, a, b, c) - p).norm();
          double& slot = dist[g.index(i, j, k)];
          slot = std::min(slot, d);
        }
      }
    }
  }

  // Containment: three axis-aligned parity rays; split votes go to the
  // winding number.
  std::vector<std::uint8_t> votes(static_cast<std::size_t>(n), 0);
  for (int axis = 0; axis < 3; ++axis) add_parity_votes(mesh, g, axis, votes);

  g.values.resize(n);
  for (int k = 0; k < g.dims.z(); ++k) {
    for (int j = 0; j < g.dims.y(); ++j) {
      for (int i = 0; i < g.dims.x(); ++i) {
        const Eigen::Index id = g.index(i, j, k);
        const std::uint8_t v = votes[static_cast<std::size_t>(id)];
        bool inside = v == 3;
        if (v == 1 || v == 2) inside = winding_number(mesh, g.center(i, j, k)) > 0.5;
        g.values[id] = inside ? -dist[id] : dist[id];
      }
    }
  }
  return g;
}

double query_sdf(const TsdfGrid& grid, const Vec3d& p) {
  const Vec3d u = (p - grid.origin) / grid.voxel;
  Eigen::Vector3i i0;
  Vec3d frac;
  for (int a = 0; a < 3; ++a) {
    if (!(u[a] >= 0) || u[a] > grid.dims[a] - 1) return grid.trunc;
    i0[a] = std::min(static_cast<int>(std::floor(u[a])), std::max(grid.dims[a] - 2, 0));
    frac[a] = u[a] - i0[a];
  }
  auto v = [&](int dx, int dy, int dz) {
    const int i = std::min(i0.x() + dx, grid.dims.x() - 1);
    const int j = std::min(i0.y() + dy, grid.dims.y() - 1);
    const int k = std::min(i0.z() + dz, grid.dims.z() - 1);
    return grid.at(i, j, k);
  };
  const double fx = frac.x(), fy = frac.y(), fz = frac.z();
  const double c00 = v(0, 0, 0) * (1 - fx) + v(1, 0, 0) * fx;
  const double c10 = v(0, 1, 0) * (1 - fx) + v(1, 1, 0) * fx;
  const double c01 = v(0, 0, 1) * (1 - fx) + v(1, 0, 1) * fx;
  const double c11 = v(0, 1, 1) * (1 - fx) + v(1, 1, 1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

Vec3d sdf_gradient(const TsdfGrid& grid, const Vec3d& p, double h) {
  Vec3d g;
  for (int a = 0; a < 3; ++a) {
    const Vec3d e = Vec3d::Unit(a) * h;
    g[a] = (query_sdf(grid, p + e) - query_sdf(grid, p - e)) / (2 * h);
  }
  return g;
}

void HandSurface::validate() const {
  for (int i : palm) {
    if (i < 0 || i >= points.cols()) throw Error("palm index outside hand surface");
  }
}

namespace {

std::vector<int> selected(const HandSurface& s, SurfaceSubset subset) {
  if (subset == SurfaceSubset::palm) return s.palm;
  std::vector<int> all(static_cast<std::size_t>(s.points.cols()));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

double energy_of(const PointSet& pts, const std::vector<int>& idx, const TsdfGrid& grid,
                 const Posed& pose) {
  double e = 0;
  for (int i : idx) {
    const double phi = query_sdf(grid, pose * Vec3d(pts.col(i)));
    if (phi < 0) e += phi * phi;
  }
  return e;
}

}  // namespace

double penetration_energy(const HandSurface& surface, SurfaceSubset subset, const TsdfGrid& grid,
                          const Posed& surface_to_grid) {
  surface.validate();
  return energy_of(surface.points, selected(surface, subset), grid, surface_to_grid);
}

ResolveResult resolve_penetration(const Posed& initial, const HandSurface& surface_local,
                                  const TsdfGrid& grid, const ResolveOptions& opts) {
  surface_local.validate();
  const std::vector<int> idx = selected(surface_local, opts.subset);
  const PointSet& pts = surface_local.points;

  ResolveResult res;
  res.pose = initial;
  res.initial_energy = energy_of(pts, idx, grid, initial);
  res.final_energy = res.initial_energy;
  res.energies.push_back(res.initial_energy);
  if (res.initial_energy < opts.tolerance) {
    res.converged = true;
    return res;
  }

  const double h = grid.voxel / 4;
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    Vec3d g_t = Vec3d::Zero(), g_w = Vec3d::Zero();
    int inside = 0;
    for (int i : idx) {
      const Vec3d local = pts.col(i);
      const Vec3d world = res.pose * local;
      const double phi = query_sdf(grid, world);
      if (phi >= 0) continue;
      ++inside;
      const Vec3d grad = sdf_gradient(grid, world, h);
      g_t += 2 * phi * grad;
      g_w += 2 * phi * local.cross(res.pose.rot.inverse() * grad);
    }
    if (inside == 0 || (g_t.norm() == 0 && g_w.norm() == 0)) break;
    if (opts.translation_only) g_w.setZero();

    double alpha = opts.step_scale / inside;
    bool accepted = false;
    for (int bt = 0; bt < 40 && !accepted; ++bt, alpha *= 0.5) {
      Vec3d dw = -alpha * g_w;
      if (dw.norm() > opts.max_rotation_step) dw *= opts.max_rotation_step / dw.norm();
      const Posed cand(res.pose.rot * Rot3d::exp(dw), res.pose.trans - alpha * g_t);
      const double e = energy_of(pts, idx, grid, cand);
      if (e < res.final_energy) {
        res.pose = cand;
        res.final_energy = e;
        res.energies.push_back(e);
        accepted = true;
      }
    }
    if (!accepted || res.final_energy < opts.tolerance) break;
  }
  res.converged = res.final_energy < opts.tolerance;
  res.displacement = pose_geodesic(initial, res.pose);
  return res;
}

void RewardSpec::validate() const {
  if (lambda_geo < 0 || lambda_dyn < 0 || lambda_con < 0) {
    throw ConfigError("reward weights must be non-negative");
  }
  if (!(lambda_geo > 0 || lambda_dyn > 0 || lambda_con > 0)) {
    throw ConfigError("at least one reward weight must be positive");
  }
  if (!(sigma_geo > 0 && sigma_dyn > 0 && sigma_con > 0)) {
    throw ConfigError("reward kernel scales must be positive");
  }
}

double RewardState::total_contact(std::span<const double> forces) {
  double s = 0;
  for (double f : forces) {
    if (f < 0) throw Error("negative contact force");
    s += f;
  }
  return s;
}

double reward_step(const RewardState& state, const RewardState& target, const RewardSpec& spec) {
  spec.validate();
  if (state.contact < 0) throw Error("negative contact force");
  if (state.hand.size() != target.hand.size() || state.hand_vel.size() != target.hand_vel.size()) {
    throw Error("reward state dimensions differ");
  }
  const auto pose_err = pose_geodesic(state.object, target.object);
  const double geo = (state.hand - target.hand).norm() + pose_err.trans_err + pose_err.rot_err;
  const double dyn =
      (state.hand_vel - target.hand_vel).norm() + (state.object_vel - target.object_vel).norm();
  return spec.lambda_geo * std::exp(-geo / spec.sigma_geo) +
         spec.lambda_dyn * std::exp(-dyn / spec.sigma_dyn) +
         spec.lambda_con * (1 - std::exp(-state.contact / spec.sigma_con));
}

}  // namespace hoi
