#include "voxreg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "voxreg/errors.hpp"

namespace vxr {

VoxelGeometry VoxelGeometry::create(Eigen::Matrix<int, Eigen::Dynamic, 3> coords, Eigen::Vector3d spacing) {
  for (int k = 0; k < 3; ++k)
    require(spacing[k] > 0.0, "invalid-parameter", "voxel spacing must be strictly positive");
  std::set<std::tuple<int, int, int>> seen;
  for (Eigen::Index v = 0; v < coords.rows(); ++v) {
    const auto key = std::make_tuple(coords(v, 0), coords(v, 1), coords(v, 2));
    if (!seen.insert(key).second)
      fail_validation("duplicate-coordinates", "two voxels share grid coordinates at voxel " + std::to_string(v));
  }
  return VoxelGeometry{std::move(coords), std::move(spacing)};
}

RoiPartition RoiPartition::from_area_ids(const std::vector<std::string>& area_of_voxel) {
  RoiPartition p;
  std::map<std::string, int> index_of_id;
  p.assignment.resize(area_of_voxel.size());
  for (std::size_t v = 0; v < area_of_voxel.size(); ++v) {
    const auto& id = area_of_voxel[v];
    auto it = index_of_id.find(id);
    if (it == index_of_id.end()) {
      it = index_of_id.emplace(id, static_cast<int>(p.areas.size())).first;
      p.areas.push_back(RoiArea{id, {}});
    }
    p.areas[it->second].voxels.push_back(static_cast<int>(v));
    p.assignment[v] = it->second;
  }
  p.validate(static_cast<int>(area_of_voxel.size()));
  return p;
}

RoiPartition RoiPartition::from_areas(std::vector<RoiArea> areas, int voxel_count) {
  RoiPartition p;
  p.areas = std::move(areas);
  p.assignment.assign(voxel_count, -1);
  for (std::size_t a = 0; a < p.areas.size(); ++a) {
    for (const int v : p.areas[a].voxels) {
      require(v >= 0 && v < voxel_count, "out-of-range", "voxel index " + std::to_string(v) + " outside [0, V)");
      require(p.assignment[v] == -1, "overlapping-areas", "voxel " + std::to_string(v) + " appears in two areas");
      p.assignment[v] = static_cast<int>(a);
    }
  }
  p.validate(voxel_count);
  return p;
}

void RoiPartition::validate(int voxel_count) const {
  require(static_cast<int>(assignment.size()) == voxel_count, "bad-partition", "assignment length != voxel count");
  for (const auto& area : areas)
    require(!area.voxels.empty(), "bad-partition", "area '" + area.id + "' is empty");
  for (int v = 0; v < voxel_count; ++v)
    require(assignment[v] >= 0 && assignment[v] < area_count(), "bad-partition",
            "voxel " + std::to_string(v) + " not covered by any area");
}

std::vector<int> ball_neighbors(const VoxelGeometry& geometry, int center, int p, double radius) {
  require(p == 1 || p == 2, "invalid-parameter", "ball norm must be 1 or 2");
  require(radius >= 0.0, "invalid-parameter", "ball radius must be >= 0");
  if (center < 0 || center >= geometry.voxel_count())
    fail_validation("out-of-range", "unknown voxel index " + std::to_string(center));
  const Eigen::Vector3d c = geometry.position(center);
  std::vector<int> out;
  for (int v = 0; v < geometry.voxel_count(); ++v) {
    const Eigen::Vector3d d = geometry.position(v) - c;
    const double dist = (p == 1) ? d.cwiseAbs().sum() : d.norm();
    if (dist <= radius) out.push_back(v);
  }
  return out;
}

namespace {

// Splits one oversized member list at the median of the widest physical axis;
// the first half takes the extra voxel when the count is odd.
void split_recursive(const VoxelGeometry& geometry, const std::string& id, std::vector<int> voxels, int cap,
                     std::vector<RoiArea>& out) {
  if (static_cast<int>(voxels.size()) <= cap) {
    out.push_back(RoiArea{id, std::move(voxels)});
    return;
  }
  int best_axis = 0;
  double best_extent = -1.0;
  for (int axis = 0; axis < 3; ++axis) {
    int lo = geometry.coords(voxels[0], axis), hi = lo;
    for (const int v : voxels) {
      lo = std::min(lo, geometry.coords(v, axis));
      hi = std::max(hi, geometry.coords(v, axis));
    }
    const double extent = (hi - lo) * geometry.spacing[axis];
    if (extent > best_extent) {
      best_extent = extent;
      best_axis = axis;
    }
  }
  std::sort(voxels.begin(), voxels.end(), [&](int a, int b) {
    const int ca = geometry.coords(a, best_axis), cb = geometry.coords(b, best_axis);
    return ca != cb ? ca < cb : a < b;
  });
  const std::size_t half = (voxels.size() + 1) / 2;
  std::vector<int> first(voxels.begin(), voxels.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<int> second(voxels.begin() + static_cast<std::ptrdiff_t>(half), voxels.end());
  split_recursive(geometry, id + ".0", std::move(first), cap, out);
  split_recursive(geometry, id + ".1", std::move(second), cap, out);
}

}  // namespace

RoiPartition split_large_rois(const RoiPartition& partition, const VoxelGeometry& geometry, int cap) {
  require(cap >= 1, "invalid-parameter", "roi cap must be >= 1");
  bool any_oversized = false;
  for (const auto& area : partition.areas)
    if (static_cast<int>(area.voxels.size()) > cap) any_oversized = true;
  if (!any_oversized) return partition;

  std::vector<RoiArea> out;
  for (const auto& area : partition.areas) split_recursive(geometry, area.id, area.voxels, cap, out);
  return RoiPartition::from_areas(std::move(out), partition.voxel_count());
}

}  // namespace vxr
