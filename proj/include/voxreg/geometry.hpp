#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "voxreg/matrix_io.hpp"

namespace vxr {

// Voxel positions live on an integer grid; physical positions are grid
// coordinates scaled by the per-axis edge lengths (mm). Distances are always
// physical, since voxels are generally anisotropic.
struct VoxelGeometry {
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords;
  Eigen::Vector3d spacing;

  int voxel_count() const { return static_cast<int>(coords.rows()); }

  Eigen::Vector3d position(int v) const {
    return coords.row(v).cast<double>().transpose().cwiseProduct(spacing);
  }

  // Validates: unique coordinates, strictly positive spacing.
  static VoxelGeometry create(Eigen::Matrix<int, Eigen::Dynamic, 3> coords, Eigen::Vector3d spacing);
};

struct RoiArea {
  std::string id;
  std::vector<int> voxels;
};

// Disjoint, nonempty areas covering every voxel exactly once.
struct RoiPartition {
  std::vector<RoiArea> areas;
  std::vector<int> assignment;  // voxel index -> area index

  int area_count() const { return static_cast<int>(areas.size()); }
  int voxel_count() const { return static_cast<int>(assignment.size()); }

  static RoiPartition from_area_ids(const std::vector<std::string>& area_of_voxel);
  static RoiPartition from_areas(std::vector<RoiArea> areas, int voxel_count);

  void validate(int voxel_count) const;
};

// All voxels (center included) whose physical l_p distance to `center` is
// <= radius. p must be 1 or 2.
std::vector<int> ball_neighbors(const VoxelGeometry& geometry, int center, int p, double radius);

// Recursively bisects any area larger than `cap` along the axis of largest
// physical extent, splitting at the median coordinate so the halves differ in
// size by at most one. Split ids get deterministic ".0"/".1" suffixes.
RoiPartition split_large_rois(const RoiPartition& partition, const VoxelGeometry& geometry, int cap);

}  // namespace vxr
