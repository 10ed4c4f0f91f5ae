#pragma once

#include <string>
#include <vector>

#include "voxreg/geometry.hpp"
#include "voxreg/matrix_io.hpp"

namespace vxr {

enum class DatasetKind { Static, Dynamic };

// Design matrix X (T x P), responses Y (T x V), voxel geometry and ROI
// partition. Dynamic datasets carry the lag construction metadata; their
// design is already the concatenated lag design.
struct Dataset {
  Matrix design;
  Matrix responses;
  VoxelGeometry geometry;
  RoiPartition rois;
  DatasetKind kind = DatasetKind::Static;
  int base_features = 0;  // dynamic only: width of one lag block
  int lag = 0;            // dynamic only: h

  Eigen::Index rows() const { return design.rows(); }
  Eigen::Index features() const { return design.cols(); }
  Eigen::Index voxels() const { return responses.cols(); }

  static Dataset create(Matrix design, Matrix responses, VoxelGeometry geometry, RoiPartition rois,
                        DatasetKind kind = DatasetKind::Static, int base_features = 0, int lag = 0);

  // Same geometry/partition, rows restricted to the given (ordered) indices.
  Dataset rows_subset(const std::vector<int>& row_indices) const;
};

// Lagged design for the dynamic model: output row for original time t
// concatenates base rows t-1, t-2, ..., t-h (most recent lag first); the
// first h rows have no full history and are dropped.
struct LagDesign {
  Matrix design;     // (T-h) x (P0*h)
  int dropped_rows;  // == h
};

LagDesign build_lag_design(const Matrix& base, int lag);

// Builds a dynamic dataset from a base feature series and aligned responses:
// applies build_lag_design and drops the first `lag` response rows.
Dataset make_dynamic_dataset(const Matrix& base, const Matrix& responses, VoxelGeometry geometry,
                             RoiPartition rois, int lag);

// Dataset directory format: manifest.json naming kind, spacing and file paths;
// design/responses as headered CSV or VXRMAT01 binary; coords.csv with columns
// (voxel,x,y,z) and rois.csv with columns (voxel,area).
Dataset load_dataset(const std::string& dir);
void save_dataset(const std::string& dir, const Dataset& dataset, bool binary_matrices = false);

}  // namespace vxr
