#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "voxreg/dataset.hpp"
#include "voxreg/estimators.hpp"
#include "voxreg/method.hpp"

namespace vxr {

struct BallSpec {
  int p = 2;     // l1 or l2 ball
  Vector radii;  // per-voxel radius in mm
};

enum class RoiWeights { Uniform, Gaussian };

struct RoiSpec {
  double gamma = 0.0;
  RoiWeights weights = RoiWeights::Uniform;
  double bandwidth = 1.0;  // h, used by gaussian weights
};

struct SmoothingSpec {
  std::variant<BallSpec, RoiSpec> kind;
  void validate(int voxel_count) const;
};

// Linear smoothing operator: out_v = sum_u weight * in_u over incoming[v].
struct SmoothingWeights {
  std::vector<std::vector<std::pair<int, double>>> incoming;
};

// Unweighted average over the l_p ball of each voxel (weights 1/|ball|).
SmoothingWeights ball_weights(const VoxelGeometry& geometry, const BallSpec& spec);

// Rows of (I + gamma*Omega_A)^-1 per area, Omega_A = 2(D_A - Q_A) twice the
// graph Laplacian of the similarity matrix q_ij (1 or exp(-d(i,j)^2/h^2)).
SmoothingWeights roi_weights(const VoxelGeometry& geometry, const RoiPartition& partition, const RoiSpec& spec);

SmoothingWeights smoothing_weights(const VoxelGeometry& geometry, const RoiPartition& partition,
                                   const SmoothingSpec& spec);

// Applies the operator to a coefficient field. Standard errors are recomputed
// by linear error propagation (sqrt of sum of squared-weighted variances) and
// flagged approximate.
CoefficientField smooth_field(const CoefficientField& field, const SmoothingWeights& weights);

// Applies the operator to response columns: out column v = sum_u c_uv y_u.
Matrix smooth_responses(const Matrix& responses, const SmoothingWeights& weights);

CoefficientField smooth_ball(const CoefficientField& field, const VoxelGeometry& geometry, const BallSpec& spec);
CoefficientField smooth_roi(const CoefficientField& field, const VoxelGeometry& geometry,
                            const RoiPartition& partition, const RoiSpec& spec);

// OLS on smoothed responses; by linearity this equals smoothing the OLS
// coefficient field with the same weights.
CoefficientField smoothed_ols(const Dataset& dataset, const SmoothingSpec& spec);

// Per-voxel smoothing radius maximizing mean single-voxel zero-shot accuracy
// on seeded inner validation splits (8/9 train, 1/9 validation of the given
// data, repeated `splits` times). Ties break toward the smaller radius.
Vector select_radius(const Dataset& dataset, const MethodSpec& estimator, int ball_p,
                     const std::vector<double>& radius_grid, int splits, std::uint64_t seed, int threads = 0);

}  // namespace vxr
