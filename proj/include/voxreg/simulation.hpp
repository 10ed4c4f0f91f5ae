#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "voxreg/dataset.hpp"
#include "voxreg/sae.hpp"

namespace vxr {

struct SyntheticTruth {
  Matrix true_u;       // A x P
  Matrix true_z;       // V x P
  Vector true_sigma2;  // V
  Hyperparameters hyper;
  RoiPartition partition;
  std::uint64_t seed = 0;
};

// Lays V voxels on a compact integer grid with the given spacing.
VoxelGeometry grid_geometry(int voxels, const Eigen::Vector3d& spacing = Eigen::Vector3d::Ones());

// Splits [0, V) into `areas` contiguous index blocks of near-equal size.
RoiPartition contiguous_partition(int voxels, int areas);

// Seeded standard-normal design matrix.
Matrix gaussian_design(int rows, int features, std::uint64_t seed);

// Draws alpha2_a, nu2_v, sigma2_v from their inverse-gamma priors, u_a and z_v
// from the implied Gaussians, then y_v = X(u_{A(v)} + z_v) + noise.
std::pair<Dataset, SyntheticTruth> simulate_sae(const Matrix& design, const VoxelGeometry& geometry,
                                                const RoiPartition& partition, const Hyperparameters& hyper,
                                                std::uint64_t seed);

// Like simulate_sae, but the listed voxels are replaced by pure noise
// (beta = 0, y = N(0, sigma2)). Used for the mixed signal/noise studies.
std::pair<Dataset, SyntheticTruth> simulate_sae_with_noise_voxels(const Matrix& design,
                                                                  const VoxelGeometry& geometry,
                                                                  const RoiPartition& partition,
                                                                  const Hyperparameters& hyper,
                                                                  const std::vector<int>& noise_voxels,
                                                                  std::uint64_t seed);

// Seeded uniform reassignment of voxels to areas preserving area sizes.
RoiPartition shuffle_partition(const RoiPartition& partition, std::uint64_t seed);

struct MisassignmentReplicate {
  double ridge_nrss = 0.0;
  double sae_true_nrss = 0.0;
  double sae_shuffled_nrss = 0.0;
};

struct MisassignmentReport {
  std::vector<MisassignmentReplicate> replicates;
  int sae_true_wins = 0;      // replicates where correctly-partitioned SAE beats ridge
  int sae_shuffled_wins = 0;  // replicates where shuffled SAE beats ridge
  double p_sae_vs_ridge = 1.0;
  double p_shuffled_vs_ridge = 1.0;
};

struct MisassignmentConfig {
  int voxels = 500;
  int areas = 5;
  int replicates = 30;
  double test_fraction = 0.1;
  // Generation defaults put real weight on the area structure: noisy data
  // (sigma2 mean 4), separated area effects (alpha2 mean 4), tight voxel
  // effects (nu2 mean 0.25), so pooling has something to exploit. With
  // everything at mean 1 the T=200 rows swamp the prior and all estimators
  // tie to within Monte-Carlo noise.
  Hyperparameters hyper{3.0, 8.0, 3.0, 8.0, 3.0, 0.5};
  // The SAE fits use the toolkit's standard weak prior rather than the
  // generating one; sharing the generator's informative prior would hand the
  // sampler an oracle calibration of the shrinkage strength that ridge-GCV
  // cannot see, and the shuffled fit would keep beating ridge through it.
  Hyperparameters fit_hyper{};
  SaeOptions sae_options;
  std::vector<double> ridge_grid;  // empty = default
};

// Per replicate: simulate from the SAE prior, hold out a seeded test split,
// fit per-voxel-GCV ridge and the SAE model with true and shuffled partitions,
// and record mean out-of-sample normalized RSS for each.
MisassignmentReport misassignment_experiment(const Matrix& design, const MisassignmentConfig& config,
                                             std::uint64_t seed, int threads = 0);

struct MarginalPriorReport {
  double df = 0.0;          // 2e
  double ks_statistic = 0.0;
  double p_value = 0.0;
  bool pass = false;        // KS test vs t_{2e} at 0.05
  double ks_vs_gaussian = 0.0;  // distance of scaled draws to the standard normal
  int draws = 0;
};

// Hierarchical draws z | nu2 ~ N(0, nu2), nu2 ~ IG(e, f); z * sqrt(e/f) is
// compared against the t distribution with 2e degrees of freedom.
MarginalPriorReport marginal_prior_check(double e, double f, int draws, std::uint64_t seed);

}  // namespace vxr
