#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "voxreg/dataset.hpp"
#include "voxreg/method.hpp"
#include "voxreg/smoothing.hpp"
#include "voxreg/zero_shot.hpp"

namespace vxr {

struct Fold {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> inner_train;  // for smoothing-parameter tuning
  std::vector<int> validation;
};

// Static datasets use a seeded random row partition; dynamic datasets use
// contiguous test blocks with `trim` rows dropped from the train side of every
// train/test boundary.
struct FoldPlan {
  std::vector<Fold> outer;
  int trim = 0;
  std::uint64_t seed = 0;
  DatasetKind kind = DatasetKind::Static;
};

// trim < 0 requests the default: 5 for dynamic datasets, 0 for static.
FoldPlan make_fold_plan(const Dataset& dataset, int outer_folds, int trim, std::uint64_t seed);

// Per voxel: sum_t (y - yhat)^2 / sum_t (y - train_mean)^2 over the given rows.
// Constant-response voxels (zero denominator) are reported as NaN (missing).
Vector normalized_rss(const Matrix& predicted, const Matrix& observed, const Vector& train_mean);

// Smoothing tuned inside the pipeline: ball radius per voxel, or a global
// (gamma, bandwidth) pair for ROI smoothing; selection maximizes single-voxel
// zero-shot accuracy on the fold's validation split.
struct BallTune {
  int p = 2;
  std::vector<double> radius_grid;  // must include 0
};

struct RoiTune {
  std::vector<double> gamma_grid;  // must include 0
  RoiWeights weights = RoiWeights::Uniform;
  std::vector<double> bandwidth_grid = {1.0};
};

using SmoothingTune = std::variant<BallTune, RoiTune>;

struct EvaluationReport {
  Vector per_voxel_nrss;      // mean over folds; NaN where every fold was missing
  Vector per_voxel_accuracy;  // zero-shot accuracy over all test pairs
  std::vector<double> fold_accuracy;
  std::vector<std::int64_t> fold_pairs;
  double whole_brain_accuracy = 0.0;  // total correct / total pairs
  std::string method;
  RegularizationMap regularization;  // per-voxel intensities, averaged over folds
  bool pairs_sampled = false;
  double roi_gamma = 0.0;      // chosen ROI smoothing parameters, if tuned
  double roi_bandwidth = 0.0;
  int missing_nrss_voxels = 0;
};

// Whole-brain zero-shot accuracy over a set of test stimulus pairs with the
// given rank weights.
double zero_shot_brain(const CoefficientField& field, const Vector& weights, const Matrix& test_design,
                       const Matrix& test_responses, const PairSet& pairs);

// Nested cross-validation: per outer fold, fit (per-voxel tuning) on train,
// optionally tune smoothing on the fold's inner split, compute rank weights
// from a single inner 10-fold pass over train, then score normalized RSS and
// zero-shot metrics on the untouched test rows.
EvaluationReport run_pipeline(const Dataset& dataset, const MethodSpec& method,
                              const std::optional<SmoothingTune>& smoothing, const FoldPlan& plan,
                              int threads = 0);

}  // namespace vxr
