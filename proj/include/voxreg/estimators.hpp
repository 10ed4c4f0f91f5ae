#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voxreg/dataset.hpp"

namespace vxr {

// Per-voxel coefficient estimates with standard errors and noise variances.
// `intercept` is empty except for estimators that center the response
// (elastic net); predictions add it when present.
struct CoefficientField {
  Matrix coefficients;    // V x P
  Matrix std_errors;      // V x P
  Vector noise_variance;  // V
  Vector intercept;       // V or empty
  std::string method;
  bool std_errors_approximate = false;

  Eigen::Index voxels() const { return coefficients.rows(); }
  Eigen::Index features() const { return coefficients.cols(); }
};

struct VoxelRegularization {
  std::optional<double> ridge_lambda;
  std::optional<double> en_lambda1;
  std::optional<double> en_lambda2;
  std::optional<double> smoothing_radius;
  std::optional<double> posterior_nu2;
};

struct RegularizationMap {
  std::vector<VoxelRegularization> per_voxel;
};

// Forward predictions X * beta^T (+ intercept when present): rows stimuli, columns voxels.
Matrix predict(const CoefficientField& field, const Matrix& design);

// OLS per voxel: beta solves the normal equations, sigma2 = RSS/(T-P),
// std errors are sqrt of diag(sigma2 * (X'X)^-1).
CoefficientField ols_fit(const Dataset& dataset);

// Ridge with per-voxel penalties: beta = (X'X + lambda I)^-1 X'y, sigma2 = RSS/T,
// covariance sigma2 * (X'X+lI)^-1 X'X (X'X+lI)^-1. Factorizations are shared
// across voxels with equal lambda.
CoefficientField ridge_fit(const Dataset& dataset, const Vector& lambdas);

struct GcvResult {
  double lambda = 0.0;
  std::vector<double> curve;       // GCV value per grid point; NaN where skipped
  std::vector<bool> skipped;       // true where tr(H) == T (interpolation)
};

// GCV(lambda) = (RSS/T) / (1 - tr(H)/T)^2 minimized over the grid;
// ties break toward larger lambda.
GcvResult gcv_select(const Matrix& design, const Vector& response, const std::vector<double>& grid);

// 30 log-spaced points over [1e-3 s, 1e3 s], s = mean diagonal of X'X.
std::vector<double> default_lambda_grid(const Matrix& design);

struct RidgeCvResult {
  CoefficientField field;
  RegularizationMap map;
};

// Per-voxel GCV selection followed by one ridge fit with the winners.
RidgeCvResult ridge_fit_cv(const Dataset& dataset, const std::vector<double>& grid, int threads = 0);

}  // namespace vxr
