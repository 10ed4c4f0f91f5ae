#pragma once

#include <vector>

#include "voxreg/dataset.hpp"
#include "voxreg/errors.hpp"
#include "voxreg/estimators.hpp"

namespace vxr {

// Thrown when coordinate descent fails to reach the KKT tolerance; carries the
// last iterate for inspection.
class EnNoConvergence : public Error {
public:
  EnNoConvergence(const std::string& message, Vector last_iterate)
      : Error(ErrorKind::Runtime, "no-convergence", message), last_iterate(std::move(last_iterate)) {}
  Vector last_iterate;
};

// Max KKT violation of beta for RSS + l1*|beta|_1 + l2*|beta|_2^2:
// active coordinates must satisfy 2 x_j'(y - X beta) = l1*sign(beta_j) + 2 l2 beta_j,
// inactive ones |2 x_j'(y - X beta)| <= l1.
double elastic_net_kkt_residual(const Matrix& design, const Vector& response, const Vector& beta,
                                double lambda1, double lambda2);

double elastic_net_objective(const Matrix& design, const Vector& response, const Vector& beta,
                             double lambda1, double lambda2);

// Cyclic coordinate descent (ascending coordinate order) on the raw objective.
// Stops when the KKT residual falls below tol * scale, scale = max(1, 2|X'y|_inf).
// Optionally records the objective after every sweep.
Vector elastic_net_fit(const Matrix& design, const Vector& response, double lambda1, double lambda2,
                       double tol, int max_iter, std::vector<double>* objective_trace = nullptr,
                       const Vector* warm_start = nullptr);

struct EnPath {
  std::vector<double> lambda1_grid;
  std::vector<double> lambda2_grid;
  Matrix cv_error;  // |grid1| x |grid2| mean held-out MSE
  double selected_lambda1 = 0.0;
  double selected_lambda2 = 0.0;
  int selected_i = 0;
  int selected_j = 0;
};

struct EnCvResult {
  EnPath path;
  Vector coefficients;  // raw coordinates
  double intercept = 0.0;
};

struct ElasticNetOptions {
  double tol = 1e-8;
  int max_iter = 100000;
};

// K-fold cross-validation over the (lambda1, lambda2) grid. Columns are
// centered and scaled to unit norm and the response centered, per training
// fold; grids apply to the standardized problem; returned coefficients are
// unscaled and the centering offset is reported as the intercept. Ties break
// toward larger lambda1 then larger lambda2.
EnCvResult elastic_net_cv(const Matrix& design, const Vector& response, std::vector<double> lambda1_grid,
                          std::vector<double> lambda2_grid, int folds, std::uint64_t seed,
                          const ElasticNetOptions& options = {});

// Default grids on the standardized problem: 20 log-spaced lambda1 from the
// null threshold down four decades; lambda2 in {0, 0.01, 0.1, 1, 10} (unit-norm
// columns make mean diag(X'X) = 1).
std::vector<double> default_lambda1_grid(const Matrix& design_std, const Vector& response_centered);
std::vector<double> default_lambda2_grid();

struct EnFitResult {
  CoefficientField field;
  RegularizationMap map;
  std::vector<EnPath> paths;  // per voxel
};

// Whole-brain driver: per-voxel CV with shared fold assignment. Empty grids
// request the defaults (computed per voxel). Std errors are not estimated for
// the elastic net and are reported as zero.
EnFitResult elastic_net_fit_cv(const Dataset& dataset, std::vector<double> lambda1_grid,
                               std::vector<double> lambda2_grid, int folds, std::uint64_t seed,
                               const ElasticNetOptions& options = {}, int threads = 0);

// CSV serialization: lambda1,lambda2,cv_error rows over the whole grid.
void write_en_path_csv(const std::string& path, const EnPath& en_path);
// Combined per-voxel form with a leading voxel column.
void write_en_paths_csv(const std::string& path, const std::vector<EnPath>& paths);

}  // namespace vxr
