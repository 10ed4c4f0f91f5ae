#include "voxreg/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxreg/parallel.hpp"
#include "voxreg/rng.hpp"

namespace vxr {

namespace {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

double elastic_net_objective(const Matrix& design, const Vector& response, const Vector& beta,
                             double lambda1, double lambda2) {
  return (response - design * beta).squaredNorm() + lambda1 * beta.lpNorm<1>() + lambda2 * beta.squaredNorm();
}

double elastic_net_kkt_residual(const Matrix& design, const Vector& response, const Vector& beta,
                                double lambda1, double lambda2) {
  const Vector grad = 2.0 * (design.transpose() * (response - design * beta));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) {
      const double sign = beta(j) > 0.0 ? 1.0 : -1.0;
      worst = std::max(worst, std::fabs(grad(j) - lambda1 * sign - 2.0 * lambda2 * beta(j)));
    } else {
      worst = std::max(worst, std::max(0.0, std::fabs(grad(j)) - lambda1));
    }
  }
  return worst;
}

Vector elastic_net_fit(const Matrix& design, const Vector& response, double lambda1, double lambda2,
                       double tol, int max_iter, std::vector<double>* objective_trace,
                       const Vector* warm_start) {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "invalid-parameter", "elastic net penalties must be >= 0");
  require(tol > 0.0, "invalid-parameter", "elastic net tol must be > 0");
  require(max_iter >= 1, "invalid-parameter", "elastic net max_iter must be >= 1");

  const Eigen::Index p = design.cols();
  const Vector col_norm2 = design.colwise().squaredNorm();
  const Vector xty = design.transpose() * response;
  const double scale = std::max(1.0, 2.0 * xty.cwiseAbs().maxCoeff());

  Vector beta = warm_start ? *warm_start : Vector::Zero(p);
  Vector residual = response - design * beta;
  if (objective_trace) objective_trace->clear();

  for (int sweep = 0; sweep < max_iter; ++sweep) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double denom = col_norm2(j) + lambda2;
      double next = 0.0;
      if (denom > 0.0) {
        const double z = design.col(j).dot(residual) + col_norm2(j) * beta(j);
        next = soft_threshold(z, 0.5 * lambda1) / denom;
      }
      const double delta = beta(j) - next;
      if (delta != 0.0) {
        residual += design.col(j) * delta;
        beta(j) = next;
      }
    }
    if (objective_trace)
      objective_trace->push_back(elastic_net_objective(design, response, beta, lambda1, lambda2));
    if (elastic_net_kkt_residual(design, response, beta, lambda1, lambda2) <= tol * scale) return beta;
  }
  throw EnNoConvergence("coordinate descent did not reach tol within " + std::to_string(max_iter) + " sweeps",
                        beta);
}

std::vector<double> default_lambda1_grid(const Matrix& design_std, const Vector& response_centered) {
  const double lmax = std::max(2.0 * (design_std.transpose() * response_centered).cwiseAbs().maxCoeff(), 1e-12);
  constexpr int kPoints = 20;
  std::vector<double> grid(kPoints);
  const double lo = lmax * 1e-4;
  const double step = std::log(lmax / lo) / (kPoints - 1);
  for (int i = 0; i < kPoints; ++i) grid[i] = lo * std::exp(step * i);
  return grid;
}

std::vector<double> default_lambda2_grid() { return {0.0, 0.01, 0.1, 1.0, 10.0}; }

namespace {

struct Standardized {
  Matrix x;        // centered, unit-norm columns (zero columns left as zero)
  Vector y;        // centered
  Vector x_mean;   // per column
  Vector x_scale;  // l2 norm of centered column, 1.0 where degenerate
  double y_mean = 0.0;
};

Standardized standardize(const Matrix& x, const Vector& y) {
  Standardized s;
  s.x_mean = x.colwise().mean();
  s.x = x.rowwise() - s.x_mean.transpose();
  s.x_scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double norm = s.x.col(j).norm();
    s.x_scale(j) = norm > 0.0 ? norm : 1.0;
    s.x.col(j) /= s.x_scale(j);
  }
  s.y_mean = y.mean();
  s.y = y.array() - s.y_mean;
  return s;
}

}  // namespace

EnCvResult elastic_net_cv(const Matrix& design, const Vector& response, std::vector<double> lambda1_grid,
                          std::vector<double> lambda2_grid, int folds, std::uint64_t seed,
                          const ElasticNetOptions& options) {
  const Eigen::Index t = design.rows();
  require(folds >= 2, "invalid-folds", "need at least two folds");
  require(t >= folds, "invalid-folds", "need at least one row per fold");
  if (lambda1_grid.empty() || lambda2_grid.empty()) {
    const Standardized full = standardize(design, response);
    if (lambda1_grid.empty()) lambda1_grid = default_lambda1_grid(full.x, full.y);
    if (lambda2_grid.empty()) lambda2_grid = default_lambda2_grid();
  }

  // Deterministic seeded fold assignment: shuffled rows in contiguous chunks.
  std::vector<int> order(static_cast<std::size_t>(t));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, stream_tag::kElasticNetCv);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_below(i)]);
  std::vector<int> fold_of(static_cast<std::size_t>(t));
  for (std::size_t i = 0; i < order.size(); ++i)
    fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));

  const int n1 = static_cast<int>(lambda1_grid.size());
  const int n2 = static_cast<int>(lambda2_grid.size());
  Matrix mean_mse = Matrix::Zero(n1, n2);

  for (int k = 0; k < folds; ++k) {
    std::vector<int> train_rows, test_rows;
    for (int r = 0; r < static_cast<int>(t); ++r)
      (fold_of[static_cast<std::size_t>(r)] == k ? test_rows : train_rows).push_back(r);
    if (test_rows.empty() || train_rows.empty()) fail_validation("invalid-folds", "fold with no rows");
    Matrix fold_sse = Matrix::Zero(n1, n2);

    Matrix x_tr(static_cast<Eigen::Index>(train_rows.size()), design.cols());
    Vector y_tr(static_cast<Eigen::Index>(train_rows.size()));
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      x_tr.row(static_cast<Eigen::Index>(i)) = design.row(train_rows[i]);
      y_tr(static_cast<Eigen::Index>(i)) = response(train_rows[i]);
    }
    const Standardized s = standardize(x_tr, y_tr);

    for (int j2 = 0; j2 < n2; ++j2) {
      Vector warm = Vector::Zero(design.cols());
      // descend lambda1 for warm starts; grid order itself is unchanged
      for (int j1 = n1 - 1; j1 >= 0; --j1) {
        warm = elastic_net_fit(s.x, s.y, lambda1_grid[static_cast<std::size_t>(j1)],
                               lambda2_grid[static_cast<std::size_t>(j2)], options.tol, options.max_iter,
                               nullptr, &warm);
        for (const int r : test_rows) {
          double pred = s.y_mean;
          for (Eigen::Index c = 0; c < design.cols(); ++c)
            pred += warm(c) * (design(r, c) - s.x_mean(c)) / s.x_scale(c);
          const double err = response(r) - pred;
          fold_sse(j1, j2) += err * err;
        }
      }
    }
    mean_mse += fold_sse / static_cast<double>(test_rows.size());
  }

  EnCvResult result;
  result.path.lambda1_grid = lambda1_grid;
  result.path.lambda2_grid = lambda2_grid;
  result.path.cv_error = mean_mse / static_cast<double>(folds);

  int best_i = 0, best_j = 0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const double m = result.path.cv_error(i, j);
      const double b = result.path.cv_error(best_i, best_j);
      const bool better =
          m < b || (m == b && (lambda1_grid[static_cast<std::size_t>(i)] > lambda1_grid[static_cast<std::size_t>(best_i)] ||
                               (lambda1_grid[static_cast<std::size_t>(i)] == lambda1_grid[static_cast<std::size_t>(best_i)] &&
                                lambda2_grid[static_cast<std::size_t>(j)] > lambda2_grid[static_cast<std::size_t>(best_j)])));
      if (better) {
        best_i = i;
        best_j = j;
      }
    }
  result.path.selected_i = best_i;
  result.path.selected_j = best_j;
  result.path.selected_lambda1 = lambda1_grid[static_cast<std::size_t>(best_i)];
  result.path.selected_lambda2 = lambda2_grid[static_cast<std::size_t>(best_j)];

  // Refit on all rows with the winner and map back to raw coordinates.
  const Standardized full = standardize(design, response);
  const Vector beta_std = elastic_net_fit(full.x, full.y, result.path.selected_lambda1,
                                          result.path.selected_lambda2, options.tol, options.max_iter);
  result.coefficients = beta_std.cwiseQuotient(full.x_scale);
  result.intercept = full.y_mean - result.coefficients.dot(full.x_mean);
  return result;
}

EnFitResult elastic_net_fit_cv(const Dataset& dataset, std::vector<double> lambda1_grid,
                               std::vector<double> lambda2_grid, int folds, std::uint64_t seed,
                               const ElasticNetOptions& options, int threads) {
  const Eigen::Index v = dataset.voxels();
  const Eigen::Index p = dataset.features();

  EnFitResult result;
  result.field.method = "elastic_net_cv";
  result.field.coefficients.resize(v, p);
  result.field.std_errors = Matrix::Zero(v, p);  // not estimated for the elastic net
  result.field.noise_variance.resize(v);
  result.field.intercept.resize(v);
  result.map.per_voxel.resize(static_cast<std::size_t>(v));
  result.paths.resize(static_cast<std::size_t>(v));

  std::vector<std::string> failures(static_cast<std::size_t>(v));
  parallel_for(static_cast<std::size_t>(v), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      try {
        const Vector y = dataset.responses.col(static_cast<Eigen::Index>(j));
        EnCvResult cv = elastic_net_cv(dataset.design, y, lambda1_grid, lambda2_grid, folds, seed, options);
        result.field.coefficients.row(static_cast<Eigen::Index>(j)) = cv.coefficients.transpose();
        result.field.intercept(static_cast<Eigen::Index>(j)) = cv.intercept;
        const Vector fitted = dataset.design * cv.coefficients + Vector::Constant(dataset.rows(), cv.intercept);
        result.field.noise_variance(static_cast<Eigen::Index>(j)) =
            (y - fitted).squaredNorm() / static_cast<double>(dataset.rows());
        result.map.per_voxel[j].en_lambda1 = cv.path.selected_lambda1;
        result.map.per_voxel[j].en_lambda2 = cv.path.selected_lambda2;
        result.paths[j] = std::move(cv.path);
      } catch (const Error& e) {
        failures[j] = e.what();
      }
    }
  });
  for (std::size_t j = 0; j < failures.size(); ++j)
    if (!failures[j].empty())
      fail_runtime("elastic-net-failed", "voxel " + std::to_string(j) + ": " + failures[j]);
  return result;
}

void write_en_path_csv(const std::string& path, const EnPath& en_path) {
  std::string out = "lambda1,lambda2,cv_error\n";
  for (std::size_t i = 0; i < en_path.lambda1_grid.size(); ++i)
    for (std::size_t j = 0; j < en_path.lambda2_grid.size(); ++j)
      out += format_double(en_path.lambda1_grid[i]) + "," + format_double(en_path.lambda2_grid[j]) + "," +
             format_double(en_path.cv_error(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + "\n";
  atomic_write_text(path, out);
}

void write_en_paths_csv(const std::string& path, const std::vector<EnPath>& paths) {
  std::string out = "voxel,lambda1,lambda2,cv_error\n";
  for (std::size_t v = 0; v < paths.size(); ++v) {
    const EnPath& p = paths[v];
    for (std::size_t i = 0; i < p.lambda1_grid.size(); ++i)
      for (std::size_t j = 0; j < p.lambda2_grid.size(); ++j)
        out += std::to_string(v) + "," + format_double(p.lambda1_grid[i]) + "," +
               format_double(p.lambda2_grid[j]) + "," +
               format_double(p.cv_error(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + "\n";
  }
  atomic_write_text(path, out);
}

}  // namespace vxr
