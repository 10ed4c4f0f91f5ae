#include "voxreg/estimators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>

#include "voxreg/errors.hpp"
#include "voxreg/parallel.hpp"

namespace vxr {

Matrix predict(const CoefficientField& field, const Matrix& design) {
  Matrix out = design * field.coefficients.transpose();
  if (field.intercept.size() > 0) out.rowwise() += field.intercept.transpose();
  return out;
}

CoefficientField ols_fit(const Dataset& dataset) {
  const Matrix& x = dataset.design;
  const Matrix& y = dataset.responses;
  const Eigen::Index t = x.rows(), p = x.cols(), v = y.cols();
  require(t >= p, "singular-design", "OLS needs T >= P");

  const Matrix xtx = x.transpose() * x;
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(p - 1);
  if (!(smin > smax * 1e-12))
    fail_validation("singular-design", "X'X is numerically singular; regularize instead");

  Eigen::LLT<Matrix> llt(xtx);
  const Matrix xtx_inv = llt.solve(Matrix::Identity(p, p));
  const Vector inv_diag = xtx_inv.diagonal();

  CoefficientField field;
  field.method = "ols";
  field.coefficients = (llt.solve(x.transpose() * y)).transpose();  // V x P
  field.noise_variance.resize(v);
  field.std_errors.resize(v, p);
  const Matrix resid = y - x * field.coefficients.transpose();
  for (Eigen::Index j = 0; j < v; ++j) {
    const double rss = resid.col(j).squaredNorm();
    const double sigma2 = t > p ? rss / static_cast<double>(t - p) : 0.0;
    field.noise_variance(j) = sigma2;
    field.std_errors.row(j) = (sigma2 * inv_diag).cwiseMax(0.0).cwiseSqrt().transpose();
  }
  return field;
}

CoefficientField ridge_fit(const Dataset& dataset, const Vector& lambdas) {
  const Matrix& x = dataset.design;
  const Matrix& y = dataset.responses;
  const Eigen::Index t = x.rows(), p = x.cols(), v = y.cols();
  require(lambdas.size() == v, "invalid-parameter", "one lambda per voxel required");
  for (Eigen::Index j = 0; j < v; ++j)
    require(lambdas(j) >= 0.0, "invalid-parameter", "negative ridge lambda at voxel " + std::to_string(j));

  const Matrix xtx = x.transpose() * x;
  const Matrix xty = x.transpose() * y;

  // One factorization and one sandwich covariance per distinct lambda.
  struct Shared {
    Eigen::LLT<Matrix> llt;
    Vector sandwich_diag;
  };
  std::map<double, Shared> cache;
  for (Eigen::Index j = 0; j < v; ++j) {
    const double lambda = lambdas(j);
    if (cache.count(lambda)) continue;
    Matrix reg = xtx;
    reg.diagonal().array() += lambda;
    Shared s;
    s.llt.compute(reg);
    if (s.llt.info() != Eigen::Success)
      fail_validation("singular-design", "X'X + lambda I not positive definite (lambda=" + format_double(lambda) + ")");
    const Matrix inv = s.llt.solve(Matrix::Identity(p, p));
    s.sandwich_diag = (inv * xtx * inv).diagonal();
    cache.emplace(lambda, std::move(s));
  }

  CoefficientField field;
  field.method = "ridge";
  field.coefficients.resize(v, p);
  field.std_errors.resize(v, p);
  field.noise_variance.resize(v);
  for (Eigen::Index j = 0; j < v; ++j) {
    const Shared& s = cache.at(lambdas(j));
    const Vector beta = s.llt.solve(xty.col(j));
    field.coefficients.row(j) = beta.transpose();
    const double rss = (y.col(j) - x * beta).squaredNorm();
    const double sigma2 = rss / static_cast<double>(t);
    field.noise_variance(j) = sigma2;
    field.std_errors.row(j) = (sigma2 * s.sandwich_diag).cwiseMax(0.0).cwiseSqrt().transpose();
  }
  return field;
}

std::vector<double> default_lambda_grid(const Matrix& design) {
  const Matrix xtx = design.transpose() * design;
  const double s = xtx.diagonal().mean();
  const double lo = 1e-3 * s, hi = 1e3 * s;
  constexpr int kPoints = 30;
  std::vector<double> grid(kPoints);
  const double step = std::log(hi / lo) / (kPoints - 1);
  for (int i = 0; i < kPoints; ++i) grid[i] = lo * std::exp(step * i);
  return grid;
}

GcvResult gcv_select(const Matrix& design, const Vector& response, const std::vector<double>& grid) {
  require(!grid.empty(), "invalid-parameter", "gcv grid must be nonempty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] >= 0.0, "invalid-parameter", "gcv grid values must be >= 0");
    if (i > 0) require(grid[i] >= grid[i - 1], "invalid-parameter", "gcv grid must be ascending");
  }
  const Eigen::Index t = design.rows();
  require(response.size() == t, "shape-mismatch", "response length must equal design rows");

  // SVD route: tr(H) = sum d_i^2/(d_i^2+lambda); fitted values live in the
  // left singular basis, so RSS comes from the rotated response coordinates.
  Eigen::JacobiSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector d = svd.singularValues();
  const Vector c = svd.matrixU().transpose() * response;
  const double y2 = response.squaredNorm();

  GcvResult result;
  result.curve.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  result.skipped.assign(grid.size(), false);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lambda = grid[i];
    double trace = 0.0, rss = y2;
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      const double d2 = d(k) * d(k);
      const double w = d2 > 0.0 || lambda > 0.0 ? d2 / (d2 + lambda) : 0.0;
      trace += w;
      rss += (w * w - 2.0 * w) * c(k) * c(k);
    }
    rss = std::max(rss, 0.0);
    const double denom = 1.0 - trace / static_cast<double>(t);
    if (denom <= 0.0) {
      result.skipped[i] = true;  // interpolating fit: GCV undefined
      continue;
    }
    const double gcv = (rss / static_cast<double>(t)) / (denom * denom);
    result.curve[i] = gcv;
    if (!found || gcv <= best) {  // ascending grid, so <= prefers larger lambda on ties
      best = gcv;
      result.lambda = lambda;
      found = true;
    }
  }
  if (!found) fail_validation("degenerate-gcv", "every grid point is an interpolating fit");
  return result;
}

RidgeCvResult ridge_fit_cv(const Dataset& dataset, const std::vector<double>& grid, int threads) {
  const Eigen::Index v = dataset.voxels();
  Vector lambdas(v);
  std::vector<std::string> failures(static_cast<std::size_t>(v));
  parallel_for(static_cast<std::size_t>(v), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      try {
        lambdas(static_cast<Eigen::Index>(j)) =
            gcv_select(dataset.design, dataset.responses.col(static_cast<Eigen::Index>(j)), grid).lambda;
      } catch (const Error& e) {
        failures[j] = e.what();
      }
    }
  });
  for (std::size_t j = 0; j < failures.size(); ++j)
    if (!failures[j].empty())
      fail_validation("degenerate-gcv", "voxel " + std::to_string(j) + ": " + failures[j]);

  RidgeCvResult result;
  result.field = ridge_fit(dataset, lambdas);
  result.field.method = "ridge_gcv";
  result.map.per_voxel.resize(static_cast<std::size_t>(v));
  for (Eigen::Index j = 0; j < v; ++j) result.map.per_voxel[static_cast<std::size_t>(j)].ridge_lambda = lambdas(j);
  return result;
}

}  // namespace vxr
