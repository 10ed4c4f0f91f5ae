#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "voxreg/errors.hpp"
#include "voxreg/estimators.hpp"
#include "voxreg/rng.hpp"

using namespace vxr;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

VoxelGeometry line_geometry(int n) {
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(n, 3);
  for (int v = 0; v < n; ++v) {
    coords(v, 0) = v;
    coords(v, 1) = 0;
    coords(v, 2) = 0;
  }
  return VoxelGeometry::create(std::move(coords), Eigen::Vector3d::Ones());
}

Dataset make_dataset(Matrix design, Matrix responses) {
  const int v = static_cast<int>(responses.cols());
  std::vector<std::string> ids(static_cast<std::size_t>(v), "a");
  return Dataset::create(std::move(design), std::move(responses), line_geometry(v),
                         RoiPartition::from_area_ids(ids));
}

// Exact-line-search gradient descent on RSS + lambda*|beta|^2; independent of
// the closed-form solve it checks (uses only matrix-vector products).
Vector descent_ridge_oracle(const Matrix& x, const Vector& y, double lambda, int iters = 20000) {
  const Matrix a = x.transpose() * x + lambda * Matrix::Identity(x.cols(), x.cols());
  const Vector b = x.transpose() * y;
  Vector beta = Vector::Zero(x.cols());
  for (int i = 0; i < iters; ++i) {
    const Vector grad = 2.0 * (a * beta - b);
    const double gg = grad.squaredNorm();
    if (gg < 1e-26) break;
    const double step = gg / (2.0 * grad.dot(a * grad));
    beta -= step * grad;
  }
  return beta;
}

// GCV via an explicitly materialized hat matrix.
double gcv_hat_oracle(const Matrix& x, const Vector& y, double lambda) {
  const int t = static_cast<int>(x.rows());
  const Matrix reg = x.transpose() * x + lambda * Matrix::Identity(x.cols(), x.cols());
  const Matrix hat = x * reg.inverse() * x.transpose();
  const double rss = (y - hat * y).squaredNorm();
  const double denom = 1.0 - hat.trace() / t;
  return (rss / t) / (denom * denom);
}

}  // namespace

TEST_CASE("ols recovers an exact linear relation") {
  Matrix x(2, 1);
  x << 1.0, 2.0;
  Matrix y(2, 1);
  y << 2.0, 4.0;
  const CoefficientField field = ols_fit(make_dataset(x, y));
  CHECK(field.coefficients(0, 0) == doctest::Approx(2.0));
  CHECK(field.noise_variance(0) == doctest::Approx(0.0));
}

TEST_CASE("ols with orthonormal columns is X'y") {
  const Matrix base = random_matrix(12, 4, 3);
  const Eigen::HouseholderQR<Matrix> qr(base);
  const Matrix q = Matrix(qr.householderQ()).leftCols(4);
  const Matrix y = random_matrix(12, 2, 4);
  const CoefficientField field = ols_fit(make_dataset(q, y));
  const Matrix expected = (q.transpose() * y).transpose();
  CHECK((field.coefficients - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ols matches an independent dense least-squares oracle") {
  const Matrix x = random_matrix(30, 5, 7);
  const Matrix y = random_matrix(30, 3, 8);
  const CoefficientField field = ols_fit(make_dataset(x, y));
  for (int v = 0; v < 3; ++v) {
    const Vector oracle = x.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y.col(v));
    CHECK((field.coefficients.row(v).transpose() - oracle).norm() < 1e-10);
  }
  // standard errors: sigma2 * diag((X'X)^-1), sigma2 = RSS/(T-P)
  const Matrix inv = (x.transpose() * x).inverse();
  for (int v = 0; v < 3; ++v) {
    const double rss = (y.col(v) - x * field.coefficients.row(v).transpose()).squaredNorm();
    const double sigma2 = rss / (30 - 5);
    CHECK(field.noise_variance(v) == doctest::Approx(sigma2));
    for (int j = 0; j < 5; ++j)
      CHECK(field.std_errors(v, j) == doctest::Approx(std::sqrt(sigma2 * inv(j, j))));
  }
}

TEST_CASE("ols rejects rank-deficient designs") {
  Matrix x(6, 3);
  x.col(0) = random_matrix(6, 1, 9);
  x.col(1) = 2.0 * x.col(0);
  x.col(2) = random_matrix(6, 1, 10);
  CHECK_THROWS_WITH_AS(ols_fit(make_dataset(x, random_matrix(6, 1, 11))),
                       doctest::Contains("singular-design"), Error);
}

TEST_CASE("ridge at lambda zero equals ols") {
  const Matrix x = random_matrix(25, 4, 12);
  const Matrix y = random_matrix(25, 2, 13);
  const Dataset data = make_dataset(x, y);
  const CoefficientField ols = ols_fit(data);
  const CoefficientField ridge = ridge_fit(data, Vector::Zero(2));
  const double rel = (ridge.coefficients - ols.coefficients).cwiseAbs().maxCoeff() /
                     ols.coefficients.cwiseAbs().maxCoeff();
  CHECK(rel < 1e-10);
}

TEST_CASE("huge lambda shrinks coefficients to numerical zero") {
  const Matrix x = random_matrix(20, 4, 14);
  const Matrix y = random_matrix(20, 1, 15);
  const Dataset data = make_dataset(x, y);
  const CoefficientField field = ridge_fit(data, Vector::Constant(1, 1e12));
  const double xty_norm = (x.transpose() * y.col(0)).norm();
  CHECK(field.coefficients.row(0).norm() < 1e-6 * xty_norm);
}

TEST_CASE("ridge solves the penalized objective (descent oracle)") {
  const Matrix x = random_matrix(20, 4, 16);
  const Matrix y = random_matrix(20, 1, 17);
  const double lambda = 0.7;
  const CoefficientField field = ridge_fit(make_dataset(x, y), Vector::Constant(1, lambda));
  const Vector oracle = descent_ridge_oracle(x, y.col(0), lambda);
  CHECK((field.coefficients.row(0).transpose() - oracle).cwiseAbs().maxCoeff() < 1e-6);
  // normal-equation residual
  const Matrix reg = x.transpose() * x + lambda * Matrix::Identity(4, 4);
  const Vector resid = reg * field.coefficients.row(0).transpose() - x.transpose() * y.col(0);
  CHECK(resid.norm() < 1e-8 * (x.transpose() * y.col(0)).norm());
}

TEST_CASE("ridge sandwich covariance matches the explicit formula") {
  const Matrix x = random_matrix(30, 3, 18);
  const Matrix y = random_matrix(30, 1, 19);
  const double lambda = 2.5;
  const CoefficientField field = ridge_fit(make_dataset(x, y), Vector::Constant(1, lambda));
  const Matrix xtx = x.transpose() * x;
  const Matrix inv = (xtx + lambda * Matrix::Identity(3, 3)).inverse();
  const double rss = (y.col(0) - x * field.coefficients.row(0).transpose()).squaredNorm();
  const double sigma2 = rss / 30.0;
  const Matrix cov = sigma2 * inv * xtx * inv;
  for (int j = 0; j < 3; ++j) CHECK(field.std_errors(0, j) == doctest::Approx(std::sqrt(cov(j, j))));
}

TEST_CASE("negative lambda is rejected") {
  const Matrix x = random_matrix(10, 2, 20);
  const Matrix y = random_matrix(10, 1, 21);
  CHECK_THROWS_WITH_AS(ridge_fit(make_dataset(x, y), Vector::Constant(1, -0.1)),
                       doctest::Contains("invalid-parameter"), Error);
}

TEST_CASE("shrinkage and in-sample RSS are monotone along a lambda ladder") {
  const Matrix x = random_matrix(40, 6, 22);
  const Matrix y = random_matrix(40, 1, 23);
  const Dataset data = make_dataset(x, y);
  const auto grid = default_lambda_grid(x);
  REQUIRE(grid.size() == 30);
  double last_norm = std::numeric_limits<double>::infinity();
  double last_rss = -1.0;
  for (const double lambda : grid) {
    const CoefficientField field = ridge_fit(data, Vector::Constant(1, lambda));
    const double norm = field.coefficients.row(0).norm();
    const double rss = (y.col(0) - x * field.coefficients.row(0).transpose()).squaredNorm();
    CHECK(norm <= last_norm * (1.0 + 1e-12));
    CHECK(rss >= last_rss * (1.0 - 1e-12));
    last_norm = norm;
    last_rss = rss;
  }
}

TEST_CASE("gcv curve matches the explicit hat-matrix oracle") {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    const Matrix x = random_matrix(25, 4, seed);
    const Vector y = random_matrix(25, 1, seed + 50).col(0);
    const auto grid = default_lambda_grid(x);
    const GcvResult result = gcv_select(x, y, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      REQUIRE(!result.skipped[i]);
      CHECK(result.curve[i] == doctest::Approx(gcv_hat_oracle(x, y, grid[i])).epsilon(1e-8));
    }
  }
}

TEST_CASE("gcv picks the smallest lambda for a noiseless linear response") {
  const Matrix x = random_matrix(30, 4, 40);
  const Vector beta = random_matrix(4, 1, 41).col(0);
  const Vector y = x * beta;
  const auto grid = default_lambda_grid(x);
  const GcvResult result = gcv_select(x, y, grid);
  CHECK(result.lambda == doctest::Approx(grid.front()));
}

TEST_CASE("gcv on pure noise lands in the top quartile of the grid") {
  // Monte-Carlo oracle: with no signal, heavy regularization should win.
  std::vector<double> grid;
  for (int i = 0; i < 24; ++i) grid.push_back(0.01 * std::pow(10.0, 5.0 * i / 23.0));
  int top_quartile = 0;
  const int replicates = 100;
  for (int rep = 0; rep < replicates; ++rep) {
    const Matrix x = random_matrix(200, 5, 1000 + rep);
    const Vector y = random_matrix(200, 1, 2000 + rep).col(0);
    const GcvResult result = gcv_select(x, y, grid);
    if (result.lambda >= grid[grid.size() * 3 / 4]) ++top_quartile;
  }
  CHECK(top_quartile >= 90);
}

TEST_CASE("gcv fails cleanly when every grid point interpolates") {
  const Matrix x = Matrix::Identity(3, 3);
  const Vector y = random_matrix(3, 1, 60).col(0);
  CHECK_THROWS_WITH_AS(gcv_select(x, y, {0.0}), doctest::Contains("degenerate-gcv"), Error);
}

TEST_CASE("per-voxel gcv regularizes the noise voxel harder than the signal voxel") {
  const Matrix x = random_matrix(60, 4, 70);
  const Vector beta = random_matrix(4, 1, 71).col(0);
  Matrix y(60, 2);
  y.col(0) = x * beta;                          // exact signal
  y.col(1) = random_matrix(60, 1, 72).col(0);   // pure noise
  const auto cv = ridge_fit_cv(make_dataset(x, y), default_lambda_grid(x));
  REQUIRE(cv.map.per_voxel.size() == 2);
  CHECK(*cv.map.per_voxel[1].ridge_lambda > *cv.map.per_voxel[0].ridge_lambda);
}

TEST_CASE("grid of length one reduces to plain ridge") {
  const Matrix x = random_matrix(15, 3, 80);
  const Matrix y = random_matrix(15, 2, 81);
  const Dataset data = make_dataset(x, y);
  const auto cv = ridge_fit_cv(data, {3.5});
  const CoefficientField direct = ridge_fit(data, Vector::Constant(2, 3.5));
  CHECK((cv.field.coefficients - direct.coefficients).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("single-voxel cv equals manual gcv plus ridge composition") {
  const Matrix x = random_matrix(20, 3, 90);
  const Matrix y = random_matrix(20, 1, 91);
  const Dataset data = make_dataset(x, y);
  const auto grid = default_lambda_grid(x);
  const auto cv = ridge_fit_cv(data, grid);
  const GcvResult gcv = gcv_select(x, y.col(0), grid);
  const CoefficientField direct = ridge_fit(data, Vector::Constant(1, gcv.lambda));
  CHECK(*cv.map.per_voxel[0].ridge_lambda == doctest::Approx(gcv.lambda));
  CHECK((cv.field.coefficients - direct.coefficients).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}
