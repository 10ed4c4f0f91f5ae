#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "voxreg/errors.hpp"
#include "voxreg/simulation.hpp"
#include "voxreg/smoothing.hpp"

using namespace vxr;

namespace {

CoefficientField random_field(int voxels, int features, std::uint64_t seed) {
  CoefficientField field;
  field.method = "test";
  field.coefficients = gaussian_design(voxels, features, seed);
  field.std_errors = gaussian_design(voxels, features, seed + 1).cwiseAbs();
  field.noise_variance = gaussian_design(voxels, 1, seed + 2).col(0).cwiseAbs();
  return field;
}

Dataset random_dataset(int rows, int voxels, int features, int areas, std::uint64_t seed) {
  Matrix responses = gaussian_design(rows, voxels, seed + 9);
  return Dataset::create(gaussian_design(rows, features, seed), std::move(responses), grid_geometry(voxels),
                         contiguous_partition(voxels, areas));
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

}  // namespace

TEST_CASE("zero radius is the identity smoother") {
  const VoxelGeometry geometry = grid_geometry(27);
  const CoefficientField field = random_field(27, 4, 1);
  const CoefficientField out = smooth_ball(field, geometry, BallSpec{2, Vector::Zero(27)});
  CHECK((out.coefficients - field.coefficients).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.std_errors_approximate);
}

TEST_CASE("symmetric three-voxel average") {
  const VoxelGeometry geometry = line_geometry(3);
  CoefficientField field = random_field(3, 1, 2);
  field.coefficients << 0.0, 3.0, 6.0;
  const CoefficientField out = smooth_ball(field, geometry, BallSpec{1, Vector::Ones(3)});
  CHECK(out.coefficients(1, 0) == doctest::Approx(3.0));
  CHECK(out.coefficients(0, 0) == doctest::Approx(1.5));
}

TEST_CASE("ball smoothing matches a brute-force neighbor average") {
  const VoxelGeometry geometry = grid_geometry(64);
  const CoefficientField field = random_field(64, 3, 3);
  const double radius = 1.5;
  const CoefficientField out = smooth_ball(field, geometry, BallSpec{2, Vector::Constant(64, radius)});
  for (int v = 0; v < 64; ++v) {
    Vector mean = Vector::Zero(3);
    Vector var = Vector::Zero(3);
    int count = 0;
    for (int u = 0; u < 64; ++u)
      if ((geometry.position(u) - geometry.position(v)).norm() <= radius) {
        mean += field.coefficients.row(u).transpose();
        var += field.std_errors.row(u).transpose().array().square().matrix();
        ++count;
      }
    mean /= count;
    CHECK((out.coefficients.row(v).transpose() - mean).cwiseAbs().maxCoeff() < 1e-12);
    // naive propagation: mean of variances / |ball|, square-rooted
    const Vector se = (var / count / count).cwiseSqrt();
    CHECK((out.std_errors.row(v).transpose() - se).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("ball weight rows sum to one exactly") {
  const VoxelGeometry geometry = grid_geometry(40);
  const SmoothingWeights weights = ball_weights(geometry, BallSpec{1, Vector::Constant(40, 2.0)});
  for (const auto& row : weights.incoming) {
    double sum = 0.0;
    for (const auto& [u, w] : row) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("gamma zero leaves the field unchanged") {
  const Dataset data = random_dataset(10, 12, 2, 3, 4);
  const CoefficientField field = random_field(12, 2, 5);
  const CoefficientField out = smooth_roi(field, data.geometry, data.rois, RoiSpec{0.0, RoiWeights::Uniform, 1.0});
  CHECK((out.coefficients - field.coefficients).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("huge gamma forces every voxel in an area to the area mean") {
  const VoxelGeometry geometry = line_geometry(3);
  const RoiPartition partition = RoiPartition::from_area_ids({"a", "a", "a"});
  CoefficientField field = random_field(3, 1, 6);
  field.coefficients << 1.0, 2.0, 6.0;
  const CoefficientField out = smooth_roi(field, geometry, partition, RoiSpec{1e6, RoiWeights::Uniform, 1.0});
  for (int v = 0; v < 3; ++v) CHECK(out.coefficients(v, 0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("roi smoothing solves the penalized quadratic (pairwise-form oracle)") {
  // Independent route: build the quadratic form directly from the pairwise
  // definition sum_ij q_ij (b_i - b_j)^2 and solve with a pivoted QR.
  const int n = 8;
  const VoxelGeometry geometry = grid_geometry(n, Eigen::Vector3d(1.0, 1.2, 0.8));
  const RoiPartition partition = contiguous_partition(n, 1);
  const CoefficientField field = random_field(n, 3, 7);
  const double gamma = 0.7, h = 2.0;
  const CoefficientField out = smooth_roi(field, geometry, partition, RoiSpec{gamma, RoiWeights::Gaussian, h});

  Matrix hessian = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (geometry.position(i) - geometry.position(j)).norm();
      const double q = std::exp(-d * d / (h * h));
      hessian(i, i) += gamma * q;
      hessian(j, j) += gamma * q;
      hessian(i, j) -= gamma * q;
      hessian(j, i) -= gamma * q;
    }
  for (int col = 0; col < 3; ++col) {
    const Vector oracle = hessian.colPivHouseholderQr().solve(Vector(field.coefficients.col(col)));
    CHECK((out.coefficients.col(col) - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("roi smoothing contracts within-area variance as gamma grows") {
  const Dataset data = random_dataset(10, 20, 3, 2, 8);
  const CoefficientField field = random_field(20, 3, 9);
  double last_var = std::numeric_limits<double>::infinity();
  for (const double gamma : {0.0, 0.1, 0.3, 1.0, 3.0, 10.0}) {
    const CoefficientField out =
        smooth_roi(field, data.geometry, data.rois, RoiSpec{gamma, RoiWeights::Uniform, 1.0});
    double total_var = 0.0;
    for (const auto& area : data.rois.areas)
      for (int col = 0; col < 3; ++col) {
        double mean = 0.0;
        for (const int v : area.voxels) mean += out.coefficients(v, col);
        mean /= static_cast<double>(area.voxels.size());
        for (const int v : area.voxels) {
          const double d = out.coefficients(v, col) - mean;
          total_var += d * d;
        }
      }
    CHECK(total_var <= last_var * (1.0 + 1e-12));
    last_var = total_var;
  }
}

TEST_CASE("smoothed ols commutes with smoothing the coefficient field") {
  const Dataset data = random_dataset(25, 10, 3, 2, 10);

  SUBCASE("ball weights") {
    const SmoothingSpec spec{BallSpec{1, Vector::Constant(10, 1.0)}};
    const CoefficientField a = smoothed_ols(data, spec);
    const CoefficientField b = smooth_ball(ols_fit(data), data.geometry, std::get<BallSpec>(spec.kind));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("roi weights") {
    const SmoothingSpec spec{RoiSpec{0.5, RoiWeights::Uniform, 1.0}};
    const CoefficientField a = smoothed_ols(data, spec);
    const CoefficientField b = smooth_roi(ols_fit(data), data.geometry, data.rois, std::get<RoiSpec>(spec.kind));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("zero radius equals plain ols") {
    const SmoothingSpec spec{BallSpec{2, Vector::Zero(10)}};
    const CoefficientField a = smoothed_ols(data, spec);
    const CoefficientField b = ols_fit(data);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("smoothing with a radius beyond the brain diameter returns the global mean") {
  const Dataset data = random_dataset(12, 15, 2, 3, 11);
  const CoefficientField field = random_field(15, 2, 12);
  const CoefficientField out = smooth_ball(field, data.geometry, BallSpec{2, Vector::Constant(15, 1e4)});
  const Vector global_mean = field.coefficients.colwise().mean();
  for (int v = 0; v < 15; ++v)
    CHECK((out.coefficients.row(v).transpose() - global_mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("select_radius with a zero-only grid returns zeros") {
  const Dataset data = random_dataset(30, 8, 2, 2, 13);
  const Vector radii = select_radius(data, MethodSpec{OlsSpec{}}, 2, {0.0}, 1, 21);
  CHECK(radii.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("select_radius tie-breaks toward zero when smoothing cannot matter") {
  // single voxel: every ball is {v}, so accuracies tie exactly across the grid
  const Dataset data = random_dataset(30, 1, 2, 1, 14);
  const Vector radii = select_radius(data, MethodSpec{OlsSpec{}}, 2, {0.0, 1.0, 2.0}, 2, 22);
  CHECK(radii(0) == 0.0);
}

TEST_CASE("select_radius prefers smoothing when neighbors share the signal") {
  // Single-voxel accuracy gains from smoothing are small next to observation
  // noise, so the selection signal only separates when many seeded validation
  // splits are averaged (splits = 100 here).
  int prefers_smoothing = 0;
  const int replicates = 50;
  for (int rep = 0; rep < replicates; ++rep) {
    const int v_count = 27, t = 60, p = 8;
    const Matrix design = gaussian_design(t, p, 600 + rep);
    const Vector beta = Vector::Constant(p, 2.0);
    Rng noise(700 + static_cast<std::uint64_t>(rep));
    Matrix responses(t, v_count);
    for (int v = 0; v < v_count; ++v) {
      const Vector mean = design * beta;
      for (int i = 0; i < t; ++i) responses(i, v) = mean(i) + 6.0 * noise.normal();
    }
    const Dataset data = Dataset::create(design, std::move(responses), grid_geometry(v_count),
                                         contiguous_partition(v_count, 1));
    const Vector radii =
        select_radius(data, MethodSpec{OlsSpec{}}, 2, {0.0, 2.0}, 100, 800 + static_cast<std::uint64_t>(rep));
    if (radii(13) > 0.0) ++prefers_smoothing;  // center voxel of the 3x3x3 cube
  }
  CHECK(prefers_smoothing >= 40);
}

TEST_CASE("smoothing spec validation") {
  const SmoothingSpec bad_norm{BallSpec{3, Vector::Zero(4)}};
  CHECK_THROWS_WITH_AS(bad_norm.validate(4), doctest::Contains("invalid-parameter"), Error);
  const SmoothingSpec bad_gamma{RoiSpec{-0.5, RoiWeights::Uniform, 1.0}};
  CHECK_THROWS_WITH_AS(bad_gamma.validate(4), doctest::Contains("invalid-parameter"), Error);
  const SmoothingSpec bad_bandwidth{RoiSpec{1.0, RoiWeights::Gaussian, 0.0}};
  CHECK_THROWS_WITH_AS(bad_bandwidth.validate(4), doctest::Contains("invalid-parameter"), Error);
}
