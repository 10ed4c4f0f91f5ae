#include "voxreg/smoothing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxreg/errors.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/rng.hpp"
#include "voxreg/zero_shot.hpp"

namespace vxr {

void SmoothingSpec::validate(int voxel_count) const {
  if (const auto* ball = std::get_if<BallSpec>(&kind)) {
    require(ball->p == 1 || ball->p == 2, "invalid-parameter", "ball norm must be 1 or 2");
    require(ball->radii.size() == voxel_count, "invalid-parameter", "one radius per voxel required");
    for (Eigen::Index v = 0; v < ball->radii.size(); ++v)
      require(ball->radii(v) >= 0.0, "invalid-parameter", "radii must be >= 0");
  } else {
    const auto& roi = std::get<RoiSpec>(kind);
    require(roi.gamma >= 0.0, "invalid-parameter", "gamma must be >= 0");
    if (roi.weights == RoiWeights::Gaussian)
      require(roi.bandwidth > 0.0, "invalid-parameter", "gaussian bandwidth must be > 0");
  }
}

SmoothingWeights ball_weights(const VoxelGeometry& geometry, const BallSpec& spec) {
  const int v_count = geometry.voxel_count();
  SmoothingWeights weights;
  weights.incoming.resize(static_cast<std::size_t>(v_count));
  for (int v = 0; v < v_count; ++v) {
    const auto members = ball_neighbors(geometry, v, spec.p, spec.radii(v));
    const double w = 1.0 / static_cast<double>(members.size());
    auto& row = weights.incoming[static_cast<std::size_t>(v)];
    row.reserve(members.size());
    for (const int u : members) row.emplace_back(u, w);
  }
  return weights;
}

SmoothingWeights roi_weights(const VoxelGeometry& geometry, const RoiPartition& partition, const RoiSpec& spec) {
  SmoothingWeights weights;
  weights.incoming.resize(static_cast<std::size_t>(partition.voxel_count()));
  for (const auto& area : partition.areas) {
    const int n = static_cast<int>(area.voxels.size());
    // q_ij = 1 (uniform) or exp(-d(i,j)^2/h^2); Omega = 2(D - Q)
    Matrix q(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (spec.weights == RoiWeights::Uniform) {
          q(i, j) = 1.0;
        } else {
          const double d = (geometry.position(area.voxels[static_cast<std::size_t>(i)]) -
                            geometry.position(area.voxels[static_cast<std::size_t>(j)]))
                               .norm();
          q(i, j) = std::exp(-d * d / (spec.bandwidth * spec.bandwidth));
        }
      }
    Matrix omega = -2.0 * q;
    omega.diagonal() += 2.0 * q.rowwise().sum();
    Matrix system = Matrix::Identity(n, n) + spec.gamma * omega;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success)
      fail_runtime("singular-system", "I + gamma*Omega not positive definite in area " + area.id);
    const Matrix inv = llt.solve(Matrix::Identity(n, n));
    for (int i = 0; i < n; ++i) {
      auto& row = weights.incoming[static_cast<std::size_t>(area.voxels[static_cast<std::size_t>(i)])];
      row.reserve(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) row.emplace_back(area.voxels[static_cast<std::size_t>(j)], inv(i, j));
    }
  }
  return weights;
}

SmoothingWeights smoothing_weights(const VoxelGeometry& geometry, const RoiPartition& partition,
                                   const SmoothingSpec& spec) {
  spec.validate(geometry.voxel_count());
  if (const auto* ball = std::get_if<BallSpec>(&spec.kind)) return ball_weights(geometry, *ball);
  return roi_weights(geometry, partition, std::get<RoiSpec>(spec.kind));
}

CoefficientField smooth_field(const CoefficientField& field, const SmoothingWeights& weights) {
  const Eigen::Index v_count = field.voxels();
  const Eigen::Index p = field.features();
  require(static_cast<Eigen::Index>(weights.incoming.size()) == v_count, "shape-mismatch",
          "weights and field voxel counts differ");
  CoefficientField out = field;
  out.method = field.method + "+smoothed";
  out.std_errors_approximate = true;
  for (Eigen::Index v = 0; v < v_count; ++v) {
    Vector beta = Vector::Zero(p);
    Vector var = Vector::Zero(p);
    for (const auto& [u, w] : weights.incoming[static_cast<std::size_t>(v)]) {
      beta += w * field.coefficients.row(u).transpose();
      var += (w * w) * field.std_errors.row(u).transpose().array().square().matrix();
    }
    out.coefficients.row(v) = beta.transpose();
    out.std_errors.row(v) = var.cwiseSqrt().transpose();
  }
  return out;
}

Matrix smooth_responses(const Matrix& responses, const SmoothingWeights& weights) {
  require(static_cast<Eigen::Index>(weights.incoming.size()) == responses.cols(), "shape-mismatch",
          "weights and response voxel counts differ");
  Matrix out = Matrix::Zero(responses.rows(), responses.cols());
  for (Eigen::Index v = 0; v < responses.cols(); ++v)
    for (const auto& [u, w] : weights.incoming[static_cast<std::size_t>(v)]) out.col(v) += w * responses.col(u);
  return out;
}

CoefficientField smooth_ball(const CoefficientField& field, const VoxelGeometry& geometry, const BallSpec& spec) {
  SmoothingSpec s{spec};
  s.validate(geometry.voxel_count());
  return smooth_field(field, ball_weights(geometry, spec));
}

CoefficientField smooth_roi(const CoefficientField& field, const VoxelGeometry& geometry,
                            const RoiPartition& partition, const RoiSpec& spec) {
  SmoothingSpec s{spec};
  s.validate(geometry.voxel_count());
  return smooth_field(field, roi_weights(geometry, partition, spec));
}

CoefficientField smoothed_ols(const Dataset& dataset, const SmoothingSpec& spec) {
  const SmoothingWeights weights = smoothing_weights(dataset.geometry, dataset.rois, spec);
  Dataset smoothed = dataset;
  smoothed.responses = smooth_responses(dataset.responses, weights);
  CoefficientField field = ols_fit(smoothed);
  field.method = "smoothed_ols";
  field.std_errors_approximate = true;
  return field;
}

Vector select_radius(const Dataset& dataset, const MethodSpec& estimator, int ball_p,
                     const std::vector<double>& radius_grid, int splits, std::uint64_t seed, int threads) {
  require(!radius_grid.empty(), "invalid-parameter", "radius grid must be nonempty");
  require(std::find(radius_grid.begin(), radius_grid.end(), 0.0) != radius_grid.end(), "invalid-parameter",
          "radius grid must include 0");
  require(splits >= 1, "invalid-parameter", "need at least one inner split");
  const int v_count = static_cast<int>(dataset.voxels());
  const int t = static_cast<int>(dataset.rows());
  require(t >= 9, "insufficient-data", "need at least 9 rows for the 8/9 + 1/9 inner split");

  std::vector<double> grid = radius_grid;
  std::sort(grid.begin(), grid.end());

  // accumulated validation accuracy per (voxel, radius)
  Matrix accuracy = Matrix::Zero(v_count, static_cast<Eigen::Index>(grid.size()));

  for (int split = 0; split < splits; ++split) {
    // Seeded 8/9 inner-train, 1/9 validation split.
    std::vector<int> order(static_cast<std::size_t>(t));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(seed, stream_tag::kInnerSplit, static_cast<std::uint64_t>(split));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_below(i)]);
    const int n_val = std::max(1, t / 9);
    std::vector<int> validation(order.begin(), order.begin() + n_val);
    std::vector<int> inner_train(order.begin() + n_val, order.end());
    std::sort(validation.begin(), validation.end());
    std::sort(inner_train.begin(), inner_train.end());

    const Dataset train = dataset.rows_subset(inner_train);
    const Dataset val = dataset.rows_subset(validation);
    const FitResult fit = fit_method(train, estimator, seed, threads);

    const PairSet pairs = enumerate_pairs(static_cast<int>(val.rows()), 10000, seed,
                                          static_cast<std::uint64_t>(split));
    for (std::size_t r = 0; r < grid.size(); ++r) {
      BallSpec ball{ball_p, Vector::Constant(v_count, grid[r])};
      const CoefficientField smoothed =
          grid[r] == 0.0 ? fit.field : smooth_ball(fit.field, dataset.geometry, ball);
      const Matrix pred = predict(smoothed, val.design);
      parallel_for(static_cast<std::size_t>(v_count), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
          double acc = 0.0;
          for (const auto& [i, j] : pairs.pairs)
            acc += zero_shot_pair_score_voxel(pred(i, static_cast<Eigen::Index>(v)),
                                              pred(j, static_cast<Eigen::Index>(v)),
                                              val.responses(i, static_cast<Eigen::Index>(v)),
                                              val.responses(j, static_cast<Eigen::Index>(v)));
          accuracy(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(r)) +=
              acc / static_cast<double>(pairs.pairs.size());
        }
      });
    }
  }

  // argmax per voxel; ascending grid with strict improvement keeps the
  // smallest radius on ties
  Vector radii(v_count);
  for (int v = 0; v < v_count; ++v) {
    int best = 0;
    for (std::size_t r = 1; r < grid.size(); ++r)
      if (accuracy(v, static_cast<Eigen::Index>(r)) > accuracy(v, best)) best = static_cast<int>(r);
    radii(v) = grid[static_cast<std::size_t>(best)];
  }
  return radii;
}

}  // namespace vxr
