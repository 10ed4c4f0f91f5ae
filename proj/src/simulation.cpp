#include "voxreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voxreg/errors.hpp"
#include "voxreg/estimators.hpp"
#include "voxreg/evaluation.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/rng.hpp"
#include "voxreg/stats.hpp"

namespace vxr {

VoxelGeometry grid_geometry(int voxels, const Eigen::Vector3d& spacing) {
  require(voxels >= 1, "invalid-parameter", "need at least one voxel");
  const int side = std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(voxels)))));
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(voxels, 3);
  int v = 0;
  for (int x = 0; x < side && v < voxels; ++x)
    for (int y = 0; y < side && v < voxels; ++y)
      for (int z = 0; z < side && v < voxels; ++z, ++v) {
        coords(v, 0) = x;
        coords(v, 1) = y;
        coords(v, 2) = z;
      }
  return VoxelGeometry::create(std::move(coords), spacing);
}

RoiPartition contiguous_partition(int voxels, int areas) {
  require(areas >= 1 && areas <= voxels, "invalid-parameter", "areas must be in [1, voxels]");
  std::vector<RoiArea> list(static_cast<std::size_t>(areas));
  for (int a = 0; a < areas; ++a) {
    list[static_cast<std::size_t>(a)].id = "area" + std::to_string(a);
    const int start = static_cast<int>(static_cast<long long>(a) * voxels / areas);
    const int end = static_cast<int>(static_cast<long long>(a + 1) * voxels / areas);
    for (int v = start; v < end; ++v) list[static_cast<std::size_t>(a)].voxels.push_back(v);
  }
  return RoiPartition::from_areas(std::move(list), voxels);
}

Matrix gaussian_design(int rows, int features, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, stream_tag::kSimulate, 0xde51);
  Matrix x(rows, features);
  for (int t = 0; t < rows; ++t)
    for (int j = 0; j < features; ++j) x(t, j) = rng.normal();
  return x;
}

namespace {

std::pair<Dataset, SyntheticTruth> simulate_impl(const Matrix& design, const VoxelGeometry& geometry,
                                                 const RoiPartition& partition, const Hyperparameters& hyper,
                                                 const std::vector<int>& noise_voxels, std::uint64_t seed) {
  hyper.validate();
  const int v_count = geometry.voxel_count();
  const int a_count = partition.area_count();
  const int p = static_cast<int>(design.cols());
  partition.validate(v_count);

  std::vector<bool> is_noise(static_cast<std::size_t>(v_count), false);
  for (const int v : noise_voxels) {
    require(v >= 0 && v < v_count, "out-of-range", "noise voxel index " + std::to_string(v));
    is_noise[static_cast<std::size_t>(v)] = true;
  }

  Rng rng = Rng::stream(seed, stream_tag::kSimulate, 1);
  SyntheticTruth truth;
  truth.hyper = hyper;
  truth.partition = partition;
  truth.seed = seed;
  truth.true_u.resize(a_count, p);
  truth.true_z.resize(v_count, p);
  truth.true_sigma2.resize(v_count);

  Vector alpha2(a_count);
  for (int a = 0; a < a_count; ++a) {
    alpha2(a) = rng.inv_gamma(hyper.c, hyper.d);
    const double sd = std::sqrt(alpha2(a));
    for (int j = 0; j < p; ++j) truth.true_u(a, j) = sd * rng.normal();
  }
  for (int v = 0; v < v_count; ++v) {
    const double nu2 = rng.inv_gamma(hyper.e, hyper.f);
    truth.true_sigma2(v) = rng.inv_gamma(hyper.a, hyper.b);
    const double sd = std::sqrt(nu2);
    for (int j = 0; j < p; ++j) truth.true_z(v, j) = sd * rng.normal();
  }

  Matrix responses(design.rows(), v_count);
  for (int v = 0; v < v_count; ++v) {
    Vector beta = Vector::Zero(p);
    if (!is_noise[static_cast<std::size_t>(v)]) {
      const int area = partition.assignment[static_cast<std::size_t>(v)];
      beta = (truth.true_u.row(area) + truth.true_z.row(v)).transpose();
    } else {
      truth.true_z.row(v).setZero();
    }
    const Vector mean = design * beta;
    const double sd = std::sqrt(truth.true_sigma2(v));
    for (Eigen::Index t = 0; t < design.rows(); ++t) responses(t, v) = mean(t) + sd * rng.normal();
  }

  Dataset dataset = Dataset::create(design, std::move(responses), geometry, partition);
  return {std::move(dataset), std::move(truth)};
}

}  // namespace

std::pair<Dataset, SyntheticTruth> simulate_sae(const Matrix& design, const VoxelGeometry& geometry,
                                                const RoiPartition& partition, const Hyperparameters& hyper,
                                                std::uint64_t seed) {
  return simulate_impl(design, geometry, partition, hyper, {}, seed);
}

std::pair<Dataset, SyntheticTruth> simulate_sae_with_noise_voxels(const Matrix& design,
                                                                  const VoxelGeometry& geometry,
                                                                  const RoiPartition& partition,
                                                                  const Hyperparameters& hyper,
                                                                  const std::vector<int>& noise_voxels,
                                                                  std::uint64_t seed) {
  return simulate_impl(design, geometry, partition, hyper, noise_voxels, seed);
}

RoiPartition shuffle_partition(const RoiPartition& partition, std::uint64_t seed) {
  const int v_count = partition.voxel_count();
  std::vector<int> order(static_cast<std::size_t>(v_count));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, stream_tag::kShuffle, 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_below(i)]);

  std::vector<RoiArea> areas(partition.areas.size());
  std::size_t next = 0;
  for (std::size_t a = 0; a < partition.areas.size(); ++a) {
    areas[a].id = partition.areas[a].id;
    areas[a].voxels.resize(partition.areas[a].voxels.size());
    for (auto& slot : areas[a].voxels) slot = order[next++];
    std::sort(areas[a].voxels.begin(), areas[a].voxels.end());
  }
  return RoiPartition::from_areas(std::move(areas), v_count);
}

MisassignmentReport misassignment_experiment(const Matrix& design, const MisassignmentConfig& config,
                                             std::uint64_t seed, int threads) {
  // single-replicate runs are allowed for smoke tests; the sign tests only
  // mean something from ~10 replicates up
  require(config.replicates >= 1, "invalid-parameter", "need at least one replicate");
  const int t = static_cast<int>(design.rows());
  const int n_test = std::max(1, static_cast<int>(std::lround(config.test_fraction * t)));
  require(n_test < t, "invalid-parameter", "test fraction too large");

  const VoxelGeometry geometry = grid_geometry(config.voxels);
  const RoiPartition partition = contiguous_partition(config.voxels, config.areas);

  MisassignmentReport report;
  report.replicates.resize(static_cast<std::size_t>(config.replicates));

  for (int r = 0; r < config.replicates; ++r) {
    const std::uint64_t rep_seed = derive_seed(seed, stream_tag::kExperiment, static_cast<std::uint64_t>(r));
    auto [dataset, truth] = simulate_sae(design, geometry, partition, config.hyper, rep_seed);

    // seeded train/test split
    Rng rng = Rng::stream(rep_seed, stream_tag::kExperiment, 0xbeef);
    std::vector<int> order(static_cast<std::size_t>(t));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_below(i)]);
    std::vector<int> test_rows(order.begin(), order.begin() + n_test);
    std::vector<int> train_rows(order.begin() + n_test, order.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    const Dataset train = dataset.rows_subset(train_rows);
    const Dataset test = dataset.rows_subset(test_rows);
    const Vector train_mean = train.responses.colwise().mean();

    const auto mean_nrss = [&](const CoefficientField& field) {
      const Vector nrss = normalized_rss(predict(field, test.design), test.responses, train_mean);
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index v = 0; v < nrss.size(); ++v)
        if (!std::isnan(nrss(v))) {
          sum += nrss(v);
          ++n;
        }
      return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    };

    const auto grid = config.ridge_grid.empty() ? default_lambda_grid(train.design) : config.ridge_grid;
    auto& rep = report.replicates[static_cast<std::size_t>(r)];
    rep.ridge_nrss = mean_nrss(ridge_fit_cv(train, grid, threads).field);

    SaeOptions sae_opts = config.sae_options;
    sae_opts.threads = threads;
    rep.sae_true_nrss =
        mean_nrss(sae_fit(train, config.fit_hyper, sae_opts, derive_seed(rep_seed, stream_tag::kGibbs, 1)).field);

    Dataset train_shuffled = train;
    train_shuffled.rois = shuffle_partition(partition, derive_seed(rep_seed, stream_tag::kShuffle, 2));
    rep.sae_shuffled_nrss =
        mean_nrss(sae_fit(train_shuffled, config.fit_hyper, sae_opts, derive_seed(rep_seed, stream_tag::kGibbs, 3)).field);

    if (rep.sae_true_nrss < rep.ridge_nrss) report.sae_true_wins += 1;
    if (rep.sae_shuffled_nrss < rep.ridge_nrss) report.sae_shuffled_wins += 1;
  }

  report.p_sae_vs_ridge = stats::sign_test_pvalue(report.sae_true_wins, config.replicates - report.sae_true_wins);
  report.p_shuffled_vs_ridge =
      stats::sign_test_pvalue(report.sae_shuffled_wins, config.replicates - report.sae_shuffled_wins);
  return report;
}

MarginalPriorReport marginal_prior_check(double e, double f, int draws, std::uint64_t seed) {
  require(e > 1.0, "invalid-parameter", "marginal prior check needs e > 1");
  require(f > 0.0, "invalid-parameter", "f must be positive");
  require(draws >= 1000, "invalid-parameter", "need at least 1000 draws");

  Rng rng = Rng::stream(seed, stream_tag::kMarginalPrior, 0);
  const double scale = std::sqrt(e / f);  // z * sqrt(e/f) ~ t_{2e}
  std::vector<double> scaled(static_cast<std::size_t>(draws));
  for (auto& x : scaled) {
    const double nu2 = rng.inv_gamma(e, f);
    x = rng.normal() * std::sqrt(nu2) * scale;
  }

  MarginalPriorReport report;
  report.df = 2.0 * e;
  report.draws = draws;
  report.ks_statistic =
      stats::ks_statistic(scaled, [&](double x) { return stats::student_t_cdf(x, report.df); });
  report.p_value = stats::ks_pvalue(report.ks_statistic, scaled.size());
  report.pass = report.p_value >= 0.05;
  report.ks_vs_gaussian = stats::ks_statistic(scaled, [](double x) { return stats::normal_cdf(x); });
  return report;
}

}  // namespace vxr
