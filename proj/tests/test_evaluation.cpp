#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "voxreg/errors.hpp"
#include "voxreg/evaluation.hpp"
#include "voxreg/simulation.hpp"
#include "voxreg/stats.hpp"

using namespace vxr;

namespace {

Dataset noiseless_dataset(int rows, int voxels, int features, std::uint64_t seed) {
  const Matrix design = gaussian_design(rows, features, seed);
  const Matrix beta = gaussian_design(voxels, features, seed + 1);
  Matrix responses = design * beta.transpose();
  return Dataset::create(design, std::move(responses), grid_geometry(voxels),
                         contiguous_partition(voxels, 2));
}

Dataset noise_dataset(int rows, int voxels, int features, std::uint64_t seed) {
  Matrix responses = gaussian_design(rows, voxels, seed + 2);
  return Dataset::create(gaussian_design(rows, features, seed), std::move(responses), grid_geometry(voxels),
                         contiguous_partition(voxels, 2));
}

Dataset dynamic_dataset(int base_rows, int voxels, std::uint64_t seed) {
  const Matrix base = gaussian_design(base_rows, 2, seed);
  const Matrix responses = gaussian_design(base_rows, voxels, seed + 1);
  return make_dynamic_dataset(base, responses, grid_geometry(voxels), contiguous_partition(voxels, 2), 4);
}

}  // namespace

TEST_CASE("static 60-row plan has ten folds of six test rows") {
  const Dataset data = noise_dataset(60, 4, 2, 1);
  const FoldPlan plan = make_fold_plan(data, 10, -1, 7);
  CHECK(plan.trim == 0);
  std::set<int> all_test;
  for (const auto& fold : plan.outer) {
    CHECK(fold.test.size() == 6);
    CHECK(fold.train.size() == 54);
    for (const int r : fold.test) {
      CHECK(all_test.insert(r).second);  // folds partition the rows
      for (const int s : fold.train) CHECK(r != s);
    }
    CHECK(fold.inner_train.size() + fold.validation.size() == fold.train.size());
    CHECK(fold.validation.size() == 6);  // 54/9
  }
  CHECK(all_test.size() == 60);
}

TEST_CASE("dynamic plan trims five rows at each train/test boundary") {
  const Dataset data = dynamic_dataset(104, 3, 2);  // 100 rows after lag
  REQUIRE(data.rows() == 100);
  const FoldPlan plan = make_fold_plan(data, 10, -1, 8);
  CHECK(plan.trim == 5);
  for (const auto& fold : plan.outer) {
    CHECK(fold.test.size() == 10);
    // contiguous block
    for (std::size_t i = 1; i < fold.test.size(); ++i) CHECK(fold.test[i] == fold.test[i - 1] + 1);
    // every train row is more than trim rows away from every test row
    for (const int r : fold.train)
      for (const int s : fold.test) CHECK(std::abs(r - s) > 5);
    // inner validation respects the same margin
    for (const int r : fold.inner_train)
      for (const int s : fold.validation) CHECK(std::abs(r - s) > 5);
  }
}

TEST_CASE("fold plans are seed-reproducible") {
  const Dataset data = noise_dataset(50, 3, 2, 3);
  const FoldPlan a = make_fold_plan(data, 10, -1, 99);
  const FoldPlan b = make_fold_plan(data, 10, -1, 99);
  const FoldPlan c = make_fold_plan(data, 10, -1, 100);
  for (std::size_t k = 0; k < a.outer.size(); ++k) {
    CHECK(a.outer[k].test == b.outer[k].test);
    CHECK(a.outer[k].inner_train == b.outer[k].inner_train);
  }
  bool any_differs = false;
  for (std::size_t k = 0; k < a.outer.size(); ++k) any_differs = any_differs || a.outer[k].test != c.outer[k].test;
  CHECK(any_differs);
}

TEST_CASE("plans fail cleanly when trimming empties a fold") {
  const Dataset data = dynamic_dataset(16, 2, 4);  // 12 rows after lag
  CHECK_THROWS_WITH_AS(make_fold_plan(data, 2, 10, 1), doctest::Contains("insufficient-data"), Error);
}

TEST_CASE("normalized rss definition cases") {
  // exact predictions
  Matrix observed = gaussian_design(8, 3, 5);
  Vector train_mean = Vector::Zero(3);
  Vector nrss = normalized_rss(observed, observed, train_mean);
  for (int v = 0; v < 3; ++v) CHECK(nrss(v) == doctest::Approx(0.0));

  // train-mean prediction on a centered test block gives exactly 1
  Matrix centered = observed.rowwise() - observed.colwise().mean();
  Matrix mean_pred = Matrix::Zero(8, 3);
  nrss = normalized_rss(mean_pred, centered, Vector::Zero(3));
  for (int v = 0; v < 3; ++v) CHECK(nrss(v) == doctest::Approx(1.0));

  // random case against direct summation
  const Matrix pred = gaussian_design(8, 3, 6);
  train_mean << 0.3, -0.2, 1.0;
  nrss = normalized_rss(pred, observed, train_mean);
  for (int v = 0; v < 3; ++v) {
    double rss = 0.0, tss = 0.0;
    for (int t = 0; t < 8; ++t) {
      rss += (observed(t, v) - pred(t, v)) * (observed(t, v) - pred(t, v));
      tss += (observed(t, v) - train_mean(v)) * (observed(t, v) - train_mean(v));
    }
    CHECK(nrss(v) == doctest::Approx(rss / tss).epsilon(1e-12));
  }

  // constant voxel reports missing, not infinity
  Matrix constant = Matrix::Ones(8, 1);
  train_mean = Vector::Ones(1);
  nrss = normalized_rss(Matrix::Zero(8, 1), constant, train_mean);
  CHECK(std::isnan(nrss(0)));
}

TEST_CASE("zero-shot voxel decision cases") {
  // noiseless: the true candidate's prediction equals the observation
  CHECK(zero_shot_classify(2.0, 2.0, 5.0, 0).score == 1.0);
  CHECK(zero_shot_classify(5.0, 2.0, 5.0, 1).score == 1.0);
  // wrong side
  CHECK(zero_shot_classify(5.0, 2.0, 5.1, 0).score == 0.0);
  // zero coefficients predict identically: tie scores one half, first chosen
  const ZeroShotDecision tie = zero_shot_classify(1.7, 0.0, 0.0, 0);
  CHECK(tie.score == 0.5);
  CHECK(tie.chosen == 0);
  // pair score averages both observations
  CHECK(zero_shot_pair_score_voxel(1.0, 3.0, 1.1, 2.9) == 1.0);
  CHECK(zero_shot_pair_score_voxel(0.0, 0.0, 1.0, 2.0) == 0.5);
}

TEST_CASE("rank weights are inverse ranks with mean ties") {
  Vector acc(4);
  acc << 0.9, 0.5, 0.7, 0.7;
  const Vector w = rank_weights(acc);
  CHECK(w(0) == doctest::Approx(1.0));
  CHECK(w(1) == doctest::Approx(0.25));
  CHECK(w(2) == doctest::Approx(1.0 / 2.5));
  CHECK(w(3) == doctest::Approx(1.0 / 2.5));
}

TEST_CASE("single-voxel whole-brain decision reduces to the voxel rule") {
  const Matrix design = gaussian_design(6, 2, 9);
  CoefficientField field;
  field.method = "test";
  field.coefficients = gaussian_design(1, 2, 10);
  field.std_errors = Matrix::Zero(1, 2);
  field.noise_variance = Vector::Zero(1);
  const Matrix pred = predict(field, design);
  const Matrix observed = gaussian_design(6, 1, 11);
  PairSet pairs = enumerate_pairs(6, 10000, 1, 0);
  const Vector weights = Vector::Ones(1);
  for (const auto& [i, j] : pairs.pairs) {
    const double brain = zero_shot_pair_score_brain(weights, pred.row(i).transpose(), pred.row(j).transpose(),
                                                    observed.row(i).transpose(), observed.row(j).transpose());
    const double voxel = zero_shot_pair_score_voxel(pred(i, 0), pred(j, 0), observed(i, 0), observed(j, 0));
    CHECK(brain == voxel);
  }
}

TEST_CASE("pair enumeration is exhaustive under the cap and sampled above it") {
  const PairSet small = enumerate_pairs(6, 10000, 3, 0);
  CHECK(small.pairs.size() == 15);
  CHECK(!small.sampled);
  const PairSet big = enumerate_pairs(200, 100, 3, 0);
  CHECK(big.pairs.size() == 100);
  CHECK(big.sampled);
  for (const auto& [i, j] : big.pairs) {
    CHECK(i < j);
    CHECK(j < 200);
  }
}

TEST_CASE("pipeline on noiseless data: perfect accuracy and near-zero nrss") {
  const Dataset data = noiseless_dataset(60, 6, 3, 20);
  const FoldPlan plan = make_fold_plan(data, 10, -1, 21);
  const EvaluationReport report = run_pipeline(data, MethodSpec{OlsSpec{}}, std::nullopt, plan, 2);
  CHECK(report.whole_brain_accuracy == doctest::Approx(1.0));
  for (int v = 0; v < 6; ++v) CHECK(report.per_voxel_nrss(v) < 1e-18);
  // per-fold counts reconstruct the mean exactly
  double correct = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t k = 0; k < report.fold_accuracy.size(); ++k) {
    correct += report.fold_accuracy[k] * static_cast<double>(report.fold_pairs[k]);
    pairs += report.fold_pairs[k];
  }
  CHECK(report.whole_brain_accuracy == doctest::Approx(correct / static_cast<double>(pairs)));
}

TEST_CASE("pipeline is deterministic for identical seeds and specs") {
  const Dataset data = noise_dataset(40, 5, 2, 30);
  const FoldPlan plan = make_fold_plan(data, 5, -1, 31);
  const EvaluationReport a = run_pipeline(data, MethodSpec{RidgeSpec{}}, std::nullopt, plan, 2);
  const EvaluationReport b = run_pipeline(data, MethodSpec{RidgeSpec{}}, std::nullopt, plan, 1);
  CHECK(a.whole_brain_accuracy == b.whole_brain_accuracy);
  CHECK((a.per_voxel_nrss - b.per_voxel_nrss).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.per_voxel_accuracy - b.per_voxel_accuracy).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t v = 0; v < a.regularization.per_voxel.size(); ++v)
    CHECK(*a.regularization.per_voxel[v].ridge_lambda == *b.regularization.per_voxel[v].ridge_lambda);
}

TEST_CASE("fits never touch held-out rows") {
  const Dataset data = noise_dataset(40, 4, 2, 32);
  const FoldPlan plan = make_fold_plan(data, 5, -1, 33);
  const auto& fold = plan.outer[2];

  const FitResult clean = fit_method(data.rows_subset(fold.train), MethodSpec{RidgeSpec{}}, 5, 1);
  Dataset corrupted = data;
  for (const int r : fold.test)
    for (int v = 0; v < 4; ++v) corrupted.responses(r, v) = 1e6;
  const FitResult after = fit_method(corrupted.rows_subset(fold.train), MethodSpec{RidgeSpec{}}, 5, 1);
  CHECK((clean.field.coefficients - after.field.coefficients).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all-noise data scores inside the exact binomial interval around one half") {
  const Dataset data = noise_dataset(60, 8, 2, 40);
  const FoldPlan plan = make_fold_plan(data, 10, -1, 41);
  const EvaluationReport report = run_pipeline(data, MethodSpec{OlsSpec{}}, std::nullopt, plan, 2);
  std::int64_t pairs = 0;
  for (const auto n : report.fold_pairs) pairs += n;
  const auto [lo, hi] = stats::binomial_central_interval(static_cast<int>(pairs), 0.5, 0.95);
  const double correct = report.whole_brain_accuracy * static_cast<double>(pairs);
  CHECK(correct >= lo);
  CHECK(correct <= hi);
}

TEST_CASE("one perfect voxel dominates the whole-brain decision") {
  const int rows = 60, v_count = 100;
  const Matrix design = gaussian_design(rows, 3, 50);
  const Vector beta = gaussian_design(3, 1, 51).col(0) * 3.0;
  Matrix responses = gaussian_design(rows, v_count, 52);  // 99 noise voxels
  responses.col(0) = design * beta;                       // one perfect voxel
  const Dataset data = Dataset::create(design, std::move(responses), grid_geometry(v_count),
                                       contiguous_partition(v_count, 4));
  const FoldPlan plan = make_fold_plan(data, 10, -1, 53);
  const EvaluationReport report = run_pipeline(data, MethodSpec{OlsSpec{}}, std::nullopt, plan, 2);
  CHECK(report.whole_brain_accuracy >= 0.9);
  CHECK(report.per_voxel_accuracy(0) >= 0.99);
}

TEST_CASE("pipeline with ball smoothing tunes radii and records them") {
  // shared signal across a 3x3x3 cube with heavy noise: smoothing should win
  const int rows = 60, v_count = 27, p = 2;
  const Matrix design = gaussian_design(rows, p, 60);
  const Vector beta = Vector::Constant(p, 2.0);
  Rng noise(61);
  Matrix responses(rows, v_count);
  for (int v = 0; v < v_count; ++v)
    for (int t = 0; t < rows; ++t) responses(t, v) = design.row(t).dot(beta) + 3.0 * noise.normal();
  const Dataset data = Dataset::create(design, std::move(responses), grid_geometry(v_count),
                                       contiguous_partition(v_count, 1));
  const FoldPlan plan = make_fold_plan(data, 5, -1, 62);
  const SmoothingTune tune = BallTune{1, {0.0, 1.0, 2.0}};
  const EvaluationReport report = run_pipeline(data, MethodSpec{OlsSpec{}}, tune, plan, 2);
  CHECK(report.method == "ols+smoothed");
  double mean_radius = 0.0;
  for (const auto& pv : report.regularization.per_voxel) {
    REQUIRE(pv.smoothing_radius.has_value());
    mean_radius += *pv.smoothing_radius;
  }
  mean_radius /= v_count;
  CHECK(mean_radius > 0.0);
}

TEST_CASE("pipeline with roi smoothing reports the tuned gamma") {
  const Dataset data = noise_dataset(45, 9, 2, 70);
  const FoldPlan plan = make_fold_plan(data, 5, -1, 71);
  const SmoothingTune tune = RoiTune{{0.0, 0.5}, RoiWeights::Uniform, {1.0}};
  const EvaluationReport report = run_pipeline(data, MethodSpec{OlsSpec{}}, tune, plan, 2);
  CHECK(report.method == "ols+smoothed");
  CHECK(report.roi_gamma >= 0.0);
  CHECK(report.whole_brain_accuracy >= 0.0);
  CHECK(report.whole_brain_accuracy <= 1.0);
}

TEST_CASE("pipeline runs end-to-end on dynamic datasets with trimmed folds") {
  const Dataset data = dynamic_dataset(104, 4, 80);  // 100 rows after lag
  const FoldPlan plan = make_fold_plan(data, 5, -1, 81);
  const EvaluationReport a = run_pipeline(data, MethodSpec{RidgeSpec{}}, std::nullopt, plan, 2);
  const EvaluationReport b = run_pipeline(data, MethodSpec{RidgeSpec{}}, std::nullopt, plan, 1);
  CHECK(a.whole_brain_accuracy >= 0.0);
  CHECK(a.whole_brain_accuracy <= 1.0);
  CHECK(a.whole_brain_accuracy == b.whole_brain_accuracy);
  for (int v = 0; v < 4; ++v) CHECK(std::isfinite(a.per_voxel_nrss(v)));
}
