#include "voxreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voxreg/errors.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/rng.hpp"
#include "voxreg/stats.hpp"

namespace vxr {

namespace {

constexpr std::size_t kPairCap = 10000;

// seed tags local to the pipeline
constexpr std::uint64_t kTagOuterFit = 0x11;
constexpr std::uint64_t kTagInnerFit = 0x12;
constexpr std::uint64_t kTagInnerCv = 0x13;

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_below(i)]);
  return order;
}

}  // namespace

FoldPlan make_fold_plan(const Dataset& dataset, int outer_folds, int trim, std::uint64_t seed) {
  const int t = static_cast<int>(dataset.rows());
  require(outer_folds >= 2, "invalid-parameter", "need at least two outer folds");
  require(t >= outer_folds, "insufficient-data", "fewer rows than folds");
  const bool dynamic = dataset.kind == DatasetKind::Dynamic;
  if (trim < 0) trim = dynamic ? 5 : 0;

  FoldPlan plan;
  plan.trim = trim;
  plan.seed = seed;
  plan.kind = dataset.kind;
  plan.outer.resize(static_cast<std::size_t>(outer_folds));

  if (!dynamic) {
    Rng rng = Rng::stream(seed, stream_tag::kFoldPlan, 0);
    const auto order = shuffled_indices(t, rng);
    for (int k = 0; k < outer_folds; ++k) {
      const int start = static_cast<int>(static_cast<long long>(k) * t / outer_folds);
      const int end = static_cast<int>(static_cast<long long>(k + 1) * t / outer_folds);
      auto& fold = plan.outer[static_cast<std::size_t>(k)];
      std::vector<char> is_test(static_cast<std::size_t>(t), 0);
      for (int i = start; i < end; ++i) is_test[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
      for (int r = 0; r < t; ++r) (is_test[static_cast<std::size_t>(r)] ? fold.test : fold.train).push_back(r);
    }
  } else {
    for (int k = 0; k < outer_folds; ++k) {
      const int start = static_cast<int>(static_cast<long long>(k) * t / outer_folds);
      const int end = static_cast<int>(static_cast<long long>(k + 1) * t / outer_folds);
      auto& fold = plan.outer[static_cast<std::size_t>(k)];
      for (int r = start; r < end; ++r) fold.test.push_back(r);
      for (int r = 0; r < t; ++r)
        if (r < start - trim || r >= end + trim) fold.train.push_back(r);
    }
  }

  for (std::size_t k = 0; k < plan.outer.size(); ++k) {
    auto& fold = plan.outer[k];
    if (fold.test.empty() || fold.train.empty())
      fail_validation("insufficient-data", "fold " + std::to_string(k) + " is empty after trimming");

    // Inner split: ~1/9 of the train rows for validation, i.e. an 80%/10%
    // split of the whole data within the 90% training portion.
    const int n_train = static_cast<int>(fold.train.size());
    const int n_val = std::max(1, n_train / 9);
    Rng rng = Rng::stream(seed, stream_tag::kInnerSplit, static_cast<std::uint64_t>(k));
    if (!dynamic) {
      const auto order = shuffled_indices(n_train, rng);
      for (int i = 0; i < n_train; ++i) {
        const int row = fold.train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        (i < n_val ? fold.validation : fold.inner_train).push_back(row);
      }
      std::sort(fold.validation.begin(), fold.validation.end());
      std::sort(fold.inner_train.begin(), fold.inner_train.end());
    } else {
      const int start = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n_train - n_val + 1)));
      for (int i = start; i < start + n_val; ++i) fold.validation.push_back(fold.train[static_cast<std::size_t>(i)]);
      const int lo = fold.validation.front() - trim;
      const int hi = fold.validation.back() + trim;
      for (const int r : fold.train)
        if (r < lo || r > hi) fold.inner_train.push_back(r);
      if (fold.inner_train.empty())
        fail_validation("insufficient-data", "inner split empty after trimming in fold " + std::to_string(k));
    }
  }
  return plan;
}

Vector normalized_rss(const Matrix& predicted, const Matrix& observed, const Vector& train_mean) {
  require(predicted.rows() == observed.rows() && predicted.cols() == observed.cols(), "shape-mismatch",
          "predicted and observed shapes differ");
  require(train_mean.size() == observed.cols(), "shape-mismatch", "train_mean length must equal voxel count");
  Vector out(observed.cols());
  for (Eigen::Index v = 0; v < observed.cols(); ++v) {
    const double rss = (observed.col(v) - predicted.col(v)).squaredNorm();
    const double tss = (observed.col(v).array() - train_mean(v)).square().sum();
    out(v) = tss > 0.0 ? rss / tss : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double zero_shot_brain(const CoefficientField& field, const Vector& weights, const Matrix& test_design,
                       const Matrix& test_responses, const PairSet& pairs) {
  const Matrix pred = predict(field, test_design);
  double total = 0.0;
  for (const auto& [i, j] : pairs.pairs)
    total += zero_shot_pair_score_brain(weights, pred.row(i).transpose(), pred.row(j).transpose(),
                                        test_responses.row(i).transpose(), test_responses.row(j).transpose());
  return pairs.pairs.empty() ? 0.0 : total / static_cast<double>(pairs.pairs.size());
}

namespace {

// Per-voxel zero-shot score sums over a pair set, given predicted and observed
// activity for the same rows.
void accumulate_voxel_scores(const Matrix& pred, const Matrix& observed, const PairSet& pairs, int threads,
                             Vector& score_sum) {
  parallel_for(static_cast<std::size_t>(pred.cols()), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const auto col = static_cast<Eigen::Index>(v);
      double acc = 0.0;
      for (const auto& [i, j] : pairs.pairs)
        acc += zero_shot_pair_score_voxel(pred(i, col), pred(j, col), observed(i, col), observed(j, col));
      score_sum(col) += acc;
    }
  });
}

CoefficientField apply_smoothing(const CoefficientField& field, const Dataset& dataset,
                                 const SmoothingSpec& spec) {
  return smooth_field(field, smoothing_weights(dataset.geometry, dataset.rois, spec));
}

// Single inner 10-fold pass over the train rows: per-voxel zero-shot accuracy
// of the (optionally smoothed) estimator, used only for rank weights.
Vector inner_accuracy_pass(const Dataset& dataset, const std::vector<int>& train_rows, const MethodSpec& method,
                           const std::optional<SmoothingSpec>& smoothing, const FoldPlan& plan,
                           std::size_t fold_index, int threads) {
  const Eigen::Index v_count = dataset.voxels();
  const Dataset subset = dataset.rows_subset(train_rows);
  const int folds = std::min<int>(10, static_cast<int>(subset.rows()) / 2);
  if (folds < 2) return Vector::Constant(v_count, 0.5);

  FoldPlan inner;
  try {
    inner = make_fold_plan(subset, folds, plan.trim, derive_seed(plan.seed, kTagInnerCv, fold_index));
  } catch (const Error&) {
    return Vector::Constant(v_count, 0.5);  // too little data to rank voxels
  }

  Vector score_sum = Vector::Zero(v_count);
  double pair_count = 0.0;
  for (std::size_t k = 0; k < inner.outer.size(); ++k) {
    const auto& fold = inner.outer[k];
    const Dataset fit_ds = subset.rows_subset(fold.train);
    const Dataset held = subset.rows_subset(fold.test);
    FitResult fit = fit_method(fit_ds, method, derive_seed(plan.seed, kTagInnerCv + 0x100, fold_index * 64 + k),
                               threads);
    CoefficientField field =
        smoothing ? apply_smoothing(fit.field, dataset, *smoothing) : std::move(fit.field);
    const PairSet pairs =
        enumerate_pairs(static_cast<int>(held.rows()), kPairCap, plan.seed, 0x1000 + fold_index * 64 + k);
    if (pairs.pairs.empty()) continue;
    const Matrix pred = predict(field, held.design);
    accumulate_voxel_scores(pred, held.responses, pairs, threads, score_sum);
    pair_count += static_cast<double>(pairs.pairs.size());
  }
  if (pair_count == 0.0) return Vector::Constant(v_count, 0.5);
  return score_sum / pair_count;
}

}  // namespace

EvaluationReport run_pipeline(const Dataset& dataset, const MethodSpec& method,
                              const std::optional<SmoothingTune>& smoothing, const FoldPlan& plan,
                              int threads) {
  const Eigen::Index v_count = dataset.voxels();
  EvaluationReport report;
  report.method = method.name();
  report.per_voxel_nrss = Vector::Zero(v_count);
  report.per_voxel_accuracy = Vector::Zero(v_count);
  report.regularization.per_voxel.resize(static_cast<std::size_t>(v_count));

  Vector nrss_sum = Vector::Zero(v_count);
  Eigen::VectorXi nrss_count = Eigen::VectorXi::Zero(v_count);
  Vector voxel_score_sum = Vector::Zero(v_count);
  double total_pairs = 0.0;
  double total_correct = 0.0;

  struct RegAccum {
    double ridge = 0, l1 = 0, l2 = 0, radius = 0, nu2 = 0;
    int n_ridge = 0, n_l1 = 0, n_l2 = 0, n_radius = 0, n_nu2 = 0;
  };
  std::vector<RegAccum> reg(static_cast<std::size_t>(v_count));
  std::vector<double> gamma_choices, bandwidth_choices;

  for (std::size_t f = 0; f < plan.outer.size(); ++f) {
    const auto& fold = plan.outer[f];
    const Dataset train = dataset.rows_subset(fold.train);
    const Dataset test = dataset.rows_subset(fold.test);

    FitResult fit = fit_method(train, method, derive_seed(plan.seed, kTagOuterFit, f), threads);

    // ---- smoothing-parameter tuning on the inner split ----
    std::optional<SmoothingSpec> chosen;
    if (smoothing) {
      const Dataset inner_ds = dataset.rows_subset(fold.inner_train);
      const Dataset val_ds = dataset.rows_subset(fold.validation);
      FitResult inner_fit = fit_method(inner_ds, method, derive_seed(plan.seed, kTagInnerFit, f), threads);
      const PairSet val_pairs =
          enumerate_pairs(static_cast<int>(val_ds.rows()), kPairCap, plan.seed, 0x2000 + f);

      if (const auto* ball = std::get_if<BallTune>(&*smoothing)) {
        std::vector<double> grid = ball->radius_grid;
        std::sort(grid.begin(), grid.end());
        require(!grid.empty() && grid.front() == 0.0, "invalid-parameter", "radius grid must include 0");
        Matrix acc = Matrix::Zero(v_count, static_cast<Eigen::Index>(grid.size()));
        for (std::size_t r = 0; r < grid.size(); ++r) {
          BallSpec spec{ball->p, Vector::Constant(v_count, grid[r])};
          const CoefficientField cand =
              grid[r] == 0.0 ? inner_fit.field : smooth_ball(inner_fit.field, dataset.geometry, spec);
          const Matrix pred = predict(cand, val_ds.design);
          Vector col = Vector::Zero(v_count);
          if (!val_pairs.pairs.empty()) accumulate_voxel_scores(pred, val_ds.responses, val_pairs, threads, col);
          acc.col(static_cast<Eigen::Index>(r)) = col;
        }
        Vector radii(v_count);
        for (Eigen::Index v = 0; v < v_count; ++v) {
          int best = 0;
          for (std::size_t r = 1; r < grid.size(); ++r)
            if (acc(v, static_cast<Eigen::Index>(r)) > acc(v, best)) best = static_cast<int>(r);
          radii(v) = grid[static_cast<std::size_t>(best)];
          reg[static_cast<std::size_t>(v)].radius += radii(v);
          reg[static_cast<std::size_t>(v)].n_radius += 1;
        }
        chosen = SmoothingSpec{BallSpec{ball->p, std::move(radii)}};
      } else {
        const auto& roi = std::get<RoiTune>(*smoothing);
        std::vector<double> gammas = roi.gamma_grid;
        std::sort(gammas.begin(), gammas.end());
        require(!gammas.empty() && gammas.front() == 0.0, "invalid-parameter", "gamma grid must include 0");
        std::vector<double> bandwidths = roi.bandwidth_grid;
        std::sort(bandwidths.begin(), bandwidths.end());
        if (roi.weights == RoiWeights::Uniform) bandwidths = {1.0};  // bandwidth unused
        double best_acc = -1.0, best_gamma = 0.0, best_h = bandwidths.front();
        for (const double gamma : gammas)
          for (const double h : bandwidths) {
            const RoiSpec spec{gamma, roi.weights, h};
            const CoefficientField cand =
                gamma == 0.0 ? inner_fit.field : smooth_roi(inner_fit.field, dataset.geometry, dataset.rois, spec);
            const Matrix pred = predict(cand, val_ds.design);
            Vector col = Vector::Zero(v_count);
            if (!val_pairs.pairs.empty()) accumulate_voxel_scores(pred, val_ds.responses, val_pairs, threads, col);
            const double mean_acc = val_pairs.pairs.empty() ? 0.0 : col.mean() / static_cast<double>(val_pairs.pairs.size());
            if (mean_acc > best_acc) {
              best_acc = mean_acc;
              best_gamma = gamma;
              best_h = h;
            }
            if (gamma == 0.0) break;  // bandwidth irrelevant at gamma 0
          }
        gamma_choices.push_back(best_gamma);
        bandwidth_choices.push_back(best_h);
        chosen = SmoothingSpec{RoiSpec{best_gamma, roi.weights, best_h}};
      }
      fit.field = apply_smoothing(fit.field, dataset, *chosen);
    }

    // ---- rank weights from a single inner 10-fold pass over train ----
    const Vector train_acc = inner_accuracy_pass(dataset, fold.train, method, chosen, plan, f, threads);
    const Vector weights = rank_weights(train_acc);

    // ---- held-out evaluation ----
    const Matrix pred = predict(fit.field, test.design);
    const Vector train_mean = train.responses.colwise().mean();
    const Vector nrss = normalized_rss(pred, test.responses, train_mean);
    for (Eigen::Index v = 0; v < v_count; ++v) {
      if (std::isnan(nrss(v))) continue;
      nrss_sum(v) += nrss(v);
      nrss_count(v) += 1;
    }

    const PairSet pairs = enumerate_pairs(static_cast<int>(test.rows()), kPairCap, plan.seed, f);
    report.pairs_sampled = report.pairs_sampled || pairs.sampled;
    if (!pairs.pairs.empty()) {
      accumulate_voxel_scores(pred, test.responses, pairs, threads, voxel_score_sum);
      double correct = 0.0;
      for (const auto& [i, j] : pairs.pairs)
        correct += zero_shot_pair_score_brain(weights, pred.row(i).transpose(), pred.row(j).transpose(),
                                              test.responses.row(i).transpose(), test.responses.row(j).transpose());
      report.fold_accuracy.push_back(correct / static_cast<double>(pairs.pairs.size()));
      report.fold_pairs.push_back(static_cast<std::int64_t>(pairs.pairs.size()));
      total_correct += correct;
      total_pairs += static_cast<double>(pairs.pairs.size());
    }

    for (Eigen::Index v = 0; v < v_count; ++v) {
      const auto& pv = fit.map.per_voxel.empty() ? VoxelRegularization{} : fit.map.per_voxel[static_cast<std::size_t>(v)];
      auto& acc = reg[static_cast<std::size_t>(v)];
      if (pv.ridge_lambda) { acc.ridge += *pv.ridge_lambda; acc.n_ridge += 1; }
      if (pv.en_lambda1) { acc.l1 += *pv.en_lambda1; acc.n_l1 += 1; }
      if (pv.en_lambda2) { acc.l2 += *pv.en_lambda2; acc.n_l2 += 1; }
      if (pv.posterior_nu2) { acc.nu2 += *pv.posterior_nu2; acc.n_nu2 += 1; }
    }
  }

  for (Eigen::Index v = 0; v < v_count; ++v) {
    report.per_voxel_nrss(v) = nrss_count(v) > 0 ? nrss_sum(v) / nrss_count(v)
                                                 : std::numeric_limits<double>::quiet_NaN();
    if (nrss_count(v) == 0) report.missing_nrss_voxels += 1;
    report.per_voxel_accuracy(v) = total_pairs > 0.0 ? voxel_score_sum(v) / total_pairs : 0.5;
    auto& out = report.regularization.per_voxel[static_cast<std::size_t>(v)];
    const auto& acc = reg[static_cast<std::size_t>(v)];
    if (acc.n_ridge) out.ridge_lambda = acc.ridge / acc.n_ridge;
    if (acc.n_l1) out.en_lambda1 = acc.l1 / acc.n_l1;
    if (acc.n_l2) out.en_lambda2 = acc.l2 / acc.n_l2;
    if (acc.n_radius) out.smoothing_radius = acc.radius / acc.n_radius;
    if (acc.n_nu2) out.posterior_nu2 = acc.nu2 / acc.n_nu2;
  }
  report.whole_brain_accuracy = total_pairs > 0.0 ? total_correct / total_pairs : 0.0;
  if (smoothing) {
    report.method += "+smoothed";
    if (!gamma_choices.empty()) {
      report.roi_gamma = stats::mean(gamma_choices);
      report.roi_bandwidth = stats::mean(bandwidth_choices);
    }
  }
  return report;
}

}  // namespace vxr
