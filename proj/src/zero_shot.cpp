#include "voxreg/zero_shot.hpp"

#include <cmath>

#include "voxreg/errors.hpp"
#include "voxreg/rng.hpp"
#include "voxreg/stats.hpp"

namespace vxr {

ZeroShotDecision zero_shot_classify(double observed, double predicted_first, double predicted_second,
                                    int true_index) {
  const double d_first = std::fabs(observed - predicted_first);
  const double d_second = std::fabs(observed - predicted_second);
  ZeroShotDecision decision;
  if (d_first == d_second) {
    decision.chosen = 0;
    decision.score = 0.5;
    return decision;
  }
  decision.chosen = d_first < d_second ? 0 : 1;
  decision.score = decision.chosen == true_index ? 1.0 : 0.0;
  return decision;
}

double zero_shot_pair_score_voxel(double pred_first, double pred_second, double obs_first, double obs_second) {
  const double s1 = zero_shot_classify(obs_first, pred_first, pred_second, 0).score;
  const double s2 = zero_shot_classify(obs_second, pred_first, pred_second, 1).score;
  return 0.5 * (s1 + s2);
}

namespace {

double brain_distance(const Vector& weights, const Vector& observed, const Vector& predicted) {
  return (observed - predicted).array().square().matrix().dot(weights);
}

double classify_brain(const Vector& weights, const Vector& observed, const Vector& pred_first,
                      const Vector& pred_second, int true_index) {
  const double d_first = brain_distance(weights, observed, pred_first);
  const double d_second = brain_distance(weights, observed, pred_second);
  if (d_first == d_second) return 0.5;
  const int chosen = d_first < d_second ? 0 : 1;
  return chosen == true_index ? 1.0 : 0.0;
}

}  // namespace

double zero_shot_pair_score_brain(const Vector& weights, const Vector& pred_first, const Vector& pred_second,
                                  const Vector& obs_first, const Vector& obs_second) {
  const double s1 = classify_brain(weights, obs_first, pred_first, pred_second, 0);
  const double s2 = classify_brain(weights, obs_second, pred_first, pred_second, 1);
  return 0.5 * (s1 + s2);
}

Vector rank_weights(const Vector& training_accuracy) {
  std::vector<double> negated(static_cast<std::size_t>(training_accuracy.size()));
  for (Eigen::Index v = 0; v < training_accuracy.size(); ++v) negated[static_cast<std::size_t>(v)] = -training_accuracy(v);
  const auto ranks = stats::ranks_mean_ties(negated);  // descending accuracy order
  Vector weights(training_accuracy.size());
  for (Eigen::Index v = 0; v < weights.size(); ++v) weights(v) = 1.0 / ranks[static_cast<std::size_t>(v)];
  return weights;
}

PairSet enumerate_pairs(int n, std::size_t cap, std::uint64_t seed, std::uint64_t lane) {
  PairSet set;
  const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  if (total <= cap) {
    set.pairs.reserve(total);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) set.pairs.emplace_back(i, j);
    return set;
  }
  set.sampled = true;
  Rng rng = Rng::stream(seed, stream_tag::kPairSampling, lane);
  set.pairs.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) {
    const int i = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    set.pairs.emplace_back(std::min(i, j), std::max(i, j));
  }
  return set;
}

}  // namespace vxr
