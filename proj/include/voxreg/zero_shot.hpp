#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "voxreg/estimators.hpp"

namespace vxr {

// Binary zero-shot decision for one observed activity value against two
// candidate stimuli: the observation goes to the candidate whose predicted
// activity is closer. Ties choose the first candidate and score 0.5.
struct ZeroShotDecision {
  int chosen = 0;     // 0 = first candidate, 1 = second
  double score = 0.0; // 1 correct, 0 wrong, 0.5 tie
};

ZeroShotDecision zero_shot_classify(double observed, double predicted_first, double predicted_second,
                                    int true_index);

// Score for a held-out stimulus pair at a single voxel: both observations are
// classified against both candidates; returns the mean of the two scores.
double zero_shot_pair_score_voxel(double pred_first, double pred_second, double obs_first, double obs_second);

// Whole-brain decision: distance to candidate c is sum_v w_v (y_v - pred_{c,v})^2.
// Returns the mean score of the pair's two observed patterns.
double zero_shot_pair_score_brain(const Vector& weights, const Vector& pred_first, const Vector& pred_second,
                                  const Vector& obs_first, const Vector& obs_second);

// w_v = 1 / rank_v with accuracies ranked descending; ties share the mean of
// tied ranks.
Vector rank_weights(const Vector& training_accuracy);

// All unordered index pairs when their count is <= cap, otherwise `cap` pairs
// sampled with the given stream.
struct PairSet {
  std::vector<std::pair<int, int>> pairs;
  bool sampled = false;
};

PairSet enumerate_pairs(int n, std::size_t cap, std::uint64_t seed, std::uint64_t lane);

}  // namespace vxr
