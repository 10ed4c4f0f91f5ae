#pragma once

#include <cstdint>
#include <variant>

#include "voxreg/dataset.hpp"
#include "voxreg/elastic_net.hpp"
#include "voxreg/estimators.hpp"
#include "voxreg/sae.hpp"

namespace vxr {

struct OlsSpec {};

struct RidgeSpec {
  std::vector<double> grid;  // empty = default grid from the training design
};

struct EnSpec {
  std::vector<double> lambda1_grid;  // empty = default
  std::vector<double> lambda2_grid;  // empty = default
  int folds = 10;
  ElasticNetOptions options;
};

struct SaeSpec {
  Hyperparameters hyper;
  SaeOptions options;
};

// Which estimator to run, with its per-voxel tuning configuration.
struct MethodSpec {
  std::variant<OlsSpec, RidgeSpec, EnSpec, SaeSpec> spec;
  std::string name() const;
};

struct FitResult {
  CoefficientField field;
  RegularizationMap map;
};

// Fits the requested method on `train` with per-voxel tuning. The seed drives
// elastic-net fold assignment and the Gibbs chain; OLS and ridge-GCV are
// deterministic.
FitResult fit_method(const Dataset& train, const MethodSpec& method, std::uint64_t seed, int threads = 0);

}  // namespace vxr
