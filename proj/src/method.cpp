#include "voxreg/method.hpp"

namespace vxr {

std::string MethodSpec::name() const {
  if (std::holds_alternative<OlsSpec>(spec)) return "ols";
  if (std::holds_alternative<RidgeSpec>(spec)) return "ridge";
  if (std::holds_alternative<EnSpec>(spec)) return "elastic_net";
  return "sae";
}

FitResult fit_method(const Dataset& train, const MethodSpec& method, std::uint64_t seed, int threads) {
  FitResult result;
  if (const auto* ols = std::get_if<OlsSpec>(&method.spec)) {
    (void)ols;
    result.field = ols_fit(train);
    result.map.per_voxel.resize(static_cast<std::size_t>(train.voxels()));
  } else if (const auto* ridge = std::get_if<RidgeSpec>(&method.spec)) {
    const auto grid = ridge->grid.empty() ? default_lambda_grid(train.design) : ridge->grid;
    auto cv = ridge_fit_cv(train, grid, threads);
    result.field = std::move(cv.field);
    result.map = std::move(cv.map);
  } else if (const auto* en = std::get_if<EnSpec>(&method.spec)) {
    auto fit = elastic_net_fit_cv(train, en->lambda1_grid, en->lambda2_grid, en->folds, seed, en->options, threads);
    result.field = std::move(fit.field);
    result.map = std::move(fit.map);
  } else {
    const auto& sae = std::get<SaeSpec>(method.spec);
    SaeOptions options = sae.options;
    options.threads = threads;
    auto fit = sae_fit(train, sae.hyper, options, seed);
    result.field = std::move(fit.field);
    result.map = std::move(fit.map);
  }
  return result;
}

}  // namespace vxr
