#include "voxreg/sae.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "voxreg/errors.hpp"
#include "voxreg/parallel.hpp"
#include "voxreg/stats.hpp"

namespace vxr {

void Hyperparameters::validate() const {
  for (const double h : {a, b, c, d, e, f})
    require(h > 0.0 && std::isfinite(h), "invalid-parameter", "hyperparameters must be strictly positive");
}

namespace {

double prior_mean_guarded(double shape, double scale) {
  return shape > 1.0 ? scale / (shape - 1.0) : scale;
}

// Unique draw-stream lane per (sweep, phase, index); index < 2^24.
std::uint64_t lane_key(std::uint64_t sweep, std::uint64_t phase, std::uint64_t index) {
  return (sweep << 28) | (phase << 24) | index;
}

constexpr std::uint64_t kPhaseZ = 0, kPhaseU = 1, kPhaseSigma = 2, kPhaseAlpha = 3, kPhaseNu = 4;

void check_finite(double value, const char* what, int index) {
  if (!std::isfinite(value))
    fail_runtime("numerical-blowup", std::string(what) + " became non-finite at index " + std::to_string(index));
}

}  // namespace

GibbsState GibbsState::initial(int voxels, int areas, int features, const Hyperparameters& hyper) {
  hyper.validate();
  GibbsState s;
  s.u = Matrix::Zero(areas, features);
  s.z = Matrix::Zero(voxels, features);
  s.sigma2 = Vector::Constant(voxels, prior_mean_guarded(hyper.a, hyper.b));
  s.alpha2 = Vector::Constant(areas, prior_mean_guarded(hyper.c, hyper.d));
  s.nu2 = Vector::Constant(voxels, prior_mean_guarded(hyper.e, hyper.f));
  return s;
}

SaePrecompute SaePrecompute::from(const Dataset& dataset) {
  SaePrecompute pre;
  pre.xtx = dataset.design.transpose() * dataset.design;
  pre.xty = dataset.design.transpose() * dataset.responses;
  pre.yty = dataset.responses.colwise().squaredNorm();
  return pre;
}

Vector GaussianCanonical::mean() const { return precision.llt().solve(shift); }

Matrix GaussianCanonical::covariance() const {
  return precision.llt().solve(Matrix::Identity(precision.rows(), precision.cols()));
}

GaussianCanonical z_conditional(const GibbsState& state, const SaePrecompute& pre,
                                const RoiPartition& rois, int voxel) {
  const int area = rois.assignment[static_cast<std::size_t>(voxel)];
  const double inv_sigma2 = 1.0 / state.sigma2(voxel);
  GaussianCanonical g;
  g.precision = pre.xtx * inv_sigma2;
  g.precision.diagonal().array() += 1.0 / state.nu2(voxel);
  g.shift = (pre.xty.col(voxel) - pre.xtx * state.u.row(area).transpose()) * inv_sigma2;
  return g;
}

GaussianCanonical u_conditional(const GibbsState& state, const SaePrecompute& pre,
                                const RoiPartition& rois, int area) {
  double precision_weight = 0.0;
  Vector shift = Vector::Zero(pre.xtx.rows());
  for (const int v : rois.areas[static_cast<std::size_t>(area)].voxels) {
    const double inv_sigma2 = 1.0 / state.sigma2(v);
    precision_weight += inv_sigma2;
    shift += (pre.xty.col(v) - pre.xtx * state.z.row(v).transpose()) * inv_sigma2;
  }
  GaussianCanonical g;
  g.precision = pre.xtx * precision_weight;
  g.precision.diagonal().array() += 1.0 / state.alpha2(area);
  g.shift = std::move(shift);
  return g;
}

IgParams sigma2_conditional(const GibbsState& state, const SaePrecompute& pre, const RoiPartition& rois,
                            Eigen::Index rows, int voxel, const Hyperparameters& hyper) {
  const int area = rois.assignment[static_cast<std::size_t>(voxel)];
  const Vector beta = (state.u.row(area) + state.z.row(voxel)).transpose();
  const double rss = pre.yty(voxel) - 2.0 * beta.dot(pre.xty.col(voxel)) + beta.dot(pre.xtx * beta);
  return IgParams{0.5 * (2.0 * hyper.a + static_cast<double>(rows)), 0.5 * (2.0 * hyper.b + std::max(rss, 0.0))};
}

IgParams alpha2_conditional(const GibbsState& state, int area, const Hyperparameters& hyper) {
  const double p = static_cast<double>(state.u.cols());
  return IgParams{0.5 * (2.0 * hyper.c + p), 0.5 * (2.0 * hyper.d + state.u.row(area).squaredNorm())};
}

IgParams nu2_conditional(const GibbsState& state, int voxel, const Hyperparameters& hyper) {
  const double p = static_cast<double>(state.z.cols());
  return IgParams{0.5 * (2.0 * hyper.e + p), 0.5 * (2.0 * hyper.f + state.z.row(voxel).squaredNorm())};
}

Vector sample_gaussian_canonical(const GaussianCanonical& g, Rng& rng) {
  Eigen::LLT<Matrix> llt(g.precision);
  if (llt.info() != Eigen::Success)
    fail_runtime("numerical-blowup", "conditional precision matrix not positive definite");
  const Vector mean = llt.solve(g.shift);
  Vector noise(g.shift.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = rng.normal();
  // x = mean + U^{-1} xi has covariance (U' U)^{-1} = precision^{-1}
  return mean + llt.matrixU().solve(noise);
}

void gibbs_sweep(GibbsState& state, const Dataset& dataset, const SaePrecompute& pre,
                 const Hyperparameters& hyper, std::uint64_t seed, std::uint64_t sweep_index, int threads) {
  hyper.validate();
  const int v_count = static_cast<int>(dataset.voxels());
  const int a_count = dataset.rois.area_count();

  // z_v: conditionally independent across voxels
  parallel_for(static_cast<std::size_t>(v_count), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      Rng rng = Rng::stream(seed, stream_tag::kGibbs, lane_key(sweep_index, kPhaseZ, v));
      const auto g = z_conditional(state, pre, dataset.rois, static_cast<int>(v));
      state.z.row(static_cast<Eigen::Index>(v)) = sample_gaussian_canonical(g, rng).transpose();
      check_finite(state.z(static_cast<Eigen::Index>(v), 0), "z", static_cast<int>(v));
    }
  });

  // u_a: reduction over each area's voxels, then a draw per area
  for (int a = 0; a < a_count; ++a) {
    Rng rng = Rng::stream(seed, stream_tag::kGibbs, lane_key(sweep_index, kPhaseU, static_cast<std::uint64_t>(a)));
    const auto g = u_conditional(state, pre, dataset.rois, a);
    state.u.row(a) = sample_gaussian_canonical(g, rng).transpose();
    check_finite(state.u(a, 0), "u", a);
  }

  // sigma2_v
  parallel_for(static_cast<std::size_t>(v_count), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      Rng rng = Rng::stream(seed, stream_tag::kGibbs, lane_key(sweep_index, kPhaseSigma, v));
      const auto ig = sigma2_conditional(state, pre, dataset.rois, dataset.rows(), static_cast<int>(v), hyper);
      state.sigma2(static_cast<Eigen::Index>(v)) = rng.inv_gamma(ig.shape, ig.scale);
      check_finite(state.sigma2(static_cast<Eigen::Index>(v)), "sigma2", static_cast<int>(v));
    }
  });

  // alpha2_a
  for (int a = 0; a < a_count; ++a) {
    Rng rng = Rng::stream(seed, stream_tag::kGibbs, lane_key(sweep_index, kPhaseAlpha, static_cast<std::uint64_t>(a)));
    const auto ig = alpha2_conditional(state, a, hyper);
    state.alpha2(a) = rng.inv_gamma(ig.shape, ig.scale);
    check_finite(state.alpha2(a), "alpha2", a);
  }

  // nu2_v
  parallel_for(static_cast<std::size_t>(v_count), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      Rng rng = Rng::stream(seed, stream_tag::kGibbs, lane_key(sweep_index, kPhaseNu, v));
      const auto ig = nu2_conditional(state, static_cast<int>(v), hyper);
      state.nu2(static_cast<Eigen::Index>(v)) = rng.inv_gamma(ig.shape, ig.scale);
      check_finite(state.nu2(static_cast<Eigen::Index>(v)), "nu2", static_cast<int>(v));
    }
  });
}

SaeFit sae_fit(const Dataset& dataset, const Hyperparameters& hyper, const SaeOptions& options,
               std::uint64_t seed) {
  hyper.validate();
  require(options.samples >= 1, "invalid-parameter", "samples must be >= 1");
  require(options.burn_in >= 0 && options.thin >= 1, "invalid-parameter", "burn_in >= 0 and thin >= 1 required");

  const int v_count = static_cast<int>(dataset.voxels());
  const int a_count = dataset.rois.area_count();
  const int p = static_cast<int>(dataset.features());
  const SaePrecompute pre = SaePrecompute::from(dataset);

  GibbsState state = GibbsState::initial(v_count, a_count, p, hyper);

  Matrix beta_sum = Matrix::Zero(v_count, p);
  Matrix beta_sq_sum = Matrix::Zero(v_count, p);
  Vector nu2_sum = Vector::Zero(v_count);
  Vector sigma2_sum = Vector::Zero(v_count);

  SaeFit fit;
  const int mid = v_count / 2;
  const int total_sweeps = options.burn_in + options.thin * options.samples;
  int retained = 0;
  for (int sweep = 1; sweep <= total_sweeps; ++sweep) {
    try {
      gibbs_sweep(state, dataset, pre, hyper, seed, static_cast<std::uint64_t>(sweep), options.threads);
    } catch (const Error& e) {
      fail_runtime("numerical-blowup", "sweep " + std::to_string(sweep) + ": " + e.what());
    }
    if (sweep > options.burn_in && (sweep - options.burn_in) % options.thin == 0) {
      ++retained;
      for (int v = 0; v < v_count; ++v) {
        const int area = dataset.rois.assignment[static_cast<std::size_t>(v)];
        const auto beta = state.u.row(area) + state.z.row(v);
        beta_sum.row(v) += beta;
        beta_sq_sum.row(v) += beta.cwiseProduct(beta);
      }
      nu2_sum += state.nu2;
      sigma2_sum += state.sigma2;
      fit.monitor_beta00.push_back(state.u(dataset.rois.assignment[0], 0) + state.z(0, 0));
      fit.monitor_sigma2_mid.push_back(state.sigma2(mid));
      fit.monitor_nu2_mid.push_back(state.nu2(mid));
    }
  }

  const double n = static_cast<double>(retained);
  fit.summary.sample_count = retained;
  fit.summary.beta_mean = beta_sum / n;
  if (retained > 1) {
    const Matrix var =
        ((beta_sq_sum - beta_sum.cwiseProduct(beta_sum) / n) / (n - 1.0)).cwiseMax(0.0);
    fit.summary.beta_sd = var.cwiseSqrt();
  } else {
    fit.summary.beta_sd = Matrix::Zero(v_count, p);
  }
  fit.summary.nu2_mean = nu2_sum / n;

  fit.field.method = "sae";
  fit.field.coefficients = fit.summary.beta_mean;
  fit.field.std_errors = fit.summary.beta_sd;
  fit.field.noise_variance = sigma2_sum / n;
  fit.map.per_voxel.resize(static_cast<std::size_t>(v_count));
  for (int v = 0; v < v_count; ++v) fit.map.per_voxel[static_cast<std::size_t>(v)].posterior_nu2 = fit.summary.nu2_mean(v);
  fit.final_state = std::move(state);
  return fit;
}

void save_gibbs_state(const std::string& dir, const GibbsState& state) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  write_matrix_binary((base / "u.bin").string(), state.u);
  write_matrix_binary((base / "z.bin").string(), state.z);
  write_matrix_binary((base / "sigma2.bin").string(), state.sigma2);
  write_matrix_binary((base / "alpha2.bin").string(), state.alpha2);
  write_matrix_binary((base / "nu2.bin").string(), state.nu2);
}

GibbsState load_gibbs_state(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  GibbsState state;
  state.u = read_matrix_binary((base / "u.bin").string());
  state.z = read_matrix_binary((base / "z.bin").string());
  state.sigma2 = read_matrix_binary((base / "sigma2.bin").string()).col(0);
  state.alpha2 = read_matrix_binary((base / "alpha2.bin").string()).col(0);
  state.nu2 = read_matrix_binary((base / "nu2.bin").string()).col(0);
  return state;
}

namespace {

// Draws all parameters from their priors and data from the likelihood.
void forward_draw(GibbsState& state, Matrix& responses, const Dataset& instance,
                  const Hyperparameters& hyper, Rng& rng) {
  const int v_count = static_cast<int>(instance.voxels());
  const int a_count = instance.rois.area_count();
  const int p = static_cast<int>(instance.features());
  for (int a = 0; a < a_count; ++a) {
    state.alpha2(a) = rng.inv_gamma(hyper.c, hyper.d);
    for (int j = 0; j < p; ++j) state.u(a, j) = rng.normal() * std::sqrt(state.alpha2(a));
  }
  for (int v = 0; v < v_count; ++v) {
    state.nu2(v) = rng.inv_gamma(hyper.e, hyper.f);
    state.sigma2(v) = rng.inv_gamma(hyper.a, hyper.b);
    for (int j = 0; j < p; ++j) state.z(v, j) = rng.normal() * std::sqrt(state.nu2(v));
  }
  for (int v = 0; v < v_count; ++v) {
    const int area = instance.rois.assignment[static_cast<std::size_t>(v)];
    const Vector beta = (state.u.row(area) + state.z.row(v)).transpose();
    const Vector mean = instance.design * beta;
    const double sd = std::sqrt(state.sigma2(v));
    for (Eigen::Index t = 0; t < instance.rows(); ++t) responses(t, v) = mean(t) + sd * rng.normal();
  }
}

std::vector<double> monitored_stats(const GibbsState& state, const Matrix& responses) {
  std::vector<double> g;
  g.push_back(state.sigma2.mean());
  g.push_back(state.nu2.mean());
  g.push_back(state.alpha2.mean());
  g.push_back(state.u(0, 0));
  g.push_back(state.z(0, 0));
  g.push_back(state.z(0, 0) * state.z(0, 0));
  g.push_back(responses.size() > 0 ? responses.array().square().mean() : 0.0);
  return g;
}

const char* kMonitorNames[] = {"mean_sigma2", "mean_nu2", "mean_alpha2", "u00", "z00", "z00_sq", "mean_y_sq"};

}  // namespace

ConditionalCheckReport conditional_checks(const Hyperparameters& hyper, const Dataset& instance,
                                          int draws, std::uint64_t seed) {
  hyper.validate();
  require(instance.voxels() <= 10 && instance.rois.area_count() <= 2 && instance.rows() <= 30,
          "invalid-parameter", "conditional_checks expects a small instance (V<=10, A<=2, T<=30)");
  require(draws >= 100, "invalid-parameter", "need at least 100 draws");

  const int v_count = static_cast<int>(instance.voxels());
  const int a_count = instance.rois.area_count();
  const int p = static_cast<int>(instance.features());
  const std::size_t n_stats = std::size(kMonitorNames);

  ConditionalCheckReport report;

  // Forward draws: independent samples from the joint (parameters, data).
  std::vector<std::vector<double>> fwd(n_stats);
  {
    Rng rng = Rng::stream(seed, stream_tag::kChecks, 1);
    GibbsState state = GibbsState::initial(v_count, a_count, p, hyper);
    Matrix responses(instance.rows(), v_count);
    for (int i = 0; i < draws; ++i) {
      forward_draw(state, responses, instance, hyper, rng);
      const auto g = monitored_stats(state, responses);
      for (std::size_t s = 0; s < n_stats; ++s) fwd[s].push_back(g[s]);
    }
  }

  // Successive-conditional draws: Gibbs update of parameters given data, then
  // data redrawn from the likelihood. Any error in a conditional shows up as a
  // drift of these moments away from the forward ones.
  std::vector<std::vector<double>> succ(n_stats);
  {
    Rng rng = Rng::stream(seed, stream_tag::kChecks, 2);
    GibbsState state = GibbsState::initial(v_count, a_count, p, hyper);
    Dataset work = instance;
    Matrix responses(instance.rows(), v_count);
    forward_draw(state, responses, instance, hyper, rng);
    work.responses = responses;
    for (int i = 0; i < draws; ++i) {
      const SaePrecompute pre = SaePrecompute::from(work);
      gibbs_sweep(state, work, pre, hyper, seed ^ 0x5c5c5c5cULL, static_cast<std::uint64_t>(i), 1);
      for (int v = 0; v < v_count; ++v) {
        const int area = work.rois.assignment[static_cast<std::size_t>(v)];
        const Vector beta = (state.u.row(area) + state.z.row(v)).transpose();
        const Vector mean = work.design * beta;
        const double sd = std::sqrt(state.sigma2(v));
        for (Eigen::Index t = 0; t < work.rows(); ++t) work.responses(t, v) = mean(t) + sd * rng.normal();
      }
      const auto g = monitored_stats(state, work.responses);
      for (std::size_t s = 0; s < n_stats; ++s) succ[s].push_back(g[s]);
    }
  }

  bool all_pass = true;
  for (std::size_t s = 0; s < n_stats; ++s) {
    JointCheckStat stat;
    stat.name = kMonitorNames[s];
    stat.forward_mean = stats::mean(fwd[s]);
    stat.successive_mean = stats::mean(succ[s]);
    double fwd_var = 0.0;
    for (const double x : fwd[s]) fwd_var += (x - stat.forward_mean) * (x - stat.forward_mean);
    fwd_var /= static_cast<double>(fwd[s].size() - 1);
    const double se_fwd = std::sqrt(fwd_var / static_cast<double>(fwd[s].size()));
    const double se_succ = stats::batch_means_se(succ[s]);
    stat.z = (stat.forward_mean - stat.successive_mean) / std::sqrt(se_fwd * se_fwd + se_succ * se_succ);
    stat.pass = std::fabs(stat.z) < 3.0;
    all_pass = all_pass && stat.pass;
    report.joint.push_back(stat);
  }

  // IG conditional means against scale/(shape-1), at a fixed state.
  {
    Rng rng = Rng::stream(seed, stream_tag::kChecks, 3);
    GibbsState state = GibbsState::initial(v_count, a_count, p, hyper);
    Matrix responses(instance.rows(), v_count);
    forward_draw(state, responses, instance, hyper, rng);
    Dataset work = instance;
    work.responses = responses;
    const SaePrecompute pre = SaePrecompute::from(work);

    const auto run_check = [&](const std::string& name, const IgParams& ig) {
      IgMeanCheck check;
      check.name = name;
      check.shape = ig.shape;
      check.expected_mean = ig.scale / (ig.shape - 1.0);
      std::vector<double> xs(static_cast<std::size_t>(draws));
      for (auto& x : xs) x = rng.inv_gamma(ig.shape, ig.scale);
      check.empirical_mean = stats::mean(xs);
      double var = 0.0;
      for (const double x : xs) var += (x - check.empirical_mean) * (x - check.empirical_mean);
      var /= static_cast<double>(xs.size() - 1);
      const double se = std::sqrt(var / static_cast<double>(xs.size()));
      check.z = (check.empirical_mean - check.expected_mean) / se;
      check.pass = std::fabs(check.z) < 3.0;
      all_pass = all_pass && check.pass;
      report.ig.push_back(check);
    };

    run_check("sigma2[0]", sigma2_conditional(state, pre, work.rois, work.rows(), 0, hyper));
    run_check("alpha2[0]", alpha2_conditional(state, 0, hyper));
    run_check("nu2[0]", nu2_conditional(state, 0, hyper));
  }

  report.all_pass = all_pass;
  return report;
}

}  // namespace vxr
