#include <cmath>
#include <filesystem>
#include <limits>

#include "voxreg/errors.hpp"
#include "voxreg/rng.hpp"
#include "voxreg/runner.hpp"
#include "voxreg/simulation.hpp"
#include "voxreg/stats.hpp"
#include "voxreg/version.hpp"

namespace vxr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string dataset_path(const RunConfig& config) {
  const auto it = config.raw.find("dataset");
  if (it == config.raw.end() || !it->is_string())
    fail_validation("bad-config", "config field 'dataset' (string path) is required for this command");
  return it->get<std::string>();
}

void write_run_manifest(const RunConfig& config, const std::string& command) {
  // Output directory and thread count are execution details, not part of the
  // protocol: artifacts must be reproducible from (config, seed) alone.
  json canonical = config.raw;
  canonical.erase("output");
  canonical.erase("threads");
  json manifest;
  manifest["command"] = command;
  manifest["config_hash"] = config_hash(canonical);
  manifest["seed"] = config.seed;
  manifest["toolkit_version"] = kVersion;
  manifest["config"] = canonical;
  atomic_write_text((fs::path(config.output) / "run_manifest.json").string(), manifest.dump(2) + "\n");
}

Matrix with_voxel_column(const Matrix& m) {
  Matrix out(m.rows(), m.cols() + 1);
  for (Eigen::Index v = 0; v < m.rows(); ++v) out(v, 0) = static_cast<double>(v);
  out.rightCols(m.cols()) = m;
  return out;
}

std::vector<std::string> voxel_header(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> header{"voxel"};
  for (Eigen::Index c = 0; c < count; ++c) header.push_back(prefix + std::to_string(c));
  return header;
}

}  // namespace

void write_field_artifacts(const std::string& dir, const CoefficientField& field,
                           const RegularizationMap& map, bool binary) {
  fs::create_directories(dir);
  const fs::path base(dir);
  if (binary) {
    write_matrix_binary((base / "coefficients.bin").string(), field.coefficients);
    write_matrix_binary((base / "std_errors.bin").string(), field.std_errors);
    write_matrix_binary((base / "noise_variance.bin").string(), field.noise_variance);
    if (field.intercept.size() > 0) write_matrix_binary((base / "intercepts.bin").string(), field.intercept);
  } else {
    write_matrix_csv((base / "coefficients.csv").string(), with_voxel_column(field.coefficients),
                     voxel_header("b", field.features()));
    write_matrix_csv((base / "std_errors.csv").string(), with_voxel_column(field.std_errors),
                     voxel_header("se", field.features()));
    write_matrix_csv((base / "noise_variance.csv").string(), with_voxel_column(field.noise_variance),
                     {"voxel", "sigma2"});
    if (field.intercept.size() > 0)
      write_matrix_csv((base / "intercepts.csv").string(), with_voxel_column(field.intercept),
                       {"voxel", "intercept"});
  }

  // Regularization intensities always as CSV: one row per voxel, NaN = undefined.
  Matrix reg(field.voxels(), 6);
  for (Eigen::Index v = 0; v < field.voxels(); ++v) {
    const auto& pv = map.per_voxel.empty() ? VoxelRegularization{} : map.per_voxel[static_cast<std::size_t>(v)];
    reg(v, 0) = static_cast<double>(v);
    reg(v, 1) = pv.ridge_lambda.value_or(kNaN);
    reg(v, 2) = pv.en_lambda1.value_or(kNaN);
    reg(v, 3) = pv.en_lambda2.value_or(kNaN);
    reg(v, 4) = pv.smoothing_radius.value_or(kNaN);
    reg(v, 5) = pv.posterior_nu2.value_or(kNaN);
  }
  write_matrix_csv((base / "regularization.csv").string(), reg,
                   {"voxel", "ridge_lambda", "en_lambda1", "en_lambda2", "smoothing_radius", "posterior_nu2"});

  json meta;
  meta["method"] = field.method;
  meta["std_errors_approximate"] = field.std_errors_approximate;
  meta["voxels"] = field.voxels();
  meta["features"] = field.features();
  atomic_write_text((base / "field_meta.json").string(), meta.dump(2) + "\n");
}

CoefficientField read_field_artifacts(const std::string& dir) {
  const fs::path base(dir);
  const auto pick = [&](const std::string& stem) -> std::string {
    const fs::path bin = base / (stem + ".bin");
    if (fs::exists(bin)) return bin.string();
    const fs::path csv = base / (stem + ".csv");
    if (fs::exists(csv)) return csv.string();
    fail_validation("io-error", "missing artifact " + stem + " under " + dir);
  };
  const auto strip_voxel_column = [](Matrix m, bool from_csv) {
    if (!from_csv) return m;
    return Matrix(m.rightCols(m.cols() - 1));
  };

  CoefficientField field;
  {
    const std::string path = pick("coefficients");
    field.coefficients = strip_voxel_column(read_matrix_any(path), path.ends_with(".csv"));
  }
  {
    const std::string path = pick("std_errors");
    field.std_errors = strip_voxel_column(read_matrix_any(path), path.ends_with(".csv"));
  }
  {
    const std::string path = pick("noise_variance");
    const Matrix m = strip_voxel_column(read_matrix_any(path), path.ends_with(".csv"));
    field.noise_variance = m.col(0);
  }
  if (fs::exists(base / "intercepts.bin") || fs::exists(base / "intercepts.csv")) {
    const std::string path = pick("intercepts");
    const Matrix m = strip_voxel_column(read_matrix_any(path), path.ends_with(".csv"));
    field.intercept = m.col(0);
  }
  const fs::path meta_path = base / "field_meta.json";
  if (fs::exists(meta_path)) {
    const json meta = json::parse(read_text_file(meta_path.string()));
    if (meta.contains("method")) field.method = meta["method"].get<std::string>();
    if (meta.contains("std_errors_approximate")) field.std_errors_approximate = meta["std_errors_approximate"].get<bool>();
  }
  return field;
}

void cmd_fit(const RunConfig& config) {
  const Dataset dataset = load_dataset(dataset_path(config));
  const MethodSpec method = config.method();
  const fs::path out(config.output);

  // Elastic net and SAE carry method-specific extras (CV surfaces, chain
  // checkpoint and diagnostics), so dispatch here rather than via fit_method.
  if (const auto* en = std::get_if<EnSpec>(&method.spec)) {
    const EnFitResult fit = elastic_net_fit_cv(dataset, en->lambda1_grid, en->lambda2_grid, en->folds,
                                               config.seed, en->options, config.threads);
    write_field_artifacts(config.output, fit.field, fit.map, config.binary_output);
    write_en_paths_csv((out / "en_paths.csv").string(), fit.paths);
  } else if (const auto* sae = std::get_if<SaeSpec>(&method.spec)) {
    SaeOptions options = sae->options;
    options.threads = config.threads;
    const SaeFit fit = sae_fit(dataset, sae->hyper, options, config.seed);
    write_field_artifacts(config.output, fit.field, fit.map, config.binary_output);
    save_gibbs_state((out / "checkpoint").string(), fit.final_state);
    std::string diag = "sample,beta00,sigma2_mid,nu2_mid\n";
    for (std::size_t i = 0; i < fit.monitor_beta00.size(); ++i)
      diag += std::to_string(i) + "," + format_double(fit.monitor_beta00[i]) + "," +
              format_double(fit.monitor_sigma2_mid[i]) + "," + format_double(fit.monitor_nu2_mid[i]) + "\n";
    atomic_write_text((out / "diagnostics.csv").string(), diag);
  } else {
    const FitResult fit = fit_method(dataset, method, config.seed, config.threads);
    write_field_artifacts(config.output, fit.field, fit.map, config.binary_output);
  }
  write_run_manifest(config, "fit");
}

void cmd_evaluate(const RunConfig& config) {
  const Dataset dataset = load_dataset(dataset_path(config));
  const MethodSpec method = config.method();
  const auto tune = config.smoothing_tune();

  const int folds = [&] {
    const auto it = config.raw.find("folds");
    if (it == config.raw.end()) return 10;
    if (!it->is_number_integer() || it->get<int>() < 2)
      fail_validation("bad-config", "config field 'folds' must be an integer >= 2");
    return it->get<int>();
  }();
  const int trim = [&] {
    const auto it = config.raw.find("trim");
    if (it == config.raw.end()) return -1;
    if (!it->is_number_integer()) fail_validation("bad-config", "config field 'trim' must be an integer");
    return it->get<int>();
  }();

  const FoldPlan plan = make_fold_plan(dataset, folds, trim, config.seed);
  const EvaluationReport report = run_pipeline(dataset, method, tune, plan, config.threads);

  json summary;
  summary["method"] = report.method;
  summary["folds"] = folds;
  summary["trim"] = plan.trim;
  summary["seed"] = config.seed;
  summary["whole_brain_accuracy"] = report.whole_brain_accuracy;
  summary["fold_accuracy"] = report.fold_accuracy;
  summary["fold_pairs"] = report.fold_pairs;
  summary["pairs_sampled"] = report.pairs_sampled;
  summary["missing_nrss_voxels"] = report.missing_nrss_voxels;
  {
    double total = 0.0;
    int n = 0;
    for (Eigen::Index v = 0; v < report.per_voxel_nrss.size(); ++v)
      if (!std::isnan(report.per_voxel_nrss(v))) {
        total += report.per_voxel_nrss(v);
        ++n;
      }
    summary["mean_nrss"] = n > 0 ? total / n : kNaN;
  }
  summary["mean_voxel_accuracy"] = report.per_voxel_accuracy.mean();
  if (tune && std::holds_alternative<RoiTune>(*tune)) {
    summary["roi_gamma"] = report.roi_gamma;
    summary["roi_bandwidth"] = report.roi_bandwidth;
  }
  fs::create_directories(config.output);
  atomic_write_text((fs::path(config.output) / "report.json").string(), summary.dump(2) + "\n");

  // Coordinate-tagged per-voxel map for external slice plotting.
  const Eigen::Index v_count = dataset.voxels();
  Matrix map(v_count, 11);
  for (Eigen::Index v = 0; v < v_count; ++v) {
    const auto& pv = report.regularization.per_voxel[static_cast<std::size_t>(v)];
    map(v, 0) = static_cast<double>(v);
    map(v, 1) = dataset.geometry.coords(v, 0);
    map(v, 2) = dataset.geometry.coords(v, 1);
    map(v, 3) = dataset.geometry.coords(v, 2);
    map(v, 4) = report.per_voxel_nrss(v);
    map(v, 5) = report.per_voxel_accuracy(v);
    map(v, 6) = pv.ridge_lambda.value_or(kNaN);
    map(v, 7) = pv.en_lambda1.value_or(kNaN);
    map(v, 8) = pv.en_lambda2.value_or(kNaN);
    map(v, 9) = pv.smoothing_radius.value_or(kNaN);
    map(v, 10) = pv.posterior_nu2.value_or(kNaN);
  }
  write_matrix_csv((fs::path(config.output) / "map.csv").string(), map,
                   {"voxel", "x", "y", "z", "nrss", "accuracy", "ridge_lambda", "en_lambda1", "en_lambda2",
                    "smoothing_radius", "posterior_nu2"});
  write_run_manifest(config, "evaluate");
}

void cmd_smooth(const RunConfig& config) {
  const auto input_it = config.raw.find("input");
  if (input_it == config.raw.end() || !input_it->is_string())
    fail_validation("bad-config", "config field 'input' (fit output directory) is required for smooth");
  const Dataset dataset = load_dataset(dataset_path(config));
  CoefficientField field = read_field_artifacts(input_it->get<std::string>());
  require(field.voxels() == dataset.voxels(), "shape-mismatch",
          "stored field voxel count does not match the dataset");

  const auto spec = config.smoothing_fixed(static_cast<int>(dataset.voxels()));
  if (!spec) fail_validation("bad-config", "config field 'smoothing' is required for smooth");

  const CoefficientField smoothed = smooth_field(field, smoothing_weights(dataset.geometry, dataset.rois, *spec));
  RegularizationMap map;
  map.per_voxel.resize(static_cast<std::size_t>(smoothed.voxels()));
  if (const auto* ball = std::get_if<BallSpec>(&spec->kind))
    for (Eigen::Index v = 0; v < smoothed.voxels(); ++v)
      map.per_voxel[static_cast<std::size_t>(v)].smoothing_radius = ball->radii(v);
  write_field_artifacts(config.output, smoothed, map, config.binary_output);
  write_run_manifest(config, "smooth");
}

void cmd_simulate(const RunConfig& config) {
  const auto section_it = config.raw.find("simulate");
  const json section = section_it == config.raw.end() ? json::object() : *section_it;
  if (!section.is_object()) fail_validation("bad-config", "config field 'simulate' must be an object");

  const auto get_int = [&](const char* name, int fallback) {
    const auto it = section.find(name);
    if (it == section.end()) return fallback;
    if (!it->is_number_integer()) fail_validation("bad-config", std::string("config field 'simulate.") + name + "' must be an integer");
    return it->get<int>();
  };
  const auto get_num = [&](const char* name, double fallback) {
    const auto it = section.find(name);
    if (it == section.end()) return fallback;
    if (!it->is_number()) fail_validation("bad-config", std::string("config field 'simulate.") + name + "' must be a number");
    return it->get<double>();
  };

  std::string experiment = "misassignment";
  if (const auto it = section.find("experiment"); it != section.end()) {
    if (!it->is_string()) fail_validation("bad-config", "config field 'simulate.experiment' must be a string");
    experiment = it->get<std::string>();
  }

  fs::create_directories(config.output);

  if (experiment == "marginal_prior") {
    const double e = get_num("e", 3.0);
    const double f = get_num("f", 2.0);
    const int draws = get_int("draws", 10000);
    const MarginalPriorReport report = marginal_prior_check(e, f, draws, config.seed);
    json out;
    out["experiment"] = "marginal_prior";
    out["e"] = e;
    out["f"] = f;
    out["df"] = report.df;
    out["draws"] = report.draws;
    out["ks_statistic"] = report.ks_statistic;
    out["p_value"] = report.p_value;
    out["pass"] = report.pass;
    out["ks_vs_gaussian"] = report.ks_vs_gaussian;
    atomic_write_text((fs::path(config.output) / "marginal_prior.json").string(), out.dump(2) + "\n");
    write_run_manifest(config, "simulate");
    return;
  }

  if (experiment != "misassignment")
    fail_validation("bad-config", "config field 'simulate.experiment' must be \"misassignment\" or \"marginal_prior\"");

  MisassignmentConfig mc;
  mc.voxels = get_int("voxels", mc.voxels);
  mc.areas = get_int("areas", mc.areas);
  mc.replicates = get_int("replicates", mc.replicates);
  mc.test_fraction = get_num("test_fraction", mc.test_fraction);
  const int rows = get_int("rows", 200);
  const int features = get_int("features", 8);
  mc.hyper.a = get_num("a", mc.hyper.a);
  mc.hyper.b = get_num("b", mc.hyper.b);
  mc.hyper.c = get_num("c", mc.hyper.c);
  mc.hyper.d = get_num("d", mc.hyper.d);
  mc.hyper.e = get_num("e", mc.hyper.e);
  mc.hyper.f = get_num("f", mc.hyper.f);

  const Matrix design = gaussian_design(rows, features, derive_seed(config.seed, stream_tag::kSimulate, 0x7e57));
  const MisassignmentReport report = misassignment_experiment(design, mc, config.seed, config.threads);

  std::string csv = "replicate,ridge_nrss,sae_true_nrss,sae_shuffled_nrss\n";
  for (std::size_t r = 0; r < report.replicates.size(); ++r) {
    const auto& rep = report.replicates[r];
    csv += std::to_string(r) + "," + format_double(rep.ridge_nrss) + "," + format_double(rep.sae_true_nrss) +
           "," + format_double(rep.sae_shuffled_nrss) + "\n";
  }
  atomic_write_text((fs::path(config.output) / "replicates.csv").string(), csv);

  json out;
  out["experiment"] = "misassignment";
  out["replicates"] = report.replicates.size();
  out["voxels"] = mc.voxels;
  out["areas"] = mc.areas;
  out["rows"] = rows;
  out["features"] = features;
  out["sae_true_wins"] = report.sae_true_wins;
  out["sae_shuffled_wins"] = report.sae_shuffled_wins;
  out["p_sae_vs_ridge"] = report.p_sae_vs_ridge;
  out["p_shuffled_vs_ridge"] = report.p_shuffled_vs_ridge;
  atomic_write_text((fs::path(config.output) / "summary.json").string(), out.dump(2) + "\n");
  write_run_manifest(config, "simulate");
}

bool cmd_check(const RunConfig& config) {
  const auto section_it = config.raw.find("check");
  const json section = section_it == config.raw.end() ? json::object() : *section_it;
  if (!section.is_object()) fail_validation("bad-config", "config field 'check' must be an object");

  const auto get_int = [&](const char* name, int fallback) {
    const auto it = section.find(name);
    if (it == section.end()) return fallback;
    if (!it->is_number_integer()) fail_validation("bad-config", std::string("config field 'check.") + name + "' must be an integer");
    return it->get<int>();
  };
  const auto get_num = [&](const char* name, double fallback) {
    const auto it = section.find(name);
    if (it == section.end()) return fallback;
    if (!it->is_number()) fail_validation("bad-config", std::string("config field 'check.") + name + "' must be a number");
    return it->get<double>();
  };

  const int voxels = get_int("voxels", 4);
  const int areas = get_int("areas", 2);
  const int rows = get_int("rows", 10);
  const int features = get_int("features", 3);
  const int draws = get_int("draws", 20000);

  Hyperparameters hyper;
  hyper.a = get_num("a", hyper.a);
  hyper.b = get_num("b", hyper.b);
  hyper.c = get_num("c", hyper.c);
  hyper.d = get_num("d", hyper.d);
  hyper.e = get_num("e", hyper.e);
  hyper.f = get_num("f", hyper.f);

  const Matrix design = gaussian_design(rows, features, derive_seed(config.seed, stream_tag::kChecks, 0xc0de));
  const VoxelGeometry geometry = grid_geometry(voxels);
  const RoiPartition partition = contiguous_partition(voxels, areas);
  Matrix responses = Matrix::Zero(rows, voxels);
  const Dataset instance = Dataset::create(design, std::move(responses), geometry, partition);

  const ConditionalCheckReport report = conditional_checks(hyper, instance, draws, config.seed);
  const MarginalPriorReport prior =
      marginal_prior_check(get_num("e", hyper.e), get_num("f", hyper.f), std::max(10000, draws), config.seed);

  json out;
  out["all_pass"] = report.all_pass && prior.pass;
  out["joint"] = json::array();
  for (const auto& stat : report.joint) {
    json s;
    s["name"] = stat.name;
    s["forward_mean"] = stat.forward_mean;
    s["successive_mean"] = stat.successive_mean;
    s["z"] = stat.z;
    s["pass"] = stat.pass;
    out["joint"].push_back(s);
  }
  out["ig"] = json::array();
  for (const auto& check : report.ig) {
    json s;
    s["name"] = check.name;
    s["shape"] = check.shape;
    s["expected_mean"] = check.expected_mean;
    s["empirical_mean"] = check.empirical_mean;
    s["z"] = check.z;
    s["pass"] = check.pass;
    out["ig"].push_back(s);
  }
  out["marginal_prior"] = {{"df", prior.df},
                           {"ks_statistic", prior.ks_statistic},
                           {"p_value", prior.p_value},
                           {"pass", prior.pass}};
  fs::create_directories(config.output);
  atomic_write_text((fs::path(config.output) / "check_report.json").string(), out.dump(2) + "\n");
  write_run_manifest(config, "check");
  return report.all_pass && prior.pass;
}

}  // namespace vxr
