// Command-line front door for the voxreg shared library. All work happens
// behind the C API (voxreg.h); this binary only assembles the run
// configuration from a config file, the VOXREG_OUT environment variable and
// command-line flags (flags win), then dispatches.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "voxreg.h"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::string dataset;
  std::string output;
  std::string format;
  long long seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration file");
  cmd->add_option("--seed", flags.seed, "master seed (mandatory here or in the config)");
  cmd->add_option("--out", flags.output, "output directory");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  cmd->add_option("--format", flags.format, "output matrix format: csv or binary");
}

int fail_usage(const std::string& message) {
  json record;
  record["error"]["kind"] = "validation";
  record["error"]["code"] = "bad-config";
  record["error"]["message"] = message;
  std::cerr << record.dump() << "\n";
  return 1;
}

bool load_config(const CommonFlags& flags, json& config, std::string& error) {
  config = json::object();
  if (flags.config_path.empty()) return true;
  std::ifstream in(flags.config_path);
  if (!in) {
    error = "cannot open config file: " + flags.config_path;
    return false;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    config = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    error = "config file is not valid JSON: " + std::string(e.what());
    return false;
  }
  if (!config.is_object()) {
    error = "config file must hold a JSON object";
    return false;
  }
  return true;
}

void apply_common(const CommonFlags& flags, json& config) {
  if (const char* env_out = std::getenv("VOXREG_OUT")) config["output"] = env_out;
  if (!flags.dataset.empty()) config["dataset"] = flags.dataset;
  if (!flags.output.empty()) config["output"] = flags.output;
  if (!flags.format.empty()) config["output_format"] = flags.format;
  if (flags.seed >= 0) config["seed"] = flags.seed;
  if (flags.threads >= 0) config["threads"] = flags.threads;
}

int dispatch(vxr_status (*run)(const char*), const json& config) {
  const std::string text = config.dump();
  const vxr_status status = run(text.c_str());
  if (status != VXR_OK) std::cerr << vxr_last_error_json() << "\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxreg: regularized voxel-wise encoding models (fit, smooth, evaluate, simulate)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vxr_version()));

  CommonFlags fit_flags, eval_flags, smooth_flags, sim_flags, check_flags;
  std::string fit_method, eval_method;
  int eval_folds = -1, eval_trim = std::numeric_limits<int>::min();
  std::string smooth_input, smooth_kind, smooth_weights;
  double smooth_radius = -1.0, smooth_gamma = -1.0, smooth_bandwidth = -1.0;
  int smooth_p = -1;
  std::string sim_experiment;
  int sim_replicates = -1, sim_draws = -1;

  CLI::App* fit = app.add_subcommand("fit", "fit a coefficient field and regularization map");
  add_common(fit, fit_flags);
  fit->add_option("--dataset", fit_flags.dataset, "dataset directory");
  fit->add_option("--method", fit_method, "ols | ridge | elastic_net | sae");

  CLI::App* evaluate = app.add_subcommand("evaluate", "nested cross-validated forward/reverse evaluation");
  add_common(evaluate, eval_flags);
  evaluate->add_option("--dataset", eval_flags.dataset, "dataset directory");
  evaluate->add_option("--method", eval_method, "ols | ridge | elastic_net | sae");
  evaluate->add_option("--folds", eval_folds, "outer folds (default 10)");
  evaluate->add_option("--trim", eval_trim, "boundary rows dropped per split edge (default 5 dynamic, 0 static)");

  CLI::App* smooth = app.add_subcommand("smooth", "apply a fixed smoothing spec to a stored fit");
  add_common(smooth, smooth_flags);
  smooth->add_option("--dataset", smooth_flags.dataset, "dataset directory (geometry + ROIs)");
  smooth->add_option("--input", smooth_input, "fit output directory to smooth");
  smooth->add_option("--kind", smooth_kind, "ball | roi");
  smooth->add_option("--p", smooth_p, "ball norm (1 or 2)");
  smooth->add_option("--radius", smooth_radius, "ball radius in mm");
  smooth->add_option("--gamma", smooth_gamma, "roi penalty factor");
  smooth->add_option("--weights", smooth_weights, "roi weights: uniform | gaussian");
  smooth->add_option("--bandwidth", smooth_bandwidth, "gaussian bandwidth in mm");

  CLI::App* simulate = app.add_subcommand("simulate", "synthetic-data experiments");
  add_common(simulate, sim_flags);
  simulate->add_option("--experiment", sim_experiment, "misassignment | marginal_prior");
  simulate->add_option("--replicates", sim_replicates, "misassignment replicates");
  simulate->add_option("--draws", sim_draws, "marginal-prior draws");

  CLI::App* check = app.add_subcommand("check", "sampler validation harness (conditionals + marginal prior)");
  add_common(check, check_flags);

  CLI11_PARSE(app, argc, argv);

  json config;
  std::string error;

  if (fit->parsed()) {
    if (!load_config(fit_flags, config, error)) return fail_usage(error);
    apply_common(fit_flags, config);
    if (!fit_method.empty()) config["method"] = fit_method;
    return dispatch(vxr_run_fit, config);
  }

  if (evaluate->parsed()) {
    if (!load_config(eval_flags, config, error)) return fail_usage(error);
    apply_common(eval_flags, config);
    if (!eval_method.empty()) config["method"] = eval_method;
    if (eval_folds >= 0) config["folds"] = eval_folds;
    if (eval_trim != std::numeric_limits<int>::min()) config["trim"] = eval_trim;
    return dispatch(vxr_run_evaluate, config);
  }

  if (smooth->parsed()) {
    if (!load_config(smooth_flags, config, error)) return fail_usage(error);
    apply_common(smooth_flags, config);
    if (!smooth_input.empty()) config["input"] = smooth_input;
    if (!smooth_kind.empty()) config["smoothing"]["kind"] = smooth_kind;
    if (smooth_p > 0) config["smoothing"]["p"] = smooth_p;
    if (smooth_radius >= 0.0) config["smoothing"]["radius"] = smooth_radius;
    if (smooth_gamma >= 0.0) config["smoothing"]["gamma"] = smooth_gamma;
    if (!smooth_weights.empty()) config["smoothing"]["weights"] = smooth_weights;
    if (smooth_bandwidth > 0.0) config["smoothing"]["bandwidth"] = smooth_bandwidth;
    return dispatch(vxr_run_smooth, config);
  }

  if (simulate->parsed()) {
    if (!load_config(sim_flags, config, error)) return fail_usage(error);
    apply_common(sim_flags, config);
    if (!sim_experiment.empty()) config["simulate"]["experiment"] = sim_experiment;
    if (sim_replicates >= 0) config["simulate"]["replicates"] = sim_replicates;
    if (sim_draws >= 0) config["simulate"]["draws"] = sim_draws;
    return dispatch(vxr_run_simulate, config);
  }

  if (check->parsed()) {
    if (!load_config(check_flags, config, error)) return fail_usage(error);
    apply_common(check_flags, config);
    return dispatch(vxr_run_check, config);
  }

  return fail_usage("no subcommand given");
}
