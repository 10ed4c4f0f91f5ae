#include <filesystem>

#include "voxreg/errors.hpp"
#include "voxreg/runner.hpp"

namespace vxr {

using nlohmann::json;

namespace {

const json* find(const json& j, const char* name) {
  const auto it = j.find(name);
  return it == j.end() ? nullptr : &*it;
}

double number_or(const json& j, const char* name, double fallback) {
  const json* f = find(j, name);
  if (!f) return fallback;
  if (!f->is_number()) fail_validation("bad-config", std::string("config field '") + name + "' must be a number");
  return f->get<double>();
}

int integer_or(const json& j, const char* name, int fallback) {
  const json* f = find(j, name);
  if (!f) return fallback;
  if (!f->is_number_integer())
    fail_validation("bad-config", std::string("config field '") + name + "' must be an integer");
  return f->get<int>();
}

std::vector<double> number_list(const json& j, const char* name) {
  const json* f = find(j, name);
  if (!f) return {};
  if (!f->is_array()) fail_validation("bad-config", std::string("config field '") + name + "' must be an array");
  std::vector<double> out;
  for (const auto& x : *f) {
    if (!x.is_number()) fail_validation("bad-config", std::string("config field '") + name + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& json_text) {
  RunConfig config;
  try {
    config.raw = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail_validation("bad-config", "config is not valid JSON: " + std::string(e.what()));
  }
  if (!config.raw.is_object()) fail_validation("bad-config", "config must be a JSON object");

  const json* seed = find(config.raw, "seed");
  if (!seed) fail_validation("bad-config", "config field 'seed' is mandatory");
  if (!seed->is_number_integer() || seed->get<long long>() < 0)
    fail_validation("bad-config", "config field 'seed' must be a non-negative integer");
  config.seed = seed->get<std::uint64_t>();

  config.threads = integer_or(config.raw, "threads", 0);
  if (config.threads < 0) fail_validation("bad-config", "config field 'threads' must be >= 0");

  if (const json* out = find(config.raw, "output")) {
    if (!out->is_string()) fail_validation("bad-config", "config field 'output' must be a string");
    config.output = out->get<std::string>();
  } else {
    config.output = "voxreg_out";
  }

  if (const json* fmt = find(config.raw, "output_format")) {
    if (!fmt->is_string() || (*fmt != "csv" && *fmt != "binary"))
      fail_validation("bad-config", "config field 'output_format' must be \"csv\" or \"binary\"");
    config.binary_output = *fmt == "binary";
  }
  return config;
}

MethodSpec RunConfig::method() const {
  const json* m = find(raw, "method");
  if (!m) fail_validation("bad-config", "config field 'method' is mandatory for this command");
  if (!m->is_string()) fail_validation("bad-config", "config field 'method' must be a string");
  const std::string name = m->get<std::string>();

  if (name == "ols") return MethodSpec{OlsSpec{}};

  if (name == "ridge") {
    RidgeSpec spec;
    if (const json* section = find(raw, "ridge")) spec.grid = number_list(*section, "grid");
    return MethodSpec{std::move(spec)};
  }

  if (name == "elastic_net") {
    EnSpec spec;
    if (const json* section = find(raw, "elastic_net")) {
      spec.lambda1_grid = number_list(*section, "lambda1_grid");
      spec.lambda2_grid = number_list(*section, "lambda2_grid");
      spec.folds = integer_or(*section, "folds", spec.folds);
      spec.options.tol = number_or(*section, "tol", spec.options.tol);
      spec.options.max_iter = integer_or(*section, "max_iter", spec.options.max_iter);
    }
    return MethodSpec{std::move(spec)};
  }

  if (name == "sae") {
    SaeSpec spec;
    if (const json* section = find(raw, "sae")) {
      spec.hyper.a = number_or(*section, "a", spec.hyper.a);
      spec.hyper.b = number_or(*section, "b", spec.hyper.b);
      spec.hyper.c = number_or(*section, "c", spec.hyper.c);
      spec.hyper.d = number_or(*section, "d", spec.hyper.d);
      spec.hyper.e = number_or(*section, "e", spec.hyper.e);
      spec.hyper.f = number_or(*section, "f", spec.hyper.f);
      spec.options.burn_in = integer_or(*section, "burn_in", spec.options.burn_in);
      spec.options.thin = integer_or(*section, "thin", spec.options.thin);
      spec.options.samples = integer_or(*section, "samples", spec.options.samples);
    }
    spec.hyper.validate();
    return MethodSpec{std::move(spec)};
  }

  fail_validation("bad-config", "config field 'method' must be one of ols|ridge|elastic_net|sae (got '" + name + "')");
}

std::optional<SmoothingTune> RunConfig::smoothing_tune() const {
  const json* s = find(raw, "smoothing");
  if (!s || s->is_null()) return std::nullopt;
  if (!s->is_object()) fail_validation("bad-config", "config field 'smoothing' must be an object or null");
  const json* kind = find(*s, "kind");
  if (!kind || !kind->is_string())
    fail_validation("bad-config", "config field 'smoothing.kind' must be \"ball\" or \"roi\"");

  if (*kind == "ball") {
    BallTune tune;
    tune.p = integer_or(*s, "p", 2);
    tune.radius_grid = number_list(*s, "radius_grid");
    if (tune.radius_grid.empty()) tune.radius_grid = {0.0, 1.0, 2.0, 3.0, 4.0};
    return SmoothingTune{std::move(tune)};
  }
  if (*kind == "roi") {
    RoiTune tune;
    tune.gamma_grid = number_list(*s, "gamma_grid");
    if (tune.gamma_grid.empty()) tune.gamma_grid = {0.0, 0.1, 0.3, 1.0, 3.0};
    if (const json* w = find(*s, "weights")) {
      if (!w->is_string() || (*w != "uniform" && *w != "gaussian"))
        fail_validation("bad-config", "config field 'smoothing.weights' must be \"uniform\" or \"gaussian\"");
      tune.weights = *w == "uniform" ? RoiWeights::Uniform : RoiWeights::Gaussian;
    }
    tune.bandwidth_grid = number_list(*s, "bandwidth_grid");
    if (tune.bandwidth_grid.empty()) tune.bandwidth_grid = {1.0, 2.0, 4.0};
    return SmoothingTune{std::move(tune)};
  }
  fail_validation("bad-config", "config field 'smoothing.kind' must be \"ball\" or \"roi\"");
}

std::optional<SmoothingSpec> RunConfig::smoothing_fixed(int voxels) const {
  const json* s = find(raw, "smoothing");
  if (!s || s->is_null()) return std::nullopt;
  if (!s->is_object()) fail_validation("bad-config", "config field 'smoothing' must be an object or null");
  const json* kind = find(*s, "kind");
  if (!kind || !kind->is_string())
    fail_validation("bad-config", "config field 'smoothing.kind' must be \"ball\" or \"roi\"");

  if (*kind == "ball") {
    BallSpec spec;
    spec.p = integer_or(*s, "p", 2);
    const double radius = number_or(*s, "radius", -1.0);
    if (radius < 0.0)
      fail_validation("bad-config", "config field 'smoothing.radius' (>= 0) is required for a fixed ball spec");
    spec.radii = Vector::Constant(voxels, radius);
    return SmoothingSpec{std::move(spec)};
  }
  RoiSpec spec;
  spec.gamma = number_or(*s, "gamma", -1.0);
  if (spec.gamma < 0.0)
    fail_validation("bad-config", "config field 'smoothing.gamma' (>= 0) is required for a fixed roi spec");
  if (const json* w = find(*s, "weights")) {
    if (!w->is_string() || (*w != "uniform" && *w != "gaussian"))
      fail_validation("bad-config", "config field 'smoothing.weights' must be \"uniform\" or \"gaussian\"");
    spec.weights = *w == "uniform" ? RoiWeights::Uniform : RoiWeights::Gaussian;
  }
  spec.bandwidth = number_or(*s, "bandwidth", 1.0);
  return SmoothingSpec{std::move(spec)};
}

std::uint64_t config_hash(const json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace vxr
