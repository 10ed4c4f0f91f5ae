#include "voxreg.h"

#include <cstring>
#include <exception>
#include <json.hpp>
#include <string>

#include "voxreg/dataset.hpp"
#include "voxreg/errors.hpp"
#include "voxreg/method.hpp"
#include "voxreg/runner.hpp"
#include "voxreg/version.hpp"

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_error_json;

void clear_error() {
  g_last_error.clear();
  g_last_error_json.clear();
}

vxr_status record_error(vxr::ErrorKind kind, const std::string& code, const std::string& message) {
  g_last_error = message;
  nlohmann::json j;
  j["error"]["kind"] = kind == vxr::ErrorKind::Validation ? "validation" : "runtime";
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  g_last_error_json = j.dump();
  return kind == vxr::ErrorKind::Validation ? VXR_ERR_VALIDATION : VXR_ERR_RUNTIME;
}

template <typename Fn>
vxr_status guarded(Fn&& fn) {
  clear_error();
  try {
    return fn();
  } catch (const vxr::Error& e) {
    return record_error(e.kind(), e.code(), e.what());
  } catch (const std::exception& e) {
    return record_error(vxr::ErrorKind::Runtime, "internal-error", e.what());
  } catch (...) {
    return record_error(vxr::ErrorKind::Runtime, "internal-error", "unknown failure");
  }
}

vxr_status require_arg(const void* p, const char* what) {
  if (p) return VXR_OK;
  return record_error(vxr::ErrorKind::Validation, "invalid-parameter", std::string(what) + " must not be null");
}

}  // namespace

struct vxr_dataset {
  vxr::Dataset dataset;
};

struct vxr_fit {
  vxr::CoefficientField field;
  vxr::RegularizationMap map;
};

extern "C" {

const char* vxr_version(void) { return vxr::kVersion; }

const char* vxr_last_error(void) { return g_last_error.c_str(); }

const char* vxr_last_error_json(void) { return g_last_error_json.c_str(); }

vxr_status vxr_run_fit(const char* config_json) {
  if (require_arg(config_json, "config_json") != VXR_OK) return VXR_ERR_VALIDATION;
  return guarded([&] {
    vxr::cmd_fit(vxr::RunConfig::parse(config_json));
    return VXR_OK;
  });
}

vxr_status vxr_run_evaluate(const char* config_json) {
  if (require_arg(config_json, "config_json") != VXR_OK) return VXR_ERR_VALIDATION;
  return guarded([&] {
    vxr::cmd_evaluate(vxr::RunConfig::parse(config_json));
    return VXR_OK;
  });
}

vxr_status vxr_run_smooth(const char* config_json) {
  if (require_arg(config_json, "config_json") != VXR_OK) return VXR_ERR_VALIDATION;
  return guarded([&] {
    vxr::cmd_smooth(vxr::RunConfig::parse(config_json));
    return VXR_OK;
  });
}

vxr_status vxr_run_simulate(const char* config_json) {
  if (require_arg(config_json, "config_json") != VXR_OK) return VXR_ERR_VALIDATION;
  return guarded([&] {
    vxr::cmd_simulate(vxr::RunConfig::parse(config_json));
    return VXR_OK;
  });
}

vxr_status vxr_run_check(const char* config_json) {
  if (require_arg(config_json, "config_json") != VXR_OK) return VXR_ERR_VALIDATION;
  return guarded([&]() -> vxr_status {
    if (vxr::cmd_check(vxr::RunConfig::parse(config_json))) return VXR_OK;
    return record_error(vxr::ErrorKind::Runtime, "check-failed",
                        "one or more sampler checks failed; see check_report.json");
  });
}

vxr_status vxr_dataset_open(const char* directory, vxr_dataset** out) {
  if (require_arg(directory, "directory") != VXR_OK || require_arg(out, "out") != VXR_OK)
    return VXR_ERR_VALIDATION;
  *out = nullptr;
  return guarded([&] {
    auto handle = new vxr_dataset{vxr::load_dataset(directory)};
    *out = handle;
    return VXR_OK;
  });
}

void vxr_dataset_close(vxr_dataset* dataset) { delete dataset; }

vxr_status vxr_dataset_dims(const vxr_dataset* dataset, uint64_t* rows, uint64_t* features,
                            uint64_t* voxels) {
  if (require_arg(dataset, "dataset") != VXR_OK) return VXR_ERR_VALIDATION;
  clear_error();
  if (rows) *rows = static_cast<uint64_t>(dataset->dataset.rows());
  if (features) *features = static_cast<uint64_t>(dataset->dataset.features());
  if (voxels) *voxels = static_cast<uint64_t>(dataset->dataset.voxels());
  return VXR_OK;
}

vxr_status vxr_fit_run(const vxr_dataset* dataset, const char* method_config_json, vxr_fit** out) {
  if (require_arg(dataset, "dataset") != VXR_OK || require_arg(method_config_json, "method_config_json") != VXR_OK ||
      require_arg(out, "out") != VXR_OK)
    return VXR_ERR_VALIDATION;
  *out = nullptr;
  return guarded([&] {
    const vxr::RunConfig config = vxr::RunConfig::parse(method_config_json);
    vxr::FitResult fit = vxr::fit_method(dataset->dataset, config.method(), config.seed, config.threads);
    *out = new vxr_fit{std::move(fit.field), std::move(fit.map)};
    return VXR_OK;
  });
}

void vxr_fit_close(vxr_fit* fit) { delete fit; }

vxr_status vxr_fit_dims(const vxr_fit* fit, uint64_t* voxels, uint64_t* features) {
  if (require_arg(fit, "fit") != VXR_OK) return VXR_ERR_VALIDATION;
  clear_error();
  if (voxels) *voxels = static_cast<uint64_t>(fit->field.voxels());
  if (features) *features = static_cast<uint64_t>(fit->field.features());
  return VXR_OK;
}

namespace {

vxr_status copy_matrix(const vxr::Matrix& m, double* buffer, uint64_t buffer_len) {
  const uint64_t needed = static_cast<uint64_t>(m.rows()) * static_cast<uint64_t>(m.cols());
  if (buffer_len < needed)
    return record_error(vxr::ErrorKind::Validation, "invalid-parameter",
                        "buffer too small: need " + std::to_string(needed) + " doubles");
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      buffer[static_cast<uint64_t>(r) * static_cast<uint64_t>(m.cols()) + static_cast<uint64_t>(c)] = m(r, c);
  return VXR_OK;
}

}  // namespace

vxr_status vxr_fit_coefficients(const vxr_fit* fit, double* buffer, uint64_t buffer_len) {
  if (require_arg(fit, "fit") != VXR_OK || require_arg(buffer, "buffer") != VXR_OK) return VXR_ERR_VALIDATION;
  clear_error();
  return copy_matrix(fit->field.coefficients, buffer, buffer_len);
}

vxr_status vxr_fit_std_errors(const vxr_fit* fit, double* buffer, uint64_t buffer_len) {
  if (require_arg(fit, "fit") != VXR_OK || require_arg(buffer, "buffer") != VXR_OK) return VXR_ERR_VALIDATION;
  clear_error();
  return copy_matrix(fit->field.std_errors, buffer, buffer_len);
}

}  // extern "C"
