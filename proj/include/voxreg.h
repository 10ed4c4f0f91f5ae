/*
 * voxreg C API: regularized voxel-wise encoding model toolkit.
 *
 * All entry points are thread-safe. Functions return VXR_OK (0) on success,
 * VXR_ERR_VALIDATION (1) for bad inputs/configs, VXR_ERR_RUNTIME (2) for
 * runtime failures. On failure, vxr_last_error() / vxr_last_error_json()
 * describe the problem for the calling thread.
 *
 * The vxr_run_* functions take a JSON run configuration (see README) and
 * write their artifacts to the configured output directory. Outputs are
 * byte-identical for identical (config, seed).
 */
#ifndef VOXREG_H
#define VOXREG_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vxr_status {
  VXR_OK = 0,
  VXR_ERR_VALIDATION = 1,
  VXR_ERR_RUNTIME = 2
} vxr_status;

/* Toolkit version string, e.g. "0.1.0". */
const char* vxr_version(void);

/* Human-readable message for the calling thread's last failure ("" if none). */
const char* vxr_last_error(void);

/* Machine-readable record: {"error":{"kind":...,"code":...,"message":...}} */
const char* vxr_last_error_json(void);

/* Workflow entry points; each maps 1:1 onto a CLI subcommand. */
vxr_status vxr_run_fit(const char* config_json);
vxr_status vxr_run_evaluate(const char* config_json);
vxr_status vxr_run_smooth(const char* config_json);
vxr_status vxr_run_simulate(const char* config_json);

/* Runs the sampler validation harness. Returns VXR_OK when every check
 * passes; VXR_ERR_RUNTIME with code "check-failed" when the report (still
 * written) contains failures. */
vxr_status vxr_run_check(const char* config_json);

/* ---- opaque handles for programmatic use ---- */

typedef struct vxr_dataset vxr_dataset;

vxr_status vxr_dataset_open(const char* directory, vxr_dataset** out);
void vxr_dataset_close(vxr_dataset* dataset);
vxr_status vxr_dataset_dims(const vxr_dataset* dataset, uint64_t* rows, uint64_t* features,
                            uint64_t* voxels);

typedef struct vxr_fit vxr_fit;

/* Fits a method on the dataset. method_config_json uses the same schema as a
 * run configuration ("method" plus optional method sections and "seed"). */
vxr_status vxr_fit_run(const vxr_dataset* dataset, const char* method_config_json, vxr_fit** out);
void vxr_fit_close(vxr_fit* fit);
vxr_status vxr_fit_dims(const vxr_fit* fit, uint64_t* voxels, uint64_t* features);

/* Copies the V x P coefficient (or standard-error) matrix, row-major, into
 * buffer; buffer_len must be >= voxels*features. */
vxr_status vxr_fit_coefficients(const vxr_fit* fit, double* buffer, uint64_t buffer_len);
vxr_status vxr_fit_std_errors(const vxr_fit* fit, double* buffer, uint64_t buffer_len);

#ifdef __cplusplus
}
#endif

#endif /* VOXREG_H */
