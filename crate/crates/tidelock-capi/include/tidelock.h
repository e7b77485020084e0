/* C interface of the tidelock synchronous-rotation laboratory. */

#ifndef TIDELOCK_H
#define TIDELOCK_H

/* Generated by cbindgen from the tidelock-capi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum {
  // The call succeeded.
  TL_OK = 0,
  // Invalid configuration, argument, or input file contents.
  TL_ERR_CONFIG = 2,
  // A verification-style check ran to completion and failed.
  TL_ERR_VERIFICATION = 3,
  // A numerical operation failed (solver divergence, chart exit, ...).
  TL_ERR_NUMERIC = 4,
  // A required pointer argument was null.
  TL_ERR_NULL_ARG = 5,
  // A string argument was not valid UTF-8.
  TL_ERR_UTF8 = 6,
  // A file could not be read or written.
  TL_ERR_IO = 7,
} tl_status;

// Verdict of the relaxation experiment.
typedef enum {
  // Energy decayed monotonically and every convergence threshold held.
  TL_VERDICT_PASS = 0,
  // The run completed but at least one threshold failed.
  TL_VERDICT_FAIL = 1,
  // The run halted early, so the thresholds could not be judged.
  TL_VERDICT_INCONCLUSIVE = 2,
} tl_verdict;

// Opaque handle to a solved synchronous equilibrium.
typedef struct tl_equilibrium tl_equilibrium;

// Opaque handle to a validated model parameterization.
typedef struct tl_model tl_model;

// Opaque handle to a relaxation-experiment report.
typedef struct tl_report tl_report;

// Opaque handle to a sampled trajectory.
typedef struct tl_trajectory tl_trajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a static NUL-terminated string.
const char *tl_version(void);

// Message of the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread; never free it.
const char *tl_last_error(void);

// Release a string returned through an `out` parameter.
//
// # Safety
// `s` must be a string produced by this library and not yet freed.
void tl_string_free(char *s);

// Build the reference model (the documented default constants).
//
// # Safety
// `out` must be a valid pointer to a handle slot.
tl_status tl_model_default(tl_model **out);

// Build a model from a JSON configuration string.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` a valid handle slot.
tl_status tl_model_from_json(const char *json, tl_model **out);

// Build a model from a JSON configuration file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` a valid handle slot.
tl_status tl_model_from_file(const char *path, tl_model **out);

// Replace the rigidity scale of the elastic energy.
//
// # Safety
// `model` must be a live handle from this library.
tl_status tl_model_set_epsilon(tl_model *model, double epsilon);

// Replace the friction: isotropic with strength `eta`, or none for 0.
//
// # Safety
// `model` must be a live handle from this library.
tl_status tl_model_set_friction(tl_model *model, double eta);

// Number of configuration slots (6 + number of auxiliary shape modes).
//
// # Safety
// `model` must be a live handle; `out` a valid scalar slot.
tl_status tl_model_dim(const tl_model *model, size_t *out);

// Release a model handle.
//
// # Safety
// `model` must be a live handle from this library or null.
void tl_model_free(tl_model *model);

// Solve for the synchronous equilibrium of the model.
//
// # Safety
// `model` must be a live handle; `out` a valid handle slot.
tl_status tl_find_equilibrium(const tl_model *model, tl_equilibrium **out);

// Orbital radius of the equilibrium.
//
// # Safety
// `eq` must be a live handle; `out` a valid scalar slot.
tl_status tl_equilibrium_radius(const tl_equilibrium *eq, double *out);

// Copy the three moment increments into `out[0..3]`.
//
// # Safety
// `eq` must be a live handle; `out` must point at three writable doubles.
tl_status tl_equilibrium_moments(const tl_equilibrium *eq, double *out);

// Angular velocity of the synchronous circular motion.
//
// # Safety
// `model` and `eq` must be live handles; `out` a valid scalar slot.
tl_status tl_equilibrium_mean_motion(const tl_model *model, const tl_equilibrium *eq, double *out);

// Serialize the equilibrium to a JSON string (release with
// [`tl_string_free`]).
//
// # Safety
// `model` and `eq` must be live handles; `out` a valid string slot.
tl_status tl_equilibrium_json(const tl_model *model, const tl_equilibrium *eq, char **out);

// Release an equilibrium handle.
//
// # Safety
// `eq` must be a live handle from this library or null.
void tl_equilibrium_free(tl_equilibrium *eq);

// Integrate a perturbed equilibrium with the adaptive embedded
// Runge-Kutta method and record the trajectory. A nonpositive
// `record_interval` records every accepted step.
//
// # Safety
// `model` and `eq` must be live handles; `out` a valid handle slot.
tl_status tl_simulate_adaptive(const tl_model *model,
                               const tl_equilibrium *eq,
                               double perturbation,
                               double t_end,
                               double record_interval,
                               double rtol,
                               double atol,
                               tl_trajectory **out);

// Integrate a perturbed equilibrium with the fixed-step symplectic
// midpoint method and record the trajectory.
//
// # Safety
// `model` and `eq` must be live handles; `out` a valid handle slot.
tl_status tl_simulate_midpoint(const tl_model *model,
                               const tl_equilibrium *eq,
                               double perturbation,
                               double t_end,
                               double record_interval,
                               double dt,
                               tl_trajectory **out);

// Number of recorded samples.
//
// # Safety
// `traj` must be a live handle; `out` a valid scalar slot.
tl_status tl_trajectory_len(const tl_trajectory *traj, size_t *out);

// Copy the sample times into `buf` (capacity `cap` samples).
//
// # Safety
// `traj` must be a live handle; `buf` must hold `cap` writable doubles.
tl_status tl_trajectory_times(const tl_trajectory *traj, double *buf, size_t cap);

// Copy the reduced energy samples into `buf` (capacity `cap` samples).
//
// # Safety
// `traj` must be a live handle; `buf` must hold `cap` writable doubles.
tl_status tl_trajectory_energies(const tl_trajectory *traj, double *buf, size_t cap);

// Copy the manifold-distance samples into `buf` (capacity `cap` samples).
//
// # Safety
// `traj` must be a live handle; `buf` must hold `cap` writable doubles.
tl_status tl_trajectory_manifold_distances(const tl_trajectory *traj, double *buf, size_t cap);

// Write the trajectory as CSV to `path` (same layout as the CLI).
//
// # Safety
// `traj` must be a live handle; `path` a valid NUL-terminated string.
tl_status tl_trajectory_write_csv(const tl_trajectory *traj, const char *path);

// Release a trajectory handle.
//
// # Safety
// `traj` must be a live handle from this library or null.
void tl_trajectory_free(tl_trajectory *traj);

// Relax a perturbed equilibrium under the model's friction and judge the
// convergence against the default thresholds. The model must be
// dissipative.
//
// # Safety
// `model` and `eq` must be live handles; `out` a valid handle slot.
tl_status tl_relax(const tl_model *model,
                   const tl_equilibrium *eq,
                   double perturbation,
                   double t_end,
                   tl_report **out);

// Verdict of a relaxation report.
//
// # Safety
// `report` must be a live handle; `out` a valid slot.
tl_status tl_report_verdict(const tl_report *report, tl_verdict *out);

// Final-sample diagnostics of a relaxation report: manifold distance,
// orientation angle, osculating eccentricity, and the largest energy
// increase seen between consecutive samples, in that order.
//
// # Safety
// `report` must be a live handle; `out` must point at four writable
// doubles.
tl_status tl_report_diagnostics(const tl_report *report, double *out);

// Release a report handle.
//
// # Safety
// `report` must be a live handle from this library or null.
void tl_report_free(tl_report *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIDELOCK_H */
