/* C interface for the nlslab numerical laboratory. */

#ifndef NLSLAB_H
#define NLSLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum NlslabStatus {
  /**
   * Success.
   */
  NlslabStatus_Ok = 0,
  /**
   * A pointer argument was null.
   */
  NlslabStatus_NullPointer = 1,
  /**
   * Invalid argument or configuration (details via nlslab_last_error).
   */
  NlslabStatus_InvalidArgument = 2,
  /**
   * A numerical routine failed to converge or left its valid regime.
   */
  NlslabStatus_Numerical = 3,
  /**
   * Filesystem error while writing experiment artifacts.
   */
  NlslabStatus_Io = 4,
  /**
   * An experiment ran to completion but an invariant check failed.
   */
  NlslabStatus_InvariantFailed = 5,
  /**
   * Internal panic; the handle states are unchanged.
   */
  NlslabStatus_Internal = 6,
} NlslabStatus;

/**
 * Opaque handle to a solved radial ground-state profile.
 */
typedef struct NlslabProfile NlslabProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message for the calling thread into `buf`
 * (truncated, always NUL-terminated). Returns the full message length.
 */
uintptr_t nlslab_last_error(char *buf, uintptr_t len);

/**
 * Solve the ground state in dimension `d` (1..=15). On success the handle
 * must be released with `nlslab_profile_free`.
 */
enum NlslabStatus nlslab_profile_solve(uintptr_t d, struct NlslabProfile **out);

/**
 * Release a profile handle. A null handle is a no-op.
 */
void nlslab_profile_free(struct NlslabProfile *p);

/**
 * Evaluate the radial profile at `r >= 0`.
 */
enum NlslabStatus nlslab_profile_eval(const struct NlslabProfile *p, double r, double *out);

/**
 * Evaluate the radial derivative of the profile at `r >= 0`.
 */
enum NlslabStatus nlslab_profile_eval_deriv(const struct NlslabProfile *p, double r, double *out);

/**
 * Central value Q(0).
 */
enum NlslabStatus nlslab_profile_q0(const struct NlslabProfile *p, double *out);

/**
 * Squared L2 mass of the profile.
 */
enum NlslabStatus nlslab_profile_mass_sq(const struct NlslabProfile *p, double *out);

/**
 * Energy of the profile (zero at the ground state up to quadrature error).
 */
enum NlslabStatus nlslab_profile_energy(const struct NlslabProfile *p, double *out);

/**
 * Sharp interpolation-inequality constant attained by the profile.
 */
enum NlslabStatus nlslab_profile_sharp_constant(const struct NlslabProfile *p, double *out);

/**
 * Magnitude of the negative eigenvalue of the linearized operator,
 * computed on an `m`-cell radial grid (m >= 200).
 */
enum NlslabStatus nlslab_profile_eigenvalue(const struct NlslabProfile *p,
                                            uintptr_t m,
                                            double *out);

/**
 * Parse a TOML experiment configuration and run it; artifacts are written
 * to the configured output directory. Returns Ok when every invariant
 * held, InvariantFailed when the run completed but a check failed (the
 * failed checks are joined into the last-error message).
 */
enum NlslabStatus nlslab_run_experiment(const char *config_toml);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLSLAB_H */
