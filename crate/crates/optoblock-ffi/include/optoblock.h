/* C interface to the optoblock nonreciprocal photon-blockade simulator. */

#ifndef OPTOBLOCK_H
#define OPTOBLOCK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum ObStatus {
  OB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OB_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments failed validation.
   */
  OB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Configuration text could not be parsed.
   */
  OB_STATUS_CONFIG = 3,
  /**
   * The solver failed (degenerate steady state, integrator failure, ...).
   */
  OB_STATUS_SOLVER = 4,
  /**
   * Filesystem failure.
   */
  OB_STATUS_IO = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  OB_STATUS_UTF8 = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  OB_STATUS_PANIC = 7,
} ObStatus;

/**
 * Opaque handle holding a validated parameter set.
 */
typedef struct ObParams ObParams;

/**
 * Scalar transport observables of one operating point.
 */
typedef struct ObTransport {
  double t21;
  double t12;
  double isolation_db;
  double g2_21_zero;
  double g2_12_zero;
  double n_l;
  double n_r;
  double residual_rel_21;
  double residual_rel_12;
} ObTransport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static C string.
 */
const char *ob_version(void);

/**
 * Description of the last failure on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *ob_last_error_message(void);

/**
 * Create a parameter set. Detunings and rates are in units of gamma_c;
 * `coupling` must be the non-negative pair-exchange strength G.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum ObStatus ob_params_new(double detuning,
                            double mech_detuning,
                            double coupling,
                            double probe_amplitude,
                            double mech_damping,
                            double thermal_phonons,
                            uint32_t cutoff_photon,
                            uint32_t cutoff_phonon,
                            struct ObParams **out);

/**
 * Create the standard operating point (G = 3, eps = 1/10, gamma_m = 1/100,
 * n_th = 0, cutoffs (5, 12)) at a detuning given in units of G, with the
 * mechanical detuning locked to Delta/2.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum ObStatus ob_params_new_blockade(double detuning_over_g, struct ObParams **out);

/**
 * Release a parameter handle. Null is a no-op.
 *
 * # Safety
 * `p` must have come from an `ob_params_new*` call and not be freed twice.
 */
void ob_params_free(struct ObParams *p);

/**
 * Solve both probe directions at this operating point and fill the
 * transport observables.
 *
 * # Safety
 * `p` must be a live handle; `out` must point to an `ObTransport`.
 */
enum ObStatus ob_solve_transport(const struct ObParams *p, struct ObTransport *out);

/**
 * Delayed correlation g2_21(tau) on the port-1 path over an ascending
 * grid of delays (units of 1/gamma_c), written to `out_g2[0..n_taus]`.
 *
 * # Safety
 * `p` must be a live handle; `taus` and `out_g2` must each point to
 * `n_taus` doubles.
 */
enum ObStatus ob_g2_delay(const struct ObParams *p,
                          const double *taus,
                          size_t n_taus,
                          double *out_g2);

/**
 * Predicted resonance detunings (units of G) from the dressed ladder up
 * to `max_pair`, ascending and deduplicated. Writes at most `capacity`
 * values and stores the full count in `n_out`; a short buffer is reported
 * as invalid.
 *
 * # Safety
 * `out` must point to `capacity` doubles; `n_out` to one `size_t`.
 */
enum ObStatus ob_resonance_detunings(uint32_t max_pair,
                                     uint32_t cutoff_photon,
                                     uint32_t cutoff_phonon,
                                     double *out,
                                     size_t capacity,
                                     size_t *n_out);

/**
 * Run a full sweep from configuration text (the flat key = value format)
 * and write the CSV table to `out_csv_path`. `threads` = 0 uses all cores.
 *
 * # Safety
 * `config_text` and `out_csv_path` must be NUL-terminated strings.
 */
enum ObStatus ob_run_sweep(const char *config_text, const char *out_csv_path, uint32_t threads);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTOBLOCK_H */
