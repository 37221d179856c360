#ifndef QJCAL_H
#define QJCAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum QjcalStatus {
  QJCAL_STATUS_OK = 0,
  QJCAL_STATUS_NULL_POINTER = 1,
  QJCAL_STATUS_INVALID_PARAMETER = 2,
  QJCAL_STATUS_RUNTIME = 3,
  QJCAL_STATUS_IO = 4,
  QJCAL_STATUS_BUFFER_TOO_SMALL = 5,
  QJCAL_STATUS_PANIC = 6,
} QjcalStatus;

/**
 * Opaque run configuration.
 */
typedef struct QjcalConfig QjcalConfig;

/**
 * Opaque ensemble result.
 */
typedef struct QjcalEnsemble QjcalEnsemble;

/**
 * Opaque trajectory record.
 */
typedef struct QjcalTrajectory QjcalTrajectory;

/**
 * Transition rates in units of `ω_Q/Q`.
 */
typedef struct QjcalRates {
  double gamma_down;
  double gamma_up;
  double gamma_sigma;
  double delta_gamma;
} QjcalRates;

/**
 * Density-matrix elements `ρ_gg` and `ρ_ge`.
 */
typedef struct QjcalDensity {
  double rho_gg;
  double rho_ge_re;
  double rho_ge_im;
} QjcalDensity;

/**
 * Quantum jump: `direction` is `+1` for `|e⟩→|g⟩`, `-1` for `|g⟩→|e⟩`.
 */
typedef struct QjcalEvent {
  double time;
  int32_t direction;
} QjcalEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qjcal_last_error(void);

/**
 * Rates for `βħω_Q` (pass `INFINITY` for zero temperature).
 */
enum QjcalStatus qjcal_rates(double beta_hw, struct QjcalRates *out);

/**
 * Master-equation solution at time `t` (units of `1/Γ↓(T=0)`).
 */
enum QjcalStatus qjcal_me_solution(double beta_hw,
                                   struct QjcalDensity rho0,
                                   double t,
                                   struct QjcalDensity *out);

/**
 * No-jump probability up to `t` from the state with excited population
 * `prob_e` and relative phase `phase`.
 */
enum QjcalStatus qjcal_survival_probability(double beta_hw,
                                            double prob_e,
                                            double phase,
                                            double t,
                                            double *out);

/**
 * Probability that the first photon is absorbed by the detector, by
 * quadrature.
 */
enum QjcalStatus qjcal_guardian_click_probability(double beta_hw, double prob_e, double *out);

/**
 * New configuration with default values.
 */
struct QjcalConfig *qjcal_config_default(void);

/**
 * Parses a JSON configuration. On success `*out` receives a new handle.
 */
enum QjcalStatus qjcal_config_from_json(const char *json, struct QjcalConfig **out);

/**
 * Serializes the fully resolved configuration into `buf`. `*len` receives
 * the required size including the terminating NUL; if `buf_len` is too
 * small nothing is written and `BufferTooSmall` is returned.
 */
enum QjcalStatus qjcal_config_to_json(const struct QjcalConfig *cfg,
                                      char *buf,
                                      size_t buf_len,
                                      size_t *len);

void qjcal_config_free(struct QjcalConfig *cfg);

/**
 * Runs trajectory `index` with the configured scheme over `[0, t_max]`.
 */
enum QjcalStatus qjcal_trajectory_simulate(const struct QjcalConfig *cfg,
                                           uint64_t index,
                                           struct QjcalTrajectory **out);

enum QjcalStatus qjcal_trajectory_event_count(const struct QjcalTrajectory *traj, size_t *out);

enum QjcalStatus qjcal_trajectory_event(const struct QjcalTrajectory *traj,
                                        size_t i,
                                        struct QjcalEvent *out);

/**
 * Excited population of the trajectory at time `t`.
 */
enum QjcalStatus qjcal_trajectory_prob_e(const struct QjcalTrajectory *traj, double t, double *out);

void qjcal_trajectory_free(struct QjcalTrajectory *traj);

/**
 * Runs the configured ensemble on `workers` threads (0 = all cores).
 */
enum QjcalStatus qjcal_ensemble_run(const struct QjcalConfig *cfg,
                                    size_t workers,
                                    struct QjcalEnsemble **out);

/**
 * Number of time bins.
 */
enum QjcalStatus qjcal_ensemble_bins(const struct QjcalEnsemble *ens, size_t *out);

/**
 * Copies bin centers, `J_ee` and its standard error into caller arrays of
 * length `len`; any of the pointers may be null to skip that column.
 */
enum QjcalStatus qjcal_ensemble_series(const struct QjcalEnsemble *ens,
                                       double *t,
                                       double *j_ee,
                                       double *se_ee,
                                       size_t len);

/**
 * `max_t |J_ee − ρ_ee|` and the largest model z-score.
 */
enum QjcalStatus qjcal_ensemble_me_deviation(const struct QjcalEnsemble *ens,
                                             double *max_abs_dev_ee,
                                             double *max_abs_z);

void qjcal_ensemble_free(struct QjcalEnsemble *ens);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QJCAL_H */
