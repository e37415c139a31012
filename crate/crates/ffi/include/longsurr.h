#ifndef LONGSURR_H
#define LONGSURR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_CONFIG = 3,
  LS_STATUS_DATA = 4,
  LS_STATUS_ESTIMATION = 5,
  LS_STATUS_INFERENCE = 6,
  LS_STATUS_DIAGNOSTIC = 7,
  LS_STATUS_IO = 8,
  LS_STATUS_PANIC = 99,
} LsStatus;

// Opaque panel handle.
typedef struct LsPanel LsPanel;

// Opaque effect trajectory handle.
typedef struct LsTrajectory LsTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *ls_last_error(void);

// Library version as a static NUL-terminated string.
const char *ls_version(void);

// Generates a synthetic panel from a JSON design, e.g.
// `{"kind":"stabilized1","n_per_arm":1000,"seed":7}`. When `out_truth` is
// non-NULL it receives the true effect trajectory.
enum LsStatus ls_simulate(const char *spec_json,
                          struct LsPanel **out_panel,
                          struct LsTrajectory **out_truth);

// Reads a long-format panel CSV.
enum LsStatus ls_panel_load_csv(const char *path,
                                size_t t_experimental,
                                size_t t_total,
                                size_t pre_periods,
                                struct LsPanel **out_panel);

// Writes the panel as long-format CSV.
enum LsStatus ls_panel_save_csv(const struct LsPanel *panel, const char *path);

// Units in the panel; 0 for NULL.
size_t ls_panel_n_units(const struct LsPanel *panel);

// Horizon T; 0 for NULL.
size_t ls_panel_t_total(const struct LsPanel *panel);

// Experimental length T_E; 0 for NULL.
size_t ls_panel_t_experimental(const struct LsPanel *panel);

void ls_panel_free(struct LsPanel *panel);

// Runs one estimator, e.g. `{"name":"lsm"}` or `{"name":"knn","k":10}`.
enum LsStatus ls_estimate(const struct LsPanel *panel,
                          const char *estimator_json,
                          uint64_t seed,
                          struct LsTrajectory **out_trajectory);

// Point estimate with a subsample-bootstrap percentile band attached.
enum LsStatus ls_estimate_with_band(const struct LsPanel *panel,
                                    const char *estimator_json,
                                    size_t replicas,
                                    double fraction,
                                    double level,
                                    uint64_t seed,
                                    struct LsTrajectory **out_trajectory);

// Sharp-null permutation test on the estimate at `period` (1-based).
enum LsStatus ls_permutation_test(const struct LsPanel *panel,
                                  const char *estimator_json,
                                  size_t replicas,
                                  size_t period,
                                  uint64_t seed,
                                  double *out_statistic,
                                  double *out_p_value);

// Sample-ratio chi-square test of arm counts against a treated share.
enum LsStatus ls_srm_test(size_t n_treated,
                          size_t n_control,
                          double expected_treated_fraction,
                          double *out_statistic,
                          double *out_p_value);

// Number of periods T; 0 for NULL.
size_t ls_trajectory_len(const struct LsTrajectory *trajectory);

// Copies τ̂_1..τ̂_T into `out`, which must hold at least T values.
enum LsStatus ls_trajectory_values(const struct LsTrajectory *trajectory, double *out, size_t len);

// Copies the band into `lower` and `upper`; INVALID_ARGUMENT when the
// trajectory carries no band.
enum LsStatus ls_trajectory_band(const struct LsTrajectory *trajectory,
                                 double *lower,
                                 double *upper,
                                 size_t len);

void ls_trajectory_free(struct LsTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LONGSURR_H */
