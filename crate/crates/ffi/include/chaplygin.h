#ifndef CHAPLYGIN_H
#define CHAPLYGIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChEosKind {
  CH_EOS_KIND_CHAPLYGIN = 0,
  CH_EOS_KIND_POLYTROPIC = 1,
} ChEosKind;

typedef enum ChStatus {
  CH_STATUS_OK = 0,
  CH_STATUS_NULL_POINTER = 1,
  CH_STATUS_INVALID_ARGUMENT = 2,
  CH_STATUS_INVALID_GRID = 3,
  CH_STATUS_NON_FINITE = 4,
  CH_STATUS_VACUUM = 5,
  CH_STATUS_INVALID_EOS = 6,
  CH_STATUS_ORDER_TOO_LARGE = 7,
  CH_STATUS_CONFIG = 8,
  CH_STATUS_NORMALIZATION = 9,
  CH_STATUS_TOO_FEW_POINTS = 10,
  CH_STATUS_IO = 11,
  CH_STATUS_BUFFER_TOO_SMALL = 12,
  CH_STATUS_PANIC = 13,
  CH_STATUS_OTHER = 14,
} ChStatus;

/**
 * Breakdown reason codes; `None` when no criterion fired.
 */
typedef enum ChBreakdownReason {
  CH_BREAKDOWN_REASON_NONE = 0,
  CH_BREAKDOWN_REASON_GRADIENT_THRESHOLD = 1,
  CH_BREAKDOWN_REASON_VACUUM_GUARD = 2,
  CH_BREAKDOWN_REASON_SPECTRAL_TAIL = 3,
  CH_BREAKDOWN_REASON_NON_FINITE = 4,
} ChBreakdownReason;

/**
 * A resolved scenario configuration.
 */
typedef struct ChConfig ChConfig;

/**
 * A flow state together with its equation of state.
 */
typedef struct ChState ChState;

/**
 * Chaplygin uses `p0`, `b`; polytropic uses `a`, `gamma`.
 */
typedef struct ChEos {
  enum ChEosKind kind;
  double p0;
  double b;
  double a;
  double gamma;
} ChEos;

typedef struct ChBreakdown {
  bool occurred;
  /**
   * NaN when nothing fired.
   */
  double t_break;
  enum ChBreakdownReason reason;
  size_t witness_i;
  size_t witness_j;
  double witness_value;
  size_t steps;
} ChBreakdown;

typedef struct ChDataSize {
  double eps;
  double delta;
  double amplitude_irrotational;
  double amplitude_vortical;
  size_t iterations;
} ChDataSize;

typedef struct ChFit {
  double slope;
  double intercept;
  double r2;
  size_t points;
} ChFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, including the
 * terminating NUL; 0 when there is none.
 */
size_t ch_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL terminated). Returns the
 * number of bytes written, or 0 if there is no message or `len` is too small.
 *
 * # Safety
 * `buf` must be valid for `len` bytes.
 */
size_t ch_last_error_message(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *ch_version(void);

/**
 * The normalized Chaplygin law `P = 2 − 1/ρ`.
 */
struct ChEos ch_eos_chaplygin(void);

/**
 * Polytropic law with unit sound speed at unit density.
 */
struct ChEos ch_eos_polytropic(double gamma);

/**
 * Builds a state on the `n × n` grid over `[-half_width, half_width)²` from
 * `n*n` values per field, stored with the first coordinate fastest.
 *
 * # Safety
 * `sigma`, `u1`, `u2` must each hold `len` doubles; `out` must be writable.
 */
enum ChStatus ch_state_new(size_t n,
                           double half_width,
                           const struct ChEos *eos,
                           const double *sigma,
                           const double *u1,
                           const double *u2,
                           size_t len,
                           struct ChState **out);

/**
 * # Safety
 * `state` must come from this library and not be used afterwards.
 */
void ch_state_free(struct ChState *state);

/**
 * # Safety
 * `state` must be a live handle.
 */
double ch_state_time(const struct ChState *state);

/**
 * Points per axis, 0 for a null handle.
 *
 * # Safety
 * `state` must be a live handle.
 */
size_t ch_state_grid_n(const struct ChState *state);

/**
 * Copies the fields out; any of the buffers may be null to skip it.
 *
 * # Safety
 * Non-null buffers must hold `len` doubles.
 */
enum ChStatus ch_state_fields(const struct ChState *state,
                              double *sigma,
                              double *u1,
                              double *u2,
                              size_t len);

/**
 * One dealiased RK4 step of size `dt`.
 *
 * # Safety
 * `state` must be a live handle.
 */
enum ChStatus ch_state_step(struct ChState *state, double dt);

/**
 * Integrates until `t_end` or breakdown with the default detector and
 * leaves the final state in the handle.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
enum ChStatus ch_state_advance(struct ChState *state,
                               double t_end,
                               double cfl,
                               double dt_max,
                               struct ChBreakdown *out);

/**
 * Cumulative energies `E_0..E_m` written to `energies[0..=m_max]`.
 *
 * # Safety
 * `energies` must hold `m_max + 1` doubles.
 */
enum ChStatus ch_state_energies(const struct ChState *state, size_t m_max, double *energies);

/**
 * Shipped preset by name ("chaplygin-delta", "polytropic-eps", "smoke").
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum ChStatus ch_config_preset(const char *name, struct ChConfig **out);

/**
 * Configuration from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum ChStatus ch_config_from_toml(const char *text, struct ChConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void ch_config_free(struct ChConfig *cfg);

/**
 * Overrides grid size, data targets and seed; the result is validated.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum ChStatus ch_config_set(struct ChConfig *cfg,
                            size_t n,
                            double half_width,
                            double eps_target,
                            double delta_target,
                            uint64_t seed);

/**
 * Generates the initial data of a configuration. `size` may be null.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum ChStatus ch_config_initial_state(const struct ChConfig *cfg,
                                      struct ChState **out,
                                      struct ChDataSize *size);

/**
 * Fits `ln t = slope · ln v + intercept`; non-finite `t` entries are skipped.
 *
 * # Safety
 * `values` and `times` must hold `len` doubles; `out` must be writable.
 */
enum ChStatus ch_fit_powerlaw(const double *values,
                              const double *times,
                              size_t len,
                              struct ChFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHAPLYGIN_H */
