#ifndef MASA_H
#define MASA_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes shared by every exported function.
typedef enum MasaStatus {
  MASA_STATUS_OK = 0,
  MASA_STATUS_NULL_POINTER = 1,
  MASA_STATUS_INVALID_ARGUMENT = 2,
  MASA_STATUS_DIMENSION_MISMATCH = 3,
  MASA_STATUS_NON_FINITE = 4,
  MASA_STATUS_DATA_ERROR = 5,
  MASA_STATUS_CONFIG_ERROR = 6,
  MASA_STATUS_BUFFER_TOO_SMALL = 7,
  MASA_STATUS_INTERNAL = 8,
} MasaStatus;

// Risk formula selector for [`masa_strategy_risk`].
typedef enum MasaRiskForm {
  MASA_RISK_FORM_NORM_OF_PRODUCT = 0,
  MASA_RISK_FORM_QUADRATIC = 1,
} MasaRiskForm;

// Trained allocator.
typedef struct MasaAgent MasaAgent;

// Loaded price series.
typedef struct MasaSeries MasaSeries;

// Outputs of [`masa_propose_control`].
typedef struct MasaControl {
  double achieved_risk;
  bool feasible;
  uintptr_t evaluations;
} MasaControl;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next failing call.
const char *masa_last_error(void);

// Library version as a static nul-terminated string.
const char *masa_version(void);

// Euclidean projection of `raw[0..n]` onto the probability simplex, written to `out`.
//
// # Safety
// `raw` and `out` must each point to `n` doubles.
enum MasaStatus masa_simplex_project(const double *raw, uintptr_t n, double *out);

// Short-term risk of `weights` against the row-major `n x n` covariance.
//
// # Safety
// `weights` must point to `n` doubles, `cov` to `n * n`, `out` to one.
enum MasaStatus masa_strategy_risk(const double *weights,
                                   const double *cov,
                                   uintptr_t n,
                                   enum MasaRiskForm form,
                                   double *out);

// Risk-control adjustment of `a_rl` under boundary `sigma_s` with the default solver
// settings, overridden by `budget` and `mu` when they are non-negative.
//
// # Safety
// `a_rl`, `a_final` and `a_ctrl` must point to `n` doubles, `cov` to `n * n`,
// `market` to `market_len` (may be null when zero), `info` to one `MasaControl`.
enum MasaStatus masa_propose_control(const double *a_rl,
                                     const double *cov,
                                     uintptr_t n,
                                     double sigma_s,
                                     const double *market,
                                     uintptr_t market_len,
                                     int64_t budget,
                                     double mu,
                                     uint64_t seed,
                                     double *a_final,
                                     double *a_ctrl,
                                     struct MasaControl *info);

// Two-sided Wilcoxon rank-sum test.
//
// # Safety
// `a` must point to `na` doubles, `b` to `nb`; `p_value` and `statistic` to one each.
enum MasaStatus masa_wilcoxon(const double *a,
                              uintptr_t na,
                              const double *b,
                              uintptr_t nb,
                              double *p_value,
                              double *statistic);

// Maximum drawdown, annualized return and annualized volatility of an equity curve.
//
// # Safety
// `curve` must point to `len` doubles; each output to one double.
enum MasaStatus masa_curve_metrics(const double *curve,
                                   uintptr_t len,
                                   uint32_t days_per_year,
                                   double *mdd,
                                   double *ar,
                                   double *vol);

// Directional-change events of `prices` at threshold `theta`.
//
// Writes up to `capacity` events: kind (+1 upturn, -1 downturn) and confirmation
// index. `count` receives the total number found; `BufferTooSmall` if it exceeds `capacity`.
//
// # Safety
// `prices` must point to `len` doubles, `kinds` and `confirmations` to `capacity` values.
enum MasaStatus masa_dc_detect(const double *prices,
                               uintptr_t len,
                               double theta,
                               int8_t *kinds,
                               uintptr_t *confirmations,
                               uintptr_t capacity,
                               uintptr_t *count);

// Loads a long-format OHLCV CSV (`date,asset,open,high,low,close`).
//
// # Safety
// `path` must be a nul-terminated string and `out` valid for one pointer write.
enum MasaStatus masa_series_load(const char *path, struct MasaSeries **out);

// # Safety
// `series` must be a live handle from [`masa_series_load`].
enum MasaStatus masa_series_shape(const struct MasaSeries *series,
                                  uintptr_t *n_assets,
                                  uintptr_t *n_days);

// Copies the closes of `day` into `out`.
//
// # Safety
// `series` must be a live handle; `out` must point to `n` doubles.
enum MasaStatus masa_series_closes(const struct MasaSeries *series,
                                   uintptr_t day,
                                   double *out,
                                   uintptr_t n);

// # Safety
// `series` must be null or a handle not yet freed.
void masa_series_free(struct MasaSeries *series);

// Loads an allocator from a trained-model or bare agent checkpoint JSON file.
//
// # Safety
// `path` must be a nul-terminated string and `out` valid for one pointer write.
enum MasaStatus masa_agent_load(const char *path, struct MasaAgent **out);

// # Safety
// `agent` must be a live handle.
enum MasaStatus masa_agent_shape(const struct MasaAgent *agent,
                                 uintptr_t *obs_dim,
                                 uintptr_t *n_assets);

// Deterministic portfolio weights for a flat observation feature vector.
//
// # Safety
// `agent` must be a live handle, `features` must point to `obs_dim` doubles and
// `weights` to `n_assets`.
enum MasaStatus masa_agent_act(const struct MasaAgent *agent,
                               const double *features,
                               uintptr_t obs_dim,
                               double *weights,
                               uintptr_t n_assets);

// Length of the feature vector for a window of `window` days over `n_assets`.
uintptr_t masa_feature_len(uintptr_t window, uintptr_t n_assets);

// # Safety
// `agent` must be null or a handle not yet freed.
void masa_agent_free(struct MasaAgent *agent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MASA_H */
