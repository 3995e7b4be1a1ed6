#ifndef RIESZ_RPO_H
#define RIESZ_RPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_POINTER = 1,
  RR_STATUS_INVALID_ARGUMENT = 2,
  RR_STATUS_SINGULAR = 3,
  RR_STATUS_PANIC = 4,
} RrStatus;

typedef enum RrDgp {
  RR_DGP_BASELINE = 0,
  RR_DGP_NETWORK = 1,
} RrDgp;

typedef enum RrMode {
  RR_MODE_SIZE = 0,
  RR_MODE_POWER = 1,
} RrMode;

typedef enum RrConvention {
  RR_CONVENTION_CLOSED = 0,
  RR_CONVENTION_OPEN = 1,
} RrConvention;

typedef enum RrCentring {
  RR_CENTRING_RPO = 0,
  RR_CENTRING_REALISED = 1,
} RrCentring;

/**
 * Opaque simulation configuration.
 */
typedef struct RrSimConfig RrSimConfig;

/**
 * Opaque simulation report.
 */
typedef struct RrSimReport RrSimReport;

/**
 * Scalar fields of a report.
 */
typedef struct RrReportSummary {
  double coverage;
  double mean_tau_hat;
  double var_tau_hat;
  double mean_sigma2_hat;
  double mean_tau_target;
  double var_tau_error;
  size_t degenerate_count;
  size_t reps;
} RrReportSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *rr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rr_version(void);

/**
 * New config with defaults: baseline, n = 100, d = 0, 2000 reps, levels
 * {0.01, 0.05, 0.10}, size mode, p_edge 0.1, spillover 0.5, p_treat 0.5,
 * closed neighbourhoods, RPO centring, seed 0.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RrStatus rr_sim_config_new(struct RrSimConfig **out);

/**
 * # Safety
 * `cfg` must come from [`rr_sim_config_new`] and not be used afterwards. Null is ignored.
 */
void rr_sim_config_free(struct RrSimConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_dgp(struct RrSimConfig *cfg, enum RrDgp dgp);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_mode(struct RrSimConfig *cfg, enum RrMode mode);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_convention(struct RrSimConfig *cfg, enum RrConvention convention);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_centring(struct RrSimConfig *cfg, enum RrCentring centring);

/**
 * Sets `n`, `d` and the replication count together, validating the result.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_size(struct RrSimConfig *cfg, size_t n, double d, size_t reps);

/**
 * Sets the edge probability, spillover strength and treatment probability.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_parameters(struct RrSimConfig *cfg,
                                           double p_edge,
                                           double gamma_spill,
                                           double p_treat);

/**
 * # Safety
 * `cfg` must be a live config handle and `levels` valid for `len` reads.
 */
enum RrStatus rr_sim_config_set_levels(struct RrSimConfig *cfg, const double *levels, size_t len);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum RrStatus rr_sim_config_set_seed(struct RrSimConfig *cfg, uint64_t seed);

/**
 * Runs every replication on `threads` workers (0 = one per core). The report
 * does not depend on `threads`.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` valid for writes.
 */
enum RrStatus rr_run_simulation(const struct RrSimConfig *cfg,
                                size_t threads,
                                struct RrSimReport **out);

/**
 * # Safety
 * `report` must come from [`rr_run_simulation`] and not be used afterwards. Null is ignored.
 */
void rr_sim_report_free(struct RrSimReport *report);

/**
 * # Safety
 * `report` must be a live report handle and `out` valid for writes.
 */
enum RrStatus rr_sim_report_summary(const struct RrSimReport *report, struct RrReportSummary *out);

/**
 * Rejection rate at a configured level.
 *
 * # Safety
 * `report` must be a live report handle and `out` valid for writes.
 */
enum RrStatus rr_sim_report_rejection(const struct RrSimReport *report, double level, double *out);

/**
 * Horvitz-Thompson weight `z/p - (1-z)/(1-p)` for `z` in {0, 1}.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RrStatus rr_ht_representer_value(double p_treat, uint8_t z, double *out);

/**
 * `E[1/|N_i|]` in a closed Erdős–Rényi block of size `m` with edge probability `p`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RrStatus rr_expected_inverse_neighbourhood(size_t m, double p, double *out);

/**
 * Two-sided standard normal critical value `q_{1 - level/2}`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RrStatus rr_two_sided_critical(double level, double *out);

/**
 * `sum_i nu_i y_i psi_i`.
 *
 * # Safety
 * `y`, `psi` and `nu` must each be valid for `n` reads; `out` valid for writes.
 */
enum RrStatus rr_aggregate_estimate(const double *y,
                                    const double *psi,
                                    const double *nu,
                                    size_t n,
                                    double *out);

/**
 * Local-dependence variance over the pairs of units sharing a block id.
 *
 * # Safety
 * `zeta`, `nu` and `block_ids` must each be valid for `n` reads; `out` valid for writes.
 */
enum RrStatus rr_variance_blocks(const double *zeta,
                                 const double *nu,
                                 const size_t *block_ids,
                                 size_t n,
                                 double *out);

/**
 * Runs the oracle suite; `*passed` is 1 when every check passes, else 0.
 *
 * # Safety
 * `passed` must be valid for writes.
 */
enum RrStatus rr_run_oracle_suite(size_t max_n,
                                  size_t worlds,
                                  uint64_t seed,
                                  size_t graphs,
                                  int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIESZ_RPO_H */
