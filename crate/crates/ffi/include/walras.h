#ifndef WALRAS_H
#define WALRAS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WalrasStatus {
  WALRAS_STATUS_OK = 0,
  WALRAS_STATUS_NULL_POINTER = 1,
  WALRAS_STATUS_INVALID_UTF8 = 2,
  WALRAS_STATUS_PARSE_ERROR = 3,
  WALRAS_STATUS_INVALID_ARGUMENT = 4,
  WALRAS_STATUS_NUMERICAL_ERROR = 5,
  WALRAS_STATUS_INTERNAL_ERROR = 6,
  WALRAS_STATUS_BUFFER_TOO_SMALL = 7,
  WALRAS_STATUS_PANIC = 8,
} WalrasStatus;

/**
 * An exchange economy.
 */
typedef struct WalrasEconomy WalrasEconomy;

/**
 * The result of an equilibrium search.
 */
typedef struct WalrasReport WalrasReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *walras_last_error(void);

/**
 * Parses an economy from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum WalrasStatus walras_economy_from_toml(const char *text, struct WalrasEconomy **out);

/**
 * # Safety
 * `e` must come from [`walras_economy_from_toml`] and not be used again.
 */
void walras_economy_free(struct WalrasEconomy *e);

/**
 * # Safety
 * `e` must be a live economy handle; `out` must be writable.
 */
enum WalrasStatus walras_economy_goods(const struct WalrasEconomy *e, size_t *out);

/**
 * Aggregate excess demand at strictly positive prices (normalised to the
 * simplex internally).
 *
 * # Safety
 * `prices` and `out` must point to `goods` doubles.
 */
enum WalrasStatus walras_economy_excess_demand(const struct WalrasEconomy *e,
                                               const double *prices,
                                               size_t goods,
                                               double *out);

/**
 * Finds the equilibria of an economy. `grid_density` 0 selects the default
 * number of Newton starts per chart dimension.
 *
 * # Safety
 * `e` must be a live economy handle; `out` must be writable.
 */
enum WalrasStatus walras_find_equilibria(const struct WalrasEconomy *e,
                                         size_t grid_density,
                                         struct WalrasReport **out);

/**
 * # Safety
 * `r` must come from [`walras_find_equilibria`] and not be used again.
 */
void walras_report_free(struct WalrasReport *r);

/**
 * # Safety
 * `r` must be a live report handle; `out` must be writable.
 */
enum WalrasStatus walras_report_len(const struct WalrasReport *r, size_t *out);

/**
 * Simplex prices, local index and regularity of equilibrium `i`.
 *
 * # Safety
 * `price_out` must point to `goods` writable doubles; `index_out` and
 * `regular_out` must be writable.
 */
enum WalrasStatus walras_report_equilibrium(const struct WalrasReport *r,
                                            size_t i,
                                            double *price_out,
                                            size_t goods,
                                            int32_t *index_out,
                                            bool *regular_out);

/**
 * Index sum and whether the equilibrium set was found to be finite.
 *
 * # Safety
 * `r` must be a live report handle; outputs must be writable.
 */
enum WalrasStatus walras_report_summary(const struct WalrasReport *r,
                                        int32_t *index_sum_out,
                                        bool *finite_out);

/**
 * Weights μ ≥ 1 with Σ μᵢ zᵢ(p) = target for the symmetric canonical
 * family at strictly positive prices `p`. The target must satisfy
 * p·target = 0.
 *
 * # Safety
 * `prices`, `target` and `mu_out` must point to `goods` doubles.
 */
enum WalrasStatus walras_decompose(const double *prices,
                                   const double *target,
                                   size_t goods,
                                   double *mu_out);

/**
 * SARP check on `n` observations of `goods` goods, stored row-major.
 * On a violation, writes the cycle as 0-based observation indices.
 *
 * # Safety
 * `prices` and `bundles` must point to `n * goods` doubles, `cycle_out` to
 * `cycle_cap` writable entries; the scalar outputs must be writable.
 */
enum WalrasStatus walras_sarp_check(const double *prices,
                                    const double *bundles,
                                    size_t n,
                                    size_t goods,
                                    bool *violated_out,
                                    size_t *cycle_out,
                                    size_t cycle_cap,
                                    size_t *cycle_len_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WALRAS_H */
