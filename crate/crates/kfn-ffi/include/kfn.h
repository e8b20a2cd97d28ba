#ifndef KFN_H
#define KFN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KfnStatus {
  KFN_STATUS_OK = 0,
  KFN_STATUS_NULL_POINTER = 1,
  KFN_STATUS_INVALID_CONFIG = 2,
  KFN_STATUS_UNKNOWN_STRATEGY = 3,
  KFN_STATUS_RUN_FAILED = 4,
  KFN_STATUS_INDEX_OUT_OF_RANGE = 5,
  KFN_STATUS_MALFORMED_MESSAGE = 6,
  KFN_STATUS_INVALID_MESSAGE = 7,
  KFN_STATUS_BUFFER_TOO_SMALL = 8,
} KfnStatus;

/**
 * Opaque simulation result. Create with `kfn_simulation_run`, read through
 * the accessor functions, release with `kfn_report_free`.
 */
typedef struct KfnReport KfnReport;

/**
 * Mirror of the simulation configuration, flattened for C callers.
 */
typedef struct KfnSimConfig {
  uint32_t node_count;
  uint32_t querier_count;
  uint32_t capacity_per_slot;
  uint32_t slot_count;
  uint32_t lost_after_slots;
  uint32_t unit_field_count;
  double risk;
  double learning_rate;
  double e_max;
  uint64_t seed;
} KfnSimConfig;

typedef struct KfnTotals {
  uint64_t created;
  uint64_t success;
  uint64_t failure;
  uint64_t lost;
  double success_prop;
  double failure_prop;
  double lost_prop;
} KfnTotals;

typedef struct KfnNodeStats {
  uint64_t successes;
  uint64_t accepted_load;
  double initial_energy;
  double final_energy;
  bool is_querier;
} KfnNodeStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Runs one simulation and hands back a report handle.
 *
 * # Safety
 * `config` and `strategy` must point to a valid configuration and a
 * NUL-terminated strategy name; `out_report` must point to writable storage
 * for one pointer.
 */
enum KfnStatus kfn_simulation_run(const struct KfnSimConfig *config,
                                  const char *strategy,
                                  struct KfnReport **out_report);

/**
 * Copies run totals out of a report.
 *
 * # Safety
 * `report` must be a live handle from `kfn_simulation_run`; `out` must point
 * to writable storage for one `KfnTotals`.
 */
enum KfnStatus kfn_report_totals(const struct KfnReport *report, struct KfnTotals *out);

/**
 * Number of nodes covered by a report.
 *
 * # Safety
 * `report` must be a live handle from `kfn_simulation_run` or null; null
 * yields zero.
 */
uint32_t kfn_report_node_count(const struct KfnReport *report);

/**
 * Copies one node's counters and mean energies out of a report.
 *
 * # Safety
 * `report` must be a live handle from `kfn_simulation_run`; `out` must point
 * to writable storage for one `KfnNodeStats`.
 */
enum KfnStatus kfn_report_node_stats(const struct KfnReport *report,
                                     uint32_t node,
                                     struct KfnNodeStats *out);

/**
 * Releases a report handle. Null is a no-op.
 *
 * # Safety
 * `report` must be null or a handle from `kfn_simulation_run` not yet freed.
 */
void kfn_report_free(struct KfnReport *report);

/**
 * Parses control-message bytes and rewrites them in canonical form. Always
 * stores the canonical length in `out_len`; bytes are copied only when
 * `out_buf` has room.
 *
 * # Safety
 * `input` must point to `input_len` readable bytes, `out_len` to writable
 * storage for one `size_t`, and `out_buf` to `out_cap` writable bytes unless
 * null.
 */
enum KfnStatus kfn_control_message_canonicalize(const uint8_t *input,
                                                size_t input_len,
                                                uint8_t *out_buf,
                                                size_t out_cap,
                                                size_t *out_len);

/**
 * NUL-terminated library version; the pointer stays valid for the process
 * lifetime.
 */
const char *kfn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KFN_H */
