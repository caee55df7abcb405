#ifndef TRIADYN_H
#define TRIADYN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TdStatus {
  TD_STATUS_OK = 0,
  TD_STATUS_NULL_POINTER = 1,
  TD_STATUS_INVALID_ARGUMENT = 2,
  TD_STATUS_CONFIG = 3,
  TD_STATUS_NUMERICAL = 4,
  TD_STATUS_REFUSED = 5,
  TD_STATUS_IO = 6,
  TD_STATUS_BUFFER_TOO_SMALL = 7,
  TD_STATUS_PANIC = 8,
} TdStatus;

/*
 Opaque simulation handle.
 */
typedef struct TdSimulation TdSimulation;

/*
 Order parameters of the current state.
 */
typedef struct TdOrderParameters {
  double psi_form;
  double phi_align;
  double c;
  double psi_mem;
  double phi_role;
  double phi_sync;
} TdOrderParameters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *td_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *td_version(void);

/*
 Builds a simulation from TOML config text (the `run` config format).

 # Safety
 `config_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TdStatus td_simulation_new(const char *config_toml, struct TdSimulation **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `sim` must come from `td_simulation_new` and not be used afterwards.
 */
void td_simulation_free(struct TdSimulation *sim);

/*
 Advances by `steps` time steps.

 # Safety
 `sim` must be a live handle.
 */
enum TdStatus td_simulation_step(struct TdSimulation *sim, uint64_t steps);

/*
 # Safety
 `sim` must be a live handle and `out` valid.
 */
enum TdStatus td_simulation_time(struct TdSimulation *sim, double *out);

/*
 Agent count and opinion length.

 # Safety
 `sim` must be a live handle; null outputs are skipped.
 */
enum TdStatus td_simulation_shape(struct TdSimulation *sim, size_t *n_agents, size_t *opinion_dim);

/*
 Order parameters, with role stability against the initial role map.

 # Safety
 `sim` must be a live handle and `out` valid.
 */
enum TdStatus td_simulation_order_parameters(struct TdSimulation *sim,
                                             struct TdOrderParameters *out);

/*
 Conserved scalars `Q1` (norm budget plus reservoir) and `Q3` (total
 memory); `Q2` via [`td_simulation_q2`].

 # Safety
 `sim` must be a live handle; null outputs are skipped.
 */
enum TdStatus td_simulation_conserved(struct TdSimulation *sim, double *q1, double *q3);

/*
 Total opinion per component (`m` values).

 # Safety
 `sim` must be a live handle; `buf` must hold `cap` values.
 */
enum TdStatus td_simulation_q2(struct TdSimulation *sim, int64_t *buf, size_t cap, size_t *len_out);

/*
 Opinions row-major, `N * m` values of +1 or -1.

 # Safety
 `sim` must be a live handle; `buf` must hold `cap` values.
 */
enum TdStatus td_simulation_opinions(struct TdSimulation *sim,
                                     int8_t *buf,
                                     size_t cap,
                                     size_t *len_out);

/*
 Snapshot JSON with a trailing NUL; `len_out` counts the NUL.

 # Safety
 `sim` must be a live handle; `buf` must hold `cap` bytes.
 */
enum TdStatus td_simulation_snapshot_json(struct TdSimulation *sim,
                                          char *buf,
                                          size_t cap,
                                          size_t *len_out);

/*
 Exact partition function of a spin instance given as TOML (the `model`
 table of an oracle spec, without the header) at temperature `t`.

 # Safety
 `model_toml` must be a NUL-terminated string and `out` valid.
 */
enum TdStatus td_partition_function(const char *model_toml, double t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIADYN_H */
