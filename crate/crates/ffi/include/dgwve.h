#ifndef DGWVE_H
#define DGWVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum DgwveStatus {
  DGWVE_STATUS_OK = 0,
  DGWVE_STATUS_NULL_POINTER = 1,
  DGWVE_STATUS_INVALID_ARGUMENT = 2,
  DGWVE_STATUS_PRECONDITION = 3,
  DGWVE_STATUS_BUDGET = 4,
  DGWVE_STATUS_IO = 5,
  DGWVE_STATUS_PANIC = 6,
} DgwveStatus;

typedef enum DgwveMode {
  DGWVE_MODE_DIRECT = 0,
  DGWVE_MODE_COUPLED = 1,
} DgwveMode;

// A varying environment.
typedef struct DgwveEnv DgwveEnv;

// An offspring law.
typedef struct DgwveLaw DgwveLaw;

// Monte Carlo summary at the horizon.
typedef struct DgwveMcSummary {
  double survival;
  double survival_se;
  double p_ext;
  double p_delta;
  // `E[Z_n | alive]`; NaN when no replicate survived.
  double cond_mean;
  uint64_t extinct;
  uint64_t absorbed_delta;
  uint64_t alive;
  uint64_t overflow;
} DgwveMcSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *dgwve_last_error(void);

// Library version as a static NUL-terminated string.
const char *dgwve_version(void);

// Finite-support law with `weights[k] = f[k]` for `k < len`.
//
// # Safety
// `weights` must point to `len` readable doubles and `out` must be writable.
enum DgwveStatus dgwve_law_finite(const double *weights, size_t len, struct DgwveLaw **out);

// `f(s) = q + r / (1 - p s)`.
//
// # Safety
// `out` must be writable.
enum DgwveStatus dgwve_law_lf(double q, double r, double p, struct DgwveLaw **out);

// # Safety
// `law` must come from this library and not be used afterwards. NULL is ignored.
void dgwve_law_free(struct DgwveLaw *law);

// `f(s)`, `f'(s)` or `f''(s)` for `order` 0, 1, 2.
//
// # Safety
// `law` must be a live handle and `out` writable.
enum DgwveStatus dgwve_law_eval(const struct DgwveLaw *law, double s, uint8_t order, double *out);

// Smallest fixed point in `(0, 1)`; `*found` is 0 when there is none.
//
// # Safety
// `law` must be a live handle, `theta` and `found` writable.
enum DgwveStatus dgwve_law_fixed_point(const struct DgwveLaw *law, double *theta, int32_t *found);

// The environment `f_n = law` for every `n`. The law is copied.
//
// # Safety
// `law` must be a live handle and `out` writable.
enum DgwveStatus dgwve_env_constant(const struct DgwveLaw *law, struct DgwveEnv **out);

// An environment from its JSON literal, e.g.
// `{"kind":"named","id":"example-1b"}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum DgwveStatus dgwve_env_from_json(const char *json, struct DgwveEnv **out);

// # Safety
// `env` must come from this library and not be used afterwards. NULL is ignored.
void dgwve_env_free(struct DgwveEnv *env);

// `f_{k,n}(s)` or one of its first two derivatives.
//
// # Safety
// `env` must be a live handle and `out` writable.
enum DgwveStatus dgwve_env_compose_eval(const struct DgwveEnv *env,
                                        size_t k,
                                        size_t n,
                                        double s,
                                        uint8_t order,
                                        double *out);

// `P[τ_a > n]`.
//
// # Safety
// `env` must be a live handle and `out` writable.
enum DgwveStatus dgwve_env_survival(const struct DgwveEnv *env, size_t n, double *out);

// `E[Z_n]` and `E[Z_n²]`.
//
// # Safety
// `env` must be a live handle, `mean` and `second` writable.
enum DgwveStatus dgwve_env_moments(const struct DgwveEnv *env,
                                   size_t n,
                                   double *mean,
                                   double *second);

// `P[Z_n = k]` for `k = 0..=d` into `probs` (length `d + 1`), with the
// `Δ` mass and the mass above `d`.
//
// # Safety
// `env` must be a live handle; `probs` must hold `d + 1` doubles; `delta`
// and `tail` must be writable.
enum DgwveStatus dgwve_env_distribution(const struct DgwveEnv *env,
                                        size_t n,
                                        size_t d,
                                        double *probs,
                                        double *delta,
                                        double *tail);

// Monte Carlo over `reps` replicates. `threads` = 0 uses the global pool.
// Results depend only on the arguments, not on `threads`.
//
// # Safety
// `env` must be a live handle and `out` writable.
enum DgwveStatus dgwve_simulate(const struct DgwveEnv *env,
                                size_t horizon,
                                uint64_t reps,
                                enum DgwveMode mode,
                                uint64_t master_seed,
                                size_t threads,
                                struct DgwveMcSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DGWVE_H */
