#ifndef WDRO_H
#define WDRO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 to 4 match the exit codes of the command-line tool.
 */
typedef enum WdroStatus {
  WDRO_STATUS_OK = 0,
  WDRO_STATUS_NULL_ARGUMENT = 1,
  WDRO_STATUS_INPUT = 2,
  WDRO_STATUS_SCALE = 3,
  WDRO_STATUS_NUMERIC = 4,
  WDRO_STATUS_INTERNAL = 5,
  WDRO_STATUS_PANIC = 6,
} WdroStatus;

/**
 * Finitely supported distribution returned by the oracle.
 */
typedef struct WdroDistribution WdroDistribution;

/**
 * Learner state bound to a copy of its problem.
 */
typedef struct WdroLearner WdroLearner;

/**
 * A parsed experiment: loss, decision set, radius and tolerances.
 */
typedef struct WdroProblem WdroProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wdro_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into the library on the same thread.
 */
const char *wdro_last_error_message(void);

/**
 * Parses an experiment configuration (TOML text).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WdroStatus wdro_problem_from_toml(const char *toml, struct WdroProblem **out);

/**
 * # Safety
 * `p` must be NULL or a handle from [`wdro_problem_from_toml`] not yet freed.
 */
void wdro_problem_free(struct WdroProblem *p);

/**
 * Dimensions of the decision and of a sample.
 *
 * # Safety
 * `p` must be a live problem handle; the output pointers may be NULL.
 */
enum WdroStatus wdro_problem_dims(const struct WdroProblem *p,
                                  size_t *decision_dim,
                                  size_t *sample_dim);

/**
 * Worst-case expectation at decision `x` (length `n`) over the ball around
 * the `t` samples stored row-major in `samples`.
 *
 * Writes the value to `value` and, if `dist` is not NULL, the maximizing
 * distribution.
 *
 * # Safety
 * Array pointers must be valid for the given lengths; `value` must be valid.
 */
enum WdroStatus wdro_oracle(const struct WdroProblem *p,
                            const double *x,
                            size_t n,
                            const double *samples,
                            size_t t,
                            double *value,
                            struct WdroDistribution **dist);

/**
 * Number of atoms, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live distribution handle.
 */
size_t wdro_distribution_len(const struct WdroDistribution *d);

/**
 * Atom dimension, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live distribution handle.
 */
size_t wdro_distribution_dim(const struct WdroDistribution *d);

/**
 * Copies atoms (row-major, `len·dim` values) and weights (`len` values).
 * Either output may be NULL.
 *
 * # Safety
 * Non-NULL outputs must have room for the counts above.
 */
enum WdroStatus wdro_distribution_copy(const struct WdroDistribution *d,
                                       double *atoms,
                                       double *weights);

/**
 * # Safety
 * `d` must be NULL or a distribution handle not yet freed.
 */
void wdro_distribution_free(struct WdroDistribution *d);

/**
 * Starts a learner at the configured `x1` or the center of the decision set.
 *
 * # Safety
 * `p` must be a live problem handle and `out` a valid pointer.
 */
enum WdroStatus wdro_learner_new(const struct WdroProblem *p, struct WdroLearner **out);

/**
 * Plays one round against the sample `xi` (length `m`). `loss_value`, if not
 * NULL, receives the expected loss of the played decision under the round's
 * worst case.
 *
 * # Safety
 * `l` must be a live learner handle and `xi` valid for `m` values.
 */
enum WdroStatus wdro_learner_step(struct WdroLearner *l,
                                  const double *xi,
                                  size_t m,
                                  double *loss_value);

/**
 * Copies the next decision into `out` (length `n`).
 *
 * # Safety
 * `l` must be a live learner handle and `out` valid for `n` values.
 */
enum WdroStatus wdro_learner_decision(const struct WdroLearner *l, double *out, size_t n);

/**
 * Copies the average of the decisions played so far into `out`.
 *
 * # Safety
 * `l` must be a live learner handle and `out` valid for `n` values.
 */
enum WdroStatus wdro_learner_average(const struct WdroLearner *l, double *out, size_t n);

/**
 * Rounds played, or 0 for NULL.
 *
 * # Safety
 * `l` must be NULL or a live learner handle.
 */
size_t wdro_learner_rounds(const struct WdroLearner *l);

/**
 * # Safety
 * `l` must be NULL or a learner handle not yet freed.
 */
void wdro_learner_free(struct WdroLearner *l);

/**
 * 1-Wasserstein distance between two weighted point sets of dimension `dim`.
 * NULL weights mean uniform.
 *
 * # Safety
 * Atom arrays must hold `count·dim` values, weight arrays `count` values.
 */
enum WdroStatus wdro_w1(size_t dim,
                        const double *atoms_a,
                        const double *weights_a,
                        size_t count_a,
                        const double *atoms_b,
                        const double *weights_b,
                        size_t count_b,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WDRO_H */
