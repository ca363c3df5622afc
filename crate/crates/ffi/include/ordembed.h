#ifndef ORDEMBED_H
#define ORDEMBED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OeStatus {
  OE_STATUS_OK = 0,
  OE_STATUS_NULL_POINTER = 1,
  OE_STATUS_INVALID_ARGUMENT = 2,
  OE_STATUS_DIMENSION_MISMATCH = 3,
  OE_STATUS_NOT_ISOTONIC = 4,
  OE_STATUS_DEGENERATE = 5,
  OE_STATUS_SOLVER_FAILED = 6,
  OE_STATUS_BUFFER_TOO_SMALL = 7,
  OE_STATUS_PANIC = 8,
  OE_STATUS_INTERNAL = 9,
} OeStatus;

/*
 A set of points in R^d.
 */
typedef struct OePoints OePoints;

/*
 Solver settings, initialized to the library defaults.
 */
typedef struct OeSolverParams OeSolverParams;

/*
 All triplet signs of a configuration.
 */
typedef struct OeTable OeTable;

typedef struct OeSolveInfo {
  size_t satisfied;
  size_t constraints;
  size_t epochs_used;
  double final_loss;
  /*
   1 when every strict sign holds in the output.
   */
  int32_t success;
} OeSolveInfo;

typedef struct OeChebFit {
  double a;
  double b;
  double residual;
} OeChebFit;

typedef struct OeDisplacement {
  double d_inf;
  double d_1;
  double d_2;
} OeDisplacement;

typedef struct OeBoundCheck {
  double achieved;
  double bound;
  double alpha;
  /*
   1 when `achieved <= bound`.
   */
  int32_t ok;
} OeBoundCheck;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Length in bytes of the last error message including the terminating NUL,
 or 0 when the last call on this thread succeeded.
 */
size_t oe_last_error_length(void);

/*
 Copies the last error message into `buf` (NUL-terminated, truncated to
 `len`). Returns the number of bytes the full message needs including the NUL.
 */
size_t oe_last_error_message(char *buf, size_t len);

/*
 Static NUL-terminated version string.
 */
const char *oe_version(void);

/*
 Creates `n` points of dimension `dim` from row-major `coords` (length `n * dim`).
 */
enum OeStatus oe_points_new(const double *coords, size_t n, size_t dim, struct OePoints **out);

void oe_points_free(struct OePoints *p);

/*
 Number of points, or 0 for a null handle.
 */
size_t oe_points_len(const struct OePoints *p);

/*
 Dimension, or 0 for a null handle.
 */
size_t oe_points_dim(const struct OePoints *p);

/*
 Copies the row-major coordinates into `buf`, which must hold `n * dim` values.
 */
enum OeStatus oe_points_coords(const struct OePoints *p, double *buf, size_t cap);

/*
 Records every triplet sign of `points`; differences within `tie_tolerance` are ties.
 */
enum OeStatus oe_table_build(const struct OePoints *points,
                             double tie_tolerance,
                             struct OeTable **out);

void oe_table_free(struct OeTable *t);

/*
 Number of stored triples, or 0 for a null handle.
 */
size_t oe_table_len(const struct OeTable *t);

/*
 Sign of `|x_j - x_i| - |x_k - x_i|` as -1, 0 or 1. Requires distinct indices
 below n; `j` and `k` may come in either order.
 */
enum OeStatus oe_table_sign(const struct OeTable *t, size_t i, size_t j, size_t k, int32_t *out);

/*
 Solver parameters with library defaults for dimension `dim`; null when `dim` is 0.
 */
struct OeSolverParams *oe_solver_params_new(size_t dim);

void oe_solver_params_free(struct OeSolverParams *p);

enum OeStatus oe_solver_params_set_learning_rate(struct OeSolverParams *p, double value);

/*
 Multiplicative step decay per epoch, in (0, 1].
 */
enum OeStatus oe_solver_params_set_lr_decay(struct OeSolverParams *p, double value);

enum OeStatus oe_solver_params_set_max_epochs(struct OeSolverParams *p, size_t value);

enum OeStatus oe_solver_params_set_seed(struct OeSolverParams *p, uint64_t value);

/*
 Per-epoch dilation factor, at least 1.
 */
enum OeStatus oe_solver_params_set_expansion(struct OeSolverParams *p, double value);

/*
 Batch size; 0 restores the default.
 */
enum OeStatus oe_solver_params_set_batch_size(struct OeSolverParams *p, size_t value);

/*
 One solver run on `table`. `out` receives the embedding even when not every
 sign is satisfied; check `info.success`. `info` may be null.
 */
enum OeStatus oe_solve(const struct OeTable *table,
                       const struct OeSolverParams *params,
                       struct OePoints **out,
                       struct OeSolveInfo *info);

/*
 Exact minimax fit `x ≈ a y + b` of two 1-D configurations.
 */
enum OeStatus oe_cheb_fit(const struct OePoints *x,
                          const struct OePoints *y,
                          struct OeChebFit *out);

/*
 Least-squares similarity alignment of `y` onto `x`. `aligned` may be null;
 otherwise it receives the transformed `y`.
 */
enum OeStatus oe_procrustes(const struct OePoints *x,
                            const struct OePoints *y,
                            struct OeDisplacement *out,
                            struct OePoints **aligned);

/*
 Checks the 1-D error bound for a weakly isotonic pair; `x` must contain 0 and 1.
 */
enum OeStatus oe_verify_interval_bound(const struct OePoints *x,
                                       const struct OePoints *y,
                                       struct OeBoundCheck *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORDEMBED_H */
