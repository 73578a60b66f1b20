#ifndef DIVLAM_H
#define DIVLAM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum DivlamStatus {
  DIVLAM_STATUS_OK = 0,
  DIVLAM_STATUS_NULL_POINTER = 1,
  // Invalid input: domain, shape, precondition or format errors.
  DIVLAM_STATUS_INVALID = 2,
  // Resource limit such as the raster memory cap.
  DIVLAM_STATUS_RESOURCE = 3,
  DIVLAM_STATUS_IO = 4,
  // Caller-provided buffer is too small.
  DIVLAM_STATUS_BUFFER_TOO_SMALL = 5,
  DIVLAM_STATUS_PANIC = 6,
} DivlamStatus;

// A rasterized matrix field on a periodic grid.
typedef struct DivlamField DivlamField;

// A three-matrix set with its lamination chain.
typedef struct DivlamInstance DivlamInstance;

// Outcome of a discrete enumeration.
typedef struct DivlamSearch DivlamSearch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success. The pointer
// stays valid until the next call on this thread.
const char *divlam_last_error(void);

// Library version as a static NUL-terminated string.
const char *divlam_version(void);

// Frees a string returned by this library.
void divlam_string_free(char *s);

// Builds the instance for fractions `q[3]`. `g`, `m` and `n` are row-major 3x3
// matrices; null selects identity, zero and identity respectively.
enum DivlamStatus divlam_instance_new(const double *q,
                                      const double *g,
                                      const double *m,
                                      const double *n,
                                      struct DivlamInstance **out);

void divlam_instance_free(struct DivlamInstance *inst);

// Copies `A_index` (`which = 0`) or `S_index` (`which = 1`), zero-based, into `out[9]`
// row-major.
enum DivlamStatus divlam_instance_matrix(const struct DivlamInstance *inst,
                                         uint32_t which,
                                         uint32_t index,
                                         double *out);

// Copies the unit normal of pair `index` into `out[3]`.
enum DivlamStatus divlam_instance_normal(const struct DivlamInstance *inst,
                                         uint32_t index,
                                         double *out);

// Checks the closure conditions at `tol`.
enum DivlamStatus divlam_instance_verify(const struct DivlamInstance *inst,
                                         double tol,
                                         bool *pass,
                                         double *max_residual);

// JSON rendering of the instance; free with [`divlam_string_free`].
enum DivlamStatus divlam_instance_to_json(const struct DivlamInstance *inst, char **out);

// Rasterizes the multi-scale laminate of `inst` on a `dims[3]` grid.
enum DivlamStatus divlam_laminate(const struct DivlamInstance *inst,
                                  uint32_t depth,
                                  uint32_t ratio,
                                  double base_period,
                                  const uintptr_t *dims,
                                  struct DivlamField **out);

// Wraps a copy of `data` (`cells * m * n` values, odometer order, row-major matrices)
// as a field on a grid of `ndims` extents.
enum DivlamStatus divlam_field_from_data(const uintptr_t *dims,
                                         uintptr_t ndims,
                                         uintptr_t m,
                                         uintptr_t n,
                                         const double *data,
                                         struct DivlamField **out);

enum DivlamStatus divlam_field_load(const char *path, struct DivlamField **out);

enum DivlamStatus divlam_field_save(const struct DivlamField *field, const char *path);

void divlam_field_free(struct DivlamField *field);

// Number of stored values (`cells * m * n`).
enum DivlamStatus divlam_field_len(const struct DivlamField *field, uintptr_t *len);

// Copies the field values into `buf[cap]`.
enum DivlamStatus divlam_field_copy(const struct DivlamField *field, double *buf, uintptr_t cap);

// Homogeneous H^-1 norm of the spectral divergence.
enum DivlamStatus divlam_field_hminus1_div(const struct DivlamField *field, double *out);

// Leray projection; `gap` (optional) receives the L2 distance moved.
enum DivlamStatus divlam_field_project(const struct DivlamField *field,
                                       struct DivlamField **out,
                                       double *gap);

// Enumerates fields with values in `K` (`count` matrices of shape `m x n`, stored
// consecutively row-major) on a periodic grid with `n` extents `dims`.
enum DivlamStatus divlam_search(const double *k,
                                uintptr_t count,
                                uintptr_t m,
                                uintptr_t n,
                                const uintptr_t *dims,
                                uint64_t max_nodes,
                                struct DivlamSearch **out);

// Solution count and whether the search space was fully explored.
enum DivlamStatus divlam_search_summary(const struct DivlamSearch *search,
                                        uintptr_t *count,
                                        bool *exhausted);

// Copies solution `index` (one index into `K` per cell) into `buf[cap]`.
enum DivlamStatus divlam_search_witness(const struct DivlamSearch *search,
                                        uintptr_t index,
                                        uintptr_t *buf,
                                        uintptr_t cap);

void divlam_search_free(struct DivlamSearch *search);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIVLAM_H */
