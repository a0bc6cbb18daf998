#ifndef WAVETORUS_H
#define WAVETORUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WtStatus {
  WT_STATUS_OK = 0,
  WT_STATUS_NULL_POINTER = 1,
  WT_STATUS_INVALID_ARGUMENT = 2,
  WT_STATUS_INVALID_FIELD = 3,
  WT_STATUS_REJECTED = 4,
  WT_STATUS_NO_CONVERGENCE = 5,
  WT_STATUS_SINGULAR_JACOBIAN = 6,
  WT_STATUS_RESONANT_MASS = 7,
  WT_STATUS_CONFIG = 8,
  WT_STATUS_IO = 9,
  WT_STATUS_PANIC = 10,
  WT_STATUS_OTHER = 11,
} WtStatus;

typedef enum WtSubspace {
  WT_SUBSPACE_ALL = 0,
  WT_SUBSPACE_KERNEL = 1,
  WT_SUBSPACE_EPLUS = 2,
  WT_SUBSPACE_EMINUS = 3,
  WT_SUBSPACE_EPERP = 4,
} WtSubspace;

// Norm selector (as `int`) for [`wt_field_norm`]; `param` is the exponent where one applies.
typedef enum WtNorm {
  // Energy norm; no parameter.
  WT_NORM_E = 0,
  // `E^s` with `s = param`; the field must lie in `E⊥`.
  WT_NORM_ES = 1,
  // `L^p` over `Q`, `p = param`.
  WT_NORM_LP = 2,
  // `L^p` w.r.t. the normalized measure.
  WT_NORM_LP_NORMALIZED = 3,
  // Coefficient `ℓ^q`, `q = param`.
  WT_NORM_LQ = 4,
  // Grid maximum.
  WT_NORM_C0 = 5,
  // Dyadic Hölder proxy with `γ = param`.
  WT_NORM_HOLDER = 6,
  // `H^s` with anisotropic weights.
  WT_NORM_SOBOLEV_ANISO = 7,
  // `H^s` with `(2|j|+|k|)²` weights.
  WT_NORM_SOBOLEV_ELL1 = 8,
} WtNorm;

typedef enum WtPreset {
  WT_PRESET_DEFAULT_CUBIC = 0,
  WT_PRESET_MILD_CUBIC = 1,
} WtPreset;

typedef struct WtField WtField;

typedef struct WtProblem WtProblem;

typedef struct WtSolution WtSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Owned by the library.
const char *wt_last_error(void);

// Library version as a static string.
const char *wt_version(void);

// # Safety
// `s` must be null or a string returned by this library.
void wt_string_free(char *s);

// # Safety
// `out` must be a valid pointer.
enum WtStatus wt_field_zeros(size_t m, struct WtField **out);

// Random real field with `|û| = e^{−decay(2|j|+|k|)}` on `subspace`
// (a [`WtSubspace`] value).
//
// # Safety
// `out` must be a valid pointer.
enum WtStatus wt_field_random(uint64_t seed,
                              size_t m,
                              int subspace,
                              double decay,
                              struct WtField **out);

// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum WtStatus wt_field_from_json(const char *json, struct WtField **out);

// # Safety
// `field` must be a live handle; `out` receives a string for [`wt_string_free`].
enum WtStatus wt_field_to_json(const struct WtField *field, char **out);

// # Safety
// `field` must be null or a live handle.
void wt_field_free(struct WtField *field);

// Truncation `M`, or 0 for a null handle.
//
// # Safety
// `field` must be null or a live handle.
size_t wt_field_truncation(const struct WtField *field);

// Coefficient of mode `(j, k)`; zero outside the lattice.
//
// # Safety
// `field` must be a live handle; `re` and `im` valid pointers.
enum WtStatus wt_field_get(const struct WtField *field, int j, int k, double *re, double *im);

// Sets `(j, k)` and its conjugate partner so the field stays real.
//
// # Safety
// `field` must be a live handle.
enum WtStatus wt_field_set_pair(struct WtField *field, int j, int k, double re, double im);

// # Safety
// `field` must be a live handle and `out` a valid pointer.
enum WtStatus wt_field_norm(const struct WtField *field, int norm, double param, double *out);

// `w = □⁻¹f` on `E⊥`; fails with `ResonantMass` when `f` has kernel content.
//
// # Safety
// `f` must be a live handle and `out` a valid pointer.
enum WtStatus wt_solve_box(const struct WtField *f, struct WtField **out);

// `sigma` is 1 or −1; `preset` a [`WtPreset`] value.
//
// # Safety
// `out` must be a valid pointer.
enum WtStatus wt_problem_new(size_t m, double beta, int sigma, int preset, struct WtProblem **out);

// Builds a problem from a JSON nonlinearity description
// (`{"s":…, "a":[…], "m":{…}, "b":[…]}`).
//
// # Safety
// `spec_json` must be a nul-terminated string and `out` a valid pointer.
enum WtStatus wt_problem_new_with_spec(size_t m,
                                       double beta,
                                       int sigma,
                                       const char *spec_json,
                                       struct WtProblem **out);

// # Safety
// `problem` must be null or a live handle.
void wt_problem_free(struct WtProblem *problem);

// Sets the forcing so that `target` is an exact solution.
//
// # Safety
// Both handles must be live.
enum WtStatus wt_problem_manufacture(struct WtProblem *problem, const struct WtField *target);

// # Safety
// Handles must be live and `out` valid.
enum WtStatus wt_problem_functional(const struct WtProblem *problem,
                                    const struct WtField *u,
                                    double *out);

// # Safety
// Handles must be live and `out` valid.
enum WtStatus wt_problem_residual_norm(const struct WtProblem *problem,
                                       const struct WtField *u,
                                       double *out);

// Newton from `seed` (null for zero). On `NoConvergence` the best iterate
// is still returned through `out`.
//
// # Safety
// `problem` must be live, `seed` null or live, `out` valid.
enum WtStatus wt_newton_solve(const struct WtProblem *problem,
                              const struct WtField *seed,
                              double tol,
                              size_t max_iter,
                              struct WtSolution **out);

// # Safety
// `solution` must be null or a live handle.
void wt_solution_free(struct WtSolution *solution);

// Copies the solution field into a new handle.
//
// # Safety
// `solution` must be live and `out` valid.
enum WtStatus wt_solution_field(const struct WtSolution *solution, struct WtField **out);

// # Safety
// `solution` must be live; any out pointer may be null to skip it.
enum WtStatus wt_solution_stats(const struct WtSolution *solution,
                                double *residual_norm,
                                double *i_value,
                                size_t *newton_iters);

// Runs a TOML run configuration as the command-line tool would, writing
// artifacts into `out_dir`. `exit_code` receives the tool's exit status;
// the call itself fails only for unusable arguments or a configuration error.
//
// # Safety
// Strings must be nul-terminated and `exit_code` valid.
enum WtStatus wt_run_config(const char *config_toml, const char *out_dir, int *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVETORUS_H */
