#ifndef BAHADUR_H
#define BAHADUR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum BahadurStatus {
  BAHADUR_STATUS_OK = 0,
  BAHADUR_STATUS_NULL_POINTER = 1,
  BAHADUR_STATUS_INVALID_ARGUMENT = 2,
  BAHADUR_STATUS_OUT_OF_RANGE = 3,
  BAHADUR_STATUS_WRONG_REGIME = 4,
  BAHADUR_STATUS_COMPUTATION = 5,
  BAHADUR_STATUS_BUFFER_TOO_SMALL = 6,
  BAHADUR_STATUS_PANIC = 7,
} BahadurStatus;

typedef enum BahadurRegime {
  BAHADUR_REGIME_SRD = 0,
  BAHADUR_REGIME_BOUNDARY = 1,
  BAHADUR_REGIME_LRD = 2,
} BahadurRegime;

// A bundled functional `g`.
typedef struct BahadurFunctional BahadurFunctional;

// A correlation model of the Gaussian sequence.
typedef struct BahadurModel BahadurModel;

// A finished Bahadur remainder study.
typedef struct BahadurStudy BahadurStudy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` and returns the
// size it needs (including the NUL); an empty string means no error.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t bahadur_last_error(char *buf, size_t len);

// Creates a functional by name: `identity`, `abs`, `square` or `cube`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum BahadurStatus bahadur_functional_new(const char *name, struct BahadurFunctional **out);

// # Safety
// `f` must be null or a handle from [`bahadur_functional_new`], freed once.
void bahadur_functional_free(struct BahadurFunctional *f);

// `g(t)`.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum BahadurStatus bahadur_functional_eval(const struct BahadurFunctional *f,
                                           double t,
                                           double *out);

// Quantile of `g(Y)` at probability `p`.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum BahadurStatus bahadur_functional_quantile(const struct BahadurFunctional *f,
                                               double p,
                                               double *out);

// CDF of `g(Y)` at `u`.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum BahadurStatus bahadur_functional_cdf(const struct BahadurFunctional *f, double u, double *out);

// Density of `g(Y)` at `u`.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum BahadurStatus bahadur_functional_pdf(const struct BahadurFunctional *f, double u, double *out);

// Hermite coefficients `c_0..=c_J` of the indicator of `{g(Y) <= u}`.
// `buf` must hold `max_order + 1` values; `rank` receives the Hermite rank.
//
// # Safety
// `f` must be a live handle; `buf` valid for `len` doubles; `rank` writable.
enum BahadurStatus bahadur_coefficients(const struct BahadurFunctional *f,
                                        double u,
                                        size_t max_order,
                                        double zero_tol,
                                        double *buf,
                                        size_t len,
                                        size_t *rank);

// Parses a model such as `powerlaw:alpha=0.3`, `fgn:H=0.85`, `iid`, `ar:phi=0.5`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` must be writable.
enum BahadurStatus bahadur_model_parse(const char *spec, struct BahadurModel **out);

// # Safety
// `m` must be null or a handle from [`bahadur_model_parse`], freed once.
void bahadur_model_free(struct BahadurModel *m);

// Correlation at `lag`.
//
// # Safety
// `m` must be a live handle; `out` must be writable.
enum BahadurStatus bahadur_model_rho(const struct BahadurModel *m, int64_t lag, double *out);

// Draws an exact path of length `n` into `buf`, deterministic in `seed`.
//
// # Safety
// `m` must be a live handle; `buf` must be valid for `n` doubles.
enum BahadurStatus bahadur_model_sample(const struct BahadurModel *m,
                                        size_t n,
                                        uint64_t seed,
                                        double *buf);

// The rate `r_n` for `(alpha, tau_bar)`; pass `INFINITY` for short memory.
//
// # Safety
// `value` and `regime` must be writable.
enum BahadurStatus bahadur_rate(double alpha,
                                size_t tau_bar,
                                uint64_t n,
                                double *value,
                                enum BahadurRegime *regime);

// `K(tau, alpha)`.
//
// # Safety
// `out` must be writable.
enum BahadurStatus bahadur_k_const(size_t tau, double alpha, double *out);

// SRD limit variance of the `p`-quantile of `g(Y)`, with its truncation bound.
//
// # Safety
// Handles must be live; `value` and `tail_bound` must be writable.
enum BahadurStatus bahadur_sigma2(const struct BahadurFunctional *f,
                                  double p,
                                  const struct BahadurModel *m,
                                  size_t max_order,
                                  size_t lag_cap,
                                  double *value,
                                  double *tail_bound);

// The `ceil(n p)`-th order statistic of `data`.
//
// # Safety
// `data` must be valid for `n` doubles; `out` must be writable.
enum BahadurStatus bahadur_sample_quantile(const double *data, size_t n, double p, double *out);

// Runs a study from a JSON config (a bare config or a previous summary).
// `threads = 0` uses every core; results do not depend on it.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
enum BahadurStatus bahadur_study_run(const char *config_json,
                                     size_t threads,
                                     struct BahadurStudy **out);

// Summary JSON of a study. Call with a null `buf` to learn the size.
//
// # Safety
// `s` must be a live handle; `buf` null or valid for `len` bytes.
enum BahadurStatus bahadur_study_summary_json(const struct BahadurStudy *s,
                                              char *buf,
                                              size_t len,
                                              size_t *needed);

// Per-replicate CSV of a study. Call with a null `buf` to learn the size.
//
// # Safety
// `s` must be a live handle; `buf` null or valid for `len` bytes.
enum BahadurStatus bahadur_study_csv(const struct BahadurStudy *s,
                                     char *buf,
                                     size_t len,
                                     size_t *needed);

// # Safety
// `s` must be null or a handle from [`bahadur_study_run`], freed once.
void bahadur_study_free(struct BahadurStudy *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BAHADUR_H */
