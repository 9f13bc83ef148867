#ifndef SNOMIAL_H
#define SNOMIAL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum SnStatus {
  SN_STATUS_OK = 0,
  // A required pointer argument was null.
  SN_STATUS_NULL_POINTER = 1,
  // Dimensions, tolerances or problem structure are unusable.
  SN_STATUS_INVALID_ARGUMENT = 2,
  // Text was not valid UTF-8 or JSON of the expected shape.
  SN_STATUS_PARSE = 3,
  // The solver produced no usable point; output structs are still filled.
  SN_STATUS_NO_SOLUTION = 4,
  // A certificate failed verification; the report is still filled.
  SN_STATUS_REJECTED = 5,
  // Internal failure, including caught panics.
  SN_STATUS_INTERNAL = 6,
} SnStatus;

// Termination state of the conic solver.
typedef enum SnSolveStatus {
  SN_SOLVE_STATUS_OPTIMAL = 0,
  SN_SOLVE_STATUS_INFEASIBLE = 1,
  SN_SOLVE_STATUS_UNBOUNDED = 2,
  SN_SOLVE_STATUS_INACCURATE = 3,
  SN_SOLVE_STATUS_FAILED = 4,
} SnSolveStatus;

// Opaque positivity certificate.
typedef struct SnCertificate SnCertificate;

// Opaque sparse polynomial.
typedef struct SnPolynomial SnPolynomial;

// Relaxation and solver settings. Obtain defaults from [`sn_options_default`].
typedef struct SnOptions {
  // Pólya order (Putinar order for the Putinar entry point).
  uint32_t k;
  // Nomial width; 0 selects unrestricted blocks.
  size_t s;
  double feas_tol;
  double gap_tol;
  size_t max_iter;
  // Wall-clock limit in seconds; nonpositive means none.
  double time_limit_s;
} SnOptions;

// Verification summary of a certificate.
typedef struct SnVerifyReport {
  double residual;
  double identity_residual;
  double gram_residual;
  double psd_margin;
  double tol;
  bool accepted;
} SnVerifyReport;

// Outcome of a bound computation.
typedef struct SnBound {
  // Upper bound on the positive maximal singular value; `+inf` without a solution.
  double bound;
  // Relaxation value on `Q = M'M`, the square of `bound`.
  double rho;
  enum SnSolveStatus status;
  // Whether an independently verified certificate backs the bound.
  bool certified;
  size_t nmat;
  size_t msize;
  size_t nscal;
  size_t naff;
  size_t iterations;
  double time_s;
} SnBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sn_version(void);

// Message of the last failed call on this thread, or null.
//
// The pointer stays valid until the next call into the library on the same
// thread.
const char *sn_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void sn_string_free(char *s);

// Default settings: order 0, unrestricted blocks, tolerances `1e-8`.
struct SnOptions sn_options_default(void);

// Parses `{"n": .., "terms": [{"exps": [..], "coef": ..}, ..]}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SnStatus sn_polynomial_from_json(const char *json, struct SnPolynomial **out);

// Canonical JSON of `p`; release with [`sn_string_free`].
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum SnStatus sn_polynomial_to_json(const struct SnPolynomial *p, char **out);

// # Safety
// `p` must be a live handle; `out` must be writable.
enum SnStatus sn_polynomial_nvars(const struct SnPolynomial *p, size_t *out);

// Evaluates `p` at `x[0..len]`; `len` must equal the variable count.
//
// # Safety
// `x` must point to `len` doubles; `out` must be writable.
enum SnStatus sn_polynomial_eval(const struct SnPolynomial *p,
                                 const double *x,
                                 size_t len,
                                 double *out);

// Releases a polynomial. Null is ignored.
//
// # Safety
// `p` must come from this library and not have been freed.
void sn_polynomial_free(struct SnPolynomial *p);

// Parses a certificate document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SnStatus sn_certificate_from_json(const char *json, struct SnCertificate **out);

// Certificate document; release with [`sn_string_free`].
//
// # Safety
// `c` must be a live handle; `out` must be writable.
enum SnStatus sn_certificate_to_json(const struct SnCertificate *c, char **out);

// The certified level `lambda`.
//
// # Safety
// `c` must be a live handle; `out` must be writable.
enum SnStatus sn_certificate_lambda(const struct SnCertificate *c, double *out);

// Recomputes the certificate identity from its stored data.
//
// `tol <= 0` selects the default relative tolerance. Returns
// [`SnStatus::Rejected`] with `out` filled when the check fails.
//
// # Safety
// `c` must be a live handle; `out` must be writable.
enum SnStatus sn_certificate_verify(const struct SnCertificate *c,
                                    double tol,
                                    struct SnVerifyReport *out);

// Releases a certificate. Null is ignored.
//
// # Safety
// `c` must come from this library and not have been freed.
void sn_certificate_free(struct SnCertificate *c);

// Pólya-hierarchy upper bound on the positive maximal singular value of the
// row-major `rows x cols` matrix `data`.
//
// `opts` may be null for defaults. When `cert_out` is non-null it receives
// the certificate (for `Q / scale`) or null. Returns [`SnStatus::NoSolution`]
// with `out` filled when the relaxation yields no bound.
//
// # Safety
// `data` must point to `rows * cols` doubles; `out` must be writable.
enum SnStatus sn_pmsv_upper_bound(const double *data,
                                  size_t rows,
                                  size_t cols,
                                  const struct SnOptions *opts,
                                  struct SnBound *out,
                                  struct SnCertificate **cert_out);

// Order-`opts.k` Putinar bound on the same quantity; `opts.s` is ignored.
//
// # Safety
// As for [`sn_pmsv_upper_bound`].
enum SnStatus sn_pmsv_putinar_bound(const double *data,
                                    size_t rows,
                                    size_t cols,
                                    const struct SnOptions *opts,
                                    struct SnBound *out,
                                    struct SnCertificate **cert_out);

// Exact positive maximal singular value by support enumeration (small `cols`).
//
// # Safety
// `data` must point to `rows * cols` doubles; `out` must be writable.
enum SnStatus sn_pmsv_oracle_exact(const double *data, size_t rows, size_t cols, double *out);

// Lower estimate of the positive maximal singular value from projected
// gradient ascent with `restarts` seeded starts.
//
// # Safety
// `data` must point to `rows * cols` doubles; `out` must be writable.
enum SnStatus sn_pmsv_oracle_gradient(const double *data,
                                      size_t rows,
                                      size_t cols,
                                      size_t restarts,
                                      uint64_t seed,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNOMIAL_H */
