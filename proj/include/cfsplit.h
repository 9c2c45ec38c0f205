/* C API for the cfsplit solver library.
 *
 * Opaque handles + status codes; cfs_last_error() returns a thread-local
 * message for the most recent failure.  All functions are safe to call from
 * multiple threads as long as each handle is used by one thread at a time.
 */
#ifndef CFSPLIT_H_
#define CFSPLIT_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cfs_status {
  CFS_OK = 0,
  CFS_ERR_INVALID = 1, /* bad argument / configuration */
  CFS_ERR_RUNTIME = 2, /* I/O or numerical failure */
} cfs_status;

/* experiment: a flat key = value configuration, run on demand */
typedef struct cfs_experiment cfs_experiment;

cfs_experiment* cfs_experiment_new(void);
void cfs_experiment_free(cfs_experiment* e);

/* set one configuration key (same namespace as config files) */
cfs_status cfs_experiment_set(cfs_experiment* e, const char* key,
                              const char* value);
/* merge keys from a `key = value` config file */
cfs_status cfs_experiment_load_config(cfs_experiment* e, const char* path);

typedef struct cfs_summary {
  int exit_code; /* 0 tolerance met, 2 budget exhausted */
  int converged;
  double final_residual;
  double final_objective; /* NaN when the problem reports none */
  uint64_t epochs;
  uint64_t ops;
} cfs_summary;

/* run the configured experiment; writes the CSV trace to the `out` key's
 * path when set */
cfs_status cfs_experiment_run(cfs_experiment* e, cfs_summary* out);

/* trace of the most recent run as CSV text (owned by the handle) */
const char* cfs_experiment_trace(const cfs_experiment* e);

/* solution vector of the most recent run */
cfs_status cfs_experiment_solution(const cfs_experiment* e, const double** data,
                                   size_t* len);

/* dataset / fixture generation: kind in {least-squares, logistic, tv-image,
 * portfolio, nmf}; writes LIBSVM, PGM or CSV depending on the kind */
cfs_status cfs_gen(const char* kind, uint64_t rows, uint64_t cols, uint64_t seed,
                   const char* out_path);

/* compiled-in invariant suite; returns the number of failed checks and
 * appends one line per check (verbose) or per failure to the report */
int cfs_verify(uint64_t seed, int verbose, const char** report);

const char* cfs_last_error(void);
const char* cfs_version(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CFSPLIT_H_ */
