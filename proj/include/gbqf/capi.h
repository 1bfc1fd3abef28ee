#ifndef GBQF_CAPI_H
#define GBQF_CAPI_H

/* C interface to the graphon quantum filtering library.  All entry points
   are exception-free; failures surface as status codes plus a message on
   the result handle. */

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; values 1..10 mirror the library error categories. */
enum {
  GBQF_OK = 0,
  GBQF_ERR_DIMENSION = 1,
  GBQF_ERR_INVALID_ARGUMENT = 2,
  GBQF_ERR_MEMORY_CAP = 3,
  GBQF_ERR_PROJECTION = 4,
  GBQF_ERR_NORMALIZATION = 5,
  GBQF_ERR_NONFINITE = 6,
  GBQF_ERR_GUARD = 7,
  GBQF_ERR_INVARIANT = 8,
  GBQF_ERR_CONFIG = 9,
  GBQF_ERR_IO = 10,
  GBQF_ERR_UNKNOWN = 100
};

typedef struct gbqf_result gbqf_result;

const char* gbqf_version(void);
const char* gbqf_status_name(int status);

/* Known experiment names; the returned array lives for the process. */
const char* const* gbqf_experiment_names(int* count);

/* Runs one named experiment into out_dir.  config_json may be NULL or "{}"
   for the experiment's defaults.  On return *out_result (when out_result is
   non-NULL) holds the run report and must be released with
   gbqf_result_free; it is produced for every status except an immediate
   GBQF_ERR_INVALID_ARGUMENT on NULL name/out_dir.  The status is GBQF_OK
   even when in-run invariant checks fail; inspect gbqf_result_ok. */
int gbqf_run_experiment(const char* name, const char* config_json,
                        const char* out_dir, gbqf_result** out_result);

/* Fast oracle battery; writes no files. */
int gbqf_selftest(gbqf_result** out_result);

int gbqf_result_ok(const gbqf_result* r); /* 1 = all checks passed */
const char* gbqf_result_summary(const gbqf_result* r);
const char* gbqf_result_error(const gbqf_result* r); /* "" when none */
int gbqf_result_check_count(const gbqf_result* r);
const char* gbqf_result_check_name(const gbqf_result* r, int i);
int gbqf_result_check_pass(const gbqf_result* r, int i);
void gbqf_result_free(gbqf_result* r);

#ifdef __cplusplus
}
#endif

#endif /* GBQF_CAPI_H */
