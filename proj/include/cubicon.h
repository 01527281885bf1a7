/*
 * cubicon -- C API for the cubical Conley-index analysis library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return CUBICON_OK on success; on failure they return an error
 * code and leave a human-readable message in cubicon_last_error(), which is
 * thread-local and valid until the next API call on the same thread.
 */

#ifndef CUBICON_H
#define CUBICON_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cubicon_status {
    CUBICON_OK = 0,
    CUBICON_ERR_INVALID_ARGUMENT = 1,
    CUBICON_ERR_CONFIG = 2,
    CUBICON_ERR_IO = 3,
    CUBICON_ERR_NOT_TRAPPING = 4,
    CUBICON_ERR_NOT_ISOLATED = 5,
    CUBICON_ERR_RUNTIME = 6,
    CUBICON_ERR_INTERNAL = 7
} cubicon_status;

const char* cubicon_status_name(cubicon_status status);
const char* cubicon_version_string(void);
/* Message for the most recent failure on this thread ("" if none). */
const char* cubicon_last_error(void);

/* ---- parametrized vector fields ---- */

typedef struct cubicon_flow cubicon_flow;

/* name: "eqn1" (planar family with the invariant circle of radius 1/lambda)
 *       or "lorenz" (lambda mapped affinely onto r in [20, 28], sigma = 10,
 *       b = 8/3). */
cubicon_status cubicon_flow_create_builtin(const char* name, cubicon_flow** out);
/* One arithmetic expression per line, variables x1..xn and lambda. */
cubicon_status cubicon_flow_create_from_file(const char* path, cubicon_flow** out);
cubicon_status cubicon_flow_create_from_text(const char* text, cubicon_flow** out);
void cubicon_flow_destroy(cubicon_flow* flow);

int cubicon_flow_dim(const cubicon_flow* flow);
cubicon_status cubicon_flow_eval(const cubicon_flow* flow, const double* x,
                                 double lambda, double* out);
/* Adaptive integration to time t_end (negative = reverse flow).  On return
 * *out_state holds the final state; *out_escaped is 1 if the iterate left
 * the escape ball (escape_radius <= 0 disables the check) and *out_escape_time
 * holds the signed escape time. */
cubicon_status cubicon_flow_integrate(const cubicon_flow* flow, double lambda,
                                      const double* x0, double t_end,
                                      double escape_radius, double tol,
                                      double* out_state, int* out_escaped,
                                      double* out_escape_time);

/* ---- run configuration ---- */

typedef struct cubicon_config cubicon_config;

cubicon_status cubicon_config_parse_file(const char* path, cubicon_config** out);
cubicon_status cubicon_config_parse_text(const char* text, cubicon_config** out);
/* key is "section.key" in the config grammar, e.g. "output.threads". */
cubicon_status cubicon_config_set(cubicon_config* config, const char* key,
                                  const char* value);
void cubicon_config_destroy(cubicon_config* config);

/* ---- analysis runs ---- */

typedef struct cubicon_result cubicon_result;

/* Single-lambda analysis (config must list exactly one lambda). */
cubicon_status cubicon_run_analyze(const cubicon_config* config, cubicon_result** out);
/* Family sweep (config must list at least two lambdas). */
cubicon_status cubicon_run_sweep(const cubicon_config* config, cubicon_result** out);
void cubicon_result_destroy(cubicon_result* result);

/* Rendered outputs.  Returned pointers remain owned by the result handle. */
const char* cubicon_result_verdict_json(const cubicon_result* result);
const char* cubicon_result_sweep_csv(const cubicon_result* result);
const char* cubicon_result_diameter_svg(const cubicon_result* result);
size_t cubicon_result_plot_count(const cubicon_result* result);
const char* cubicon_result_plot_name(const cubicon_result* result, size_t index);
const char* cubicon_result_plot_svg(const cubicon_result* result, size_t index);

/* Output options recorded in the config (directory and format switches). */
const char* cubicon_config_output_dir(const cubicon_config* config);
int cubicon_config_write_json(const cubicon_config* config);
int cubicon_config_write_csv(const cubicon_config* config);
int cubicon_config_write_svg(const cubicon_config* config);

/* ---- embedded self-test ---- */

/* Runs the embedded oracle suites.  *out_table (malloc'd; free with
 * cubicon_string_free) receives one pass/fail line per suite.  Returns
 * CUBICON_OK when every suite passes, CUBICON_ERR_RUNTIME otherwise. */
cubicon_status cubicon_selftest(char** out_table);
void cubicon_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CUBICON_H */
