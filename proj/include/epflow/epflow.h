#ifndef EPFLOW_EPFLOW_H
#define EPFLOW_EPFLOW_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EPF_API __declspec(dllexport)
#else
#define EPF_API __attribute__((visibility("default")))
#endif

/* Status codes. Every function returning epf_status records a message for epf_last_error(). */
typedef enum epf_status {
    EPF_OK = 0,
    EPF_ERR_DOMAIN = 1,
    EPF_ERR_INTEGRATION = 2,
    EPF_ERR_NON_CONTRACTION = 3,
    EPF_ERR_HORIZON = 4,
    EPF_ERR_DEGENERATE_MAP = 5,
    EPF_ERR_VACUUM = 6,
    EPF_ERR_APRIORI = 7,
    EPF_ERR_CONFIG = 8,
    EPF_ERR_IO = 9,
    EPF_ERR_RANGE = 10,
    EPF_ERR_ARGUMENT = 20,
    EPF_ERR_INTERNAL = 21
} epf_status;

/* Opaque affine trajectory (dense output of the matrix ODE). */
typedef struct epf_trajectory epf_trajectory;

EPF_API const char* epf_version(void);

/* Message of the last failure on the calling thread ("" when none). */
EPF_API const char* epf_last_error(void);

/* Frees strings returned through char** out-parameters. */
EPF_API void epf_free_string(char* s);

/* Integrates Addot = delta (det A)^(1-gamma) A^(-T) on [0, t_end]. Matrices are row major. */
EPF_API epf_status epf_affine_integrate(double gamma, double delta, const double A0[9], const double A1[9],
                                        double t_end, double rtol, double atol, epf_trajectory** out);
EPF_API void epf_trajectory_destroy(epf_trajectory* traj);
EPF_API epf_status epf_trajectory_t_end(const epf_trajectory* traj, double* t_end);
EPF_API epf_status epf_trajectory_state(const epf_trajectory* traj, double t, double A[9], double Adot[9]);
EPF_API epf_status epf_trajectory_energy(const epf_trajectory* traj, double t, double* energy);
/* mu = (det A)^(1/3), tau(t) and det Lambda at time t. */
EPF_API epf_status epf_trajectory_frame(const epf_trajectory* traj, double t, double* mu, double* tau,
                                        double* det_lambda);

/* Runs the scenario in a config file. out_dir and threads override the file when non-NULL / positive.
 * Returns the process exit status: 0 success, 2 config error, 3 numerical abort, 4 acceptance failure.
 * When run_dir is non-NULL it receives the output directory (free with epf_free_string). */
EPF_API int epf_run_scenario(const char* config_path, const char* out_dir, int threads, char** run_dir);

/* Markdown summary of a finished run directory; also written to <run_dir>/report.md. */
EPF_API epf_status epf_emit_report(const char* run_dir, char** markdown);

#ifdef __cplusplus
}
#endif

#endif
