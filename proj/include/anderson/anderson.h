#ifndef ANDERSON_ANDERSON_H
#define ANDERSON_ANDERSON_H

#include <stddef.h>

#if defined(ANDERSON_BUILDING_LIBRARY)
#define ANDERSON_API __attribute__((visibility("default")))
#else
#define ANDERSON_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum anderson_status {
  ANDERSON_OK = 0,
  ANDERSON_E_INVALID_ARGUMENT = 1,
  ANDERSON_E_DIMENSION_MISMATCH = 2,
  ANDERSON_E_LATTICE_MISMATCH = 3,
  ANDERSON_E_NOT_HERMITIAN = 4,
  ANDERSON_E_NOT_CONVERGED = 5,
  ANDERSON_E_ASYMMETRIC_OPERATOR = 6,
  ANDERSON_E_CONFIG = 7,
  ANDERSON_E_IO = 8,
  ANDERSON_E_INTERNAL = 99
} anderson_status;

typedef enum anderson_mollifier { ANDERSON_MOLLIFIER_GAUSSIAN = 0, ANDERSON_MOLLIFIER_SHARP = 1 } anderson_mollifier;

typedef struct anderson_config anderson_config;
typedef struct anderson_run anderson_run;
typedef struct anderson_report anderson_report;

/* Called once per emitted record, in cell order, with a JSON line. */
typedef void (*anderson_record_callback)(const char* record_json, void* user);

ANDERSON_API const char* anderson_version(void);
/* Message of the last failed call on this thread; empty when none. */
ANDERSON_API const char* anderson_last_error(void);

ANDERSON_API size_t anderson_experiment_count(void);
ANDERSON_API const char* anderson_experiment_name(size_t index);

ANDERSON_API size_t anderson_config_key_count(void);
ANDERSON_API const char* anderson_config_key_name(size_t index);

ANDERSON_API anderson_status anderson_config_create(anderson_config** out);
ANDERSON_API void anderson_config_destroy(anderson_config* config);
/* Merges "key = value" lines from a file; later calls override earlier ones. */
ANDERSON_API anderson_status anderson_config_load_file(anderson_config* config, const char* path);
ANDERSON_API anderson_status anderson_config_set(anderson_config* config, const char* key, const char* value);
/* Applies defaults and checks every invariant. */
ANDERSON_API anderson_status anderson_config_validate(const anderson_config* config);
/* Writes the resolved config as JSON; len includes the terminator. */
ANDERSON_API anderson_status anderson_config_json(const anderson_config* config, char* buffer, size_t len,
                                                  size_t* required);
ANDERSON_API anderson_status anderson_config_hash(const anderson_config* config, char* buffer, size_t len);

ANDERSON_API anderson_status anderson_run_experiment(const anderson_config* config, anderson_record_callback callback,
                                                     void* user, anderson_run** out);
ANDERSON_API void anderson_run_destroy(anderson_run* run);
ANDERSON_API int anderson_run_passed(const anderson_run* run);
ANDERSON_API size_t anderson_run_record_count(const anderson_run* run);
ANDERSON_API const char* anderson_run_record_json(const anderson_run* run, size_t index);
ANDERSON_API const char* anderson_run_records_path(const anderson_run* run);
ANDERSON_API const char* anderson_run_csv_path(const anderson_run* run);

/* Reads every records file in dir and writes summary.txt / summary.json there. */
ANDERSON_API anderson_status anderson_report_create(const char* dir, const char* experiment_filter,
                                                    anderson_report** out);
ANDERSON_API void anderson_report_destroy(anderson_report* report);
ANDERSON_API const char* anderson_report_table(const anderson_report* report);
ANDERSON_API int anderson_report_failed(const anderson_report* report);
ANDERSON_API int anderson_report_empty(const anderson_report* report);

/* Exact lattice sum E|grad X_eps|^2. */
ANDERSON_API anderson_status anderson_renorm_constant_x(int dimension, int points, double eps,
                                                        anderson_mollifier mollifier, double* out);
/* Lowest eigenvalues of -Laplacian on the Nyquist-free trial space. */
ANDERSON_API anderson_status anderson_zero_noise_spectrum(int dimension, int points, size_t count, double tol,
                                                          double* out);
/* Lowest eigenvalues of the transformed renormalized operator for one seed. */
ANDERSON_API anderson_status anderson_lowest_eigenvalues(int dimension, int points, double eps,
                                                         anderson_mollifier mollifier, unsigned long long seed,
                                                         size_t count, double tol, double* out);

#ifdef __cplusplus
}
#endif

#endif
