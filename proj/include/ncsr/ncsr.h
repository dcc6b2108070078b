#ifndef NCSR_NCSR_H
#define NCSR_NCSR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NCSR_API __declspec(dllexport)
#else
#define NCSR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ncsr_status {
  NCSR_OK = 0,
  NCSR_ERR_INVALID_ARGUMENT = 1,
  NCSR_ERR_SHAPE = 2,
  NCSR_ERR_SINGULAR = 3,
  NCSR_ERR_NUMERIC = 4,
  NCSR_ERR_CONFIG = 5,
  NCSR_ERR_IO = 6,
  NCSR_ERR_FORMAT = 7,
  NCSR_ERR_TRAINING_ABORTED = 8,
  NCSR_ERR_INTERNAL = 100
} ncsr_status;

typedef struct ncsr_model ncsr_model;
typedef struct ncsr_image ncsr_image;
typedef struct ncsr_report ncsr_report;

/* Receives one line of progress output. */
typedef void (*ncsr_log_fn)(const char* line, void* user);

/* Message for the last failing call on this thread; "" when none. */
NCSR_API const char* ncsr_last_error(void);
NCSR_API const char* ncsr_status_name(ncsr_status status);
NCSR_API const char* ncsr_version(void);
NCSR_API const char* ncsr_build_id(void);

NCSR_API ncsr_status ncsr_image_load_png(const char* path, ncsr_image** out);
NCSR_API ncsr_status ncsr_image_save_png(const ncsr_image* img, const char* path);
NCSR_API ncsr_status ncsr_image_size(const ncsr_image* img, int64_t* height, int64_t* width);
NCSR_API void ncsr_image_free(ncsr_image* img);

NCSR_API ncsr_status ncsr_model_load(const char* checkpoint_path, ncsr_model** out);
NCSR_API ncsr_status ncsr_model_scale(const ncsr_model* model, int* scale);
/* Fills out[0..n) with new images; free each with ncsr_image_free. */
NCSR_API ncsr_status ncsr_model_sample(const ncsr_model* model, const ncsr_image* lr, double temperature,
                                       uint64_t seed, int n, ncsr_image** out);
NCSR_API void ncsr_model_free(ncsr_model* model);

/* The five commands. Outputs land on disk exactly as the CLI documents. */
NCSR_API ncsr_status ncsr_train(const char* config_path, ncsr_log_fn log, void* user);
NCSR_API ncsr_status ncsr_sample(const char* checkpoint_path, const char* lr_png, int n, double temperature,
                                 uint64_t seed, const char* out_dir);
/* out_dir may be NULL. threads <= 0 reads NCSR_THREADS. */
NCSR_API ncsr_status ncsr_eval(const char* checkpoint_path, const char* manifest, int n, double temperature,
                               uint64_t seed, const char* out_dir, int threads, ncsr_report** out);
/* full != 0 adds the slow suites; inject_fault != 0 corrupts a 1x1 weight. */
NCSR_API ncsr_status ncsr_verify(int full, uint64_t seed, int inject_fault, ncsr_log_fn log, void* user,
                                 int* all_passed);
NCSR_API ncsr_status ncsr_synth_data(const char* config_path, const char* out_dir, size_t* n_written);

NCSR_API const char* ncsr_report_summary(const ncsr_report* report);
NCSR_API size_t ncsr_report_image_count(const ncsr_report* report);
NCSR_API size_t ncsr_report_failure_count(const ncsr_report* report);
NCSR_API const char* ncsr_report_failure(const ncsr_report* report, size_t i);
NCSR_API void ncsr_report_free(ncsr_report* report);

/* 16 hex digits plus NUL are written to out. */
NCSR_API ncsr_status ncsr_file_hash(const char* path, char out[17]);

#ifdef __cplusplus
}
#endif

#endif
