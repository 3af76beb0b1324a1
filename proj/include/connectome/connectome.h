#ifndef CONNECTOME_CONNECTOME_H
#define CONNECTOME_CONNECTOME_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CX_API __declspec(dllexport)
#else
#define CX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cx_status {
  CX_OK = 0,
  CX_INVALID_ARGUMENT = 1,
  CX_IO = 2,
  CX_FORMAT = 3,
  CX_SHAPE = 4,
  CX_NUMERIC = 5,
  CX_NOT_CONVERGED = 6,
  CX_INTERNAL = 7
} cx_status;

typedef struct cx_context cx_context;
typedef struct cx_volume cx_volume;
typedef struct cx_model cx_model;

CX_API const char* cx_version(void);
CX_API const char* cx_status_string(cx_status status);

/* Contexts carry settings and the message of the last failure. A context is
   not safe for concurrent use; create one per thread. */
CX_API cx_status cx_context_create(cx_context** out);
CX_API void cx_context_destroy(cx_context* ctx);
CX_API const char* cx_last_error(const cx_context* ctx);
CX_API cx_status cx_context_set_jobs(cx_context* ctx, int jobs);
/* Overrides config-file seeds and CONNECTOME_SEED. */
CX_API cx_status cx_context_set_seed(cx_context* ctx, uint64_t seed);
CX_API cx_status cx_context_clear_seed(cx_context* ctx);
CX_API cx_status cx_context_set_command_line(cx_context* ctx, const char* command_line);
/* JSON run record of the last successful command. */
CX_API cx_status cx_last_run_record(cx_context* ctx, char** json);

/* Strings handed out by the library. */
CX_API void cx_string_free(char* s);

/* Commands. Optional arguments accept NULL. */
CX_API cx_status cx_synth_default_config(cx_context* ctx, char** json);
CX_API cx_status cx_synth_generate(cx_context* ctx, const char* config_json, const char* out_dir);

/* With n_seeds == 0, `count` consecutive seeds start at the run seed. */
CX_API cx_status cx_parcellate(cx_context* ctx, const char* mask_path, const int* scales, size_t n_scales,
                               const uint64_t* seeds, size_t n_seeds, int count, int check, const char* out_dir);

/* kind: "fingerprint", "matrix" or "vector". */
CX_API cx_status cx_extract(cx_context* ctx, const char* manifest, const char* parcellation, const char* kind,
                            const char* mask_path, double scrub_threshold, const char* out_dir);

/* family: "ridge", "fcn", "cnn3d", "brainnet"; task: "classification" or "regression". */
CX_API cx_status cx_train_default_config(cx_context* ctx, const char* family, const char* task, char** json);
CX_API cx_status cx_train(cx_context* ctx, const char* family, const char* task, const char* features_dir,
                          const char* config_json, const char* out_checkpoint);

CX_API cx_status cx_predict(cx_context* ctx, const char* checkpoint, const char* features_dir, const char* out_json);
CX_API cx_status cx_ensemble_predict(cx_context* ctx, const char* const* checkpoints, const char* const* features_dirs,
                                     size_t n, const char* out_json);
CX_API cx_status cx_fuse_predictions(cx_context* ctx, const char* const* predictions, size_t n, const char* out_json);

CX_API cx_status cx_evaluate(cx_context* ctx, const char* predictions, char** report_json, char** report_text);
/* metric: "accuracy", "auc", "rmse" or "mae". */
CX_API cx_status cx_bootstrap(cx_context* ctx, const char* predictions_a, const char* predictions_b, const char* metric,
                              int replicates, const char* out_dir, char** summary_json);
CX_API cx_status cx_saliency(cx_context* ctx, const char* const* checkpoints, const char* const* features_dirs, size_t n,
                             const char* const* subjects, size_t n_subjects, const char* out_dir);

/* Volumes. */
CX_API cx_status cx_volume_read(cx_context* ctx, const char* path, cx_volume** out);
CX_API void cx_volume_free(cx_volume* v);
CX_API const char* cx_volume_kind(const cx_volume* v);
CX_API void cx_volume_dims(const cx_volume* v, int dims[3]);
/* Frames for BOLD, channels for fingerprint and real volumes, 1 otherwise. */
CX_API int cx_volume_channels(const cx_volume* v);
CX_API size_t cx_volume_size(const cx_volume* v);
CX_API cx_status cx_volume_copy(cx_context* ctx, const cx_volume* v, double* out, size_t n);

/* Models. */
CX_API cx_status cx_model_load(cx_context* ctx, const char* path, cx_model** out);
CX_API void cx_model_free(cx_model* m);
CX_API size_t cx_model_input_size(const cx_model* m);
CX_API cx_status cx_model_describe(cx_context* ctx, const cx_model* m, char** json);
/* x holds n_samples rows of cx_model_input_size floats; out gets n_samples values. */
CX_API cx_status cx_model_predict(cx_context* ctx, cx_model* m, const float* x, size_t n_samples, double* out);

#ifdef __cplusplus
}
#endif

#endif
