/* stressfuse C API
 *
 * Multimodal stress-monitoring toolkit: trains per-modality dense networks
 * on posture / facial / keystroke / physiology feature streams, fuses them
 * (early or late) into a stress classifier, transfer-learns a 0-100
 * workload regressor from the early-fusion feature map, and produces
 * evaluation reports and persistence-filtered stress timelines.
 *
 * All functions return SF_OK (0) on success. On failure they return a
 * status code and sf_last_error() carries a thread-local message, valid
 * until the next failing call on the same thread. Handles are opaque;
 * every *_open has a matching *_close. Strings returned through char**
 * outputs are owned by the caller and released with sf_string_free.
 */

#ifndef STRESSFUSE_H
#define STRESSFUSE_H

#include <stddef.h>

#if defined(_WIN32)
#define SF_API __declspec(dllexport)
#else
#define SF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
    SF_OK = 0,
    SF_ERROR_INVALID_ARGUMENT = 1,
    SF_ERROR_DIMENSION = 2,
    SF_ERROR_NUMERIC = 3,
    SF_ERROR_PARSE = 4,
    SF_ERROR_SCHEMA = 5,
    SF_ERROR_IO = 6,
    SF_ERROR_CORRUPT_FILE = 7,
    SF_ERROR_VERSION = 8,
    SF_ERROR_DIVERGENCE = 9,
    SF_ERROR_MISSING_MODALITY = 10,
    SF_ERROR_EMPTY_RESULT = 11,
    SF_ERROR_UNDEFINED_METRIC = 12,
    SF_ERROR_INTERNAL = 13
} sf_status;

typedef struct sf_dataset sf_dataset;
typedef struct sf_model sf_model;
typedef struct sf_timeline sf_timeline;

SF_API const char* sf_version(void);
SF_API const char* sf_status_name(sf_status status);
SF_API const char* sf_last_error(void);
SF_API void sf_string_free(char* s);

/* ----- synthetic data ---------------------------------------------------
 * config_json: {"preset":"paper-shape"} or explicit fields
 *   {"rows":3000,"posture_dim":10,"facial_dim":10,"keystroke_dim":7,
 *    "noise_sigma":0.5,"signal_strength":1.0,"seed":42,
 *    "missing_posture":0.0,...,"missing_physiology":0.0}
 * Writes csv files, schema manifest, ground truth and episode list into
 * out_dir. NULL config means defaults. */
SF_API sf_status sf_synth_generate(const char* config_json, const char* out_dir);

/* ----- datasets ---------------------------------------------------------
 * A dataset handle is the aligned join of the modality csv files named by
 * a schema manifest. Immutable once opened; safe to share across threads. */
SF_API sf_status sf_dataset_open(const char* manifest_path, sf_dataset** out);
SF_API void sf_dataset_close(sf_dataset* ds);
SF_API sf_status sf_dataset_row_count(const sf_dataset* ds, size_t* out);
/* Load + alignment report (rows read, dropped, per-modality exclusions). */
SF_API sf_status sf_dataset_report_json(const sf_dataset* ds, char** out_json);

/* ----- training ----------------------------------------------------------
 * options_json fields (all optional):
 *   {"mode":"early"|"late","epochs":200,"lr":0.01,"batch":32,"seed":42,
 *    "split":0.7,"stratified":true,"with_tlx":false}
 * Writes the model bundle into bundle_dir and report.json + histories/
 * into reports_dir (reports_dir may be NULL to skip). */
SF_API sf_status sf_train(const sf_dataset* ds, const char* options_json,
                          const char* bundle_dir, const char* reports_dir);

/* ----- models ------------------------------------------------------------
 * A model handle owns the fusion classifier, the optional workload
 * regressor and the normalization statistics from its bundle. */
SF_API sf_status sf_model_open(const char* bundle_dir, sf_model** out);
SF_API void sf_model_close(sf_model* m);
SF_API sf_status sf_model_info_json(const sf_model* m, char** out_json);

/* Single-record prediction on raw (unnormalized) feature values. A NULL
 * block pointer reports SF_ERROR_MISSING_MODALITY. */
SF_API sf_status sf_model_predict(const sf_model* m,
                                  const double* posture, size_t posture_len,
                                  const double* facial, size_t facial_len,
                                  const double* keystroke, size_t keystroke_len,
                                  const double* physiology, size_t physiology_len,
                                  double* probability_out, int* label_out);

/* Workload score in [0, 100]; requires a bundle trained with a regressor. */
SF_API sf_status sf_model_predict_tlx(const sf_model* m,
                                      const double* posture, size_t posture_len,
                                      const double* facial, size_t facial_len,
                                      const double* keystroke, size_t keystroke_len,
                                      const double* physiology, size_t physiology_len,
                                      double* tlx_out);

/* ----- evaluation / batch prediction -------------------------------------
 * evaluate options_json: {"on":"test"|"train"|"all"}; "test"/"train" use
 * the split recorded in the bundle. Returns the full report as JSON. */
SF_API sf_status sf_evaluate(const sf_model* m, const sf_dataset* ds,
                             const char* options_json, char** report_json_out);
/* Per-row predictions as csv text: key,probability,label[,tlx]. */
SF_API sf_status sf_predict_dataset(const sf_model* m, const sf_dataset* ds,
                                    char** csv_out);

/* ----- timelines ----------------------------------------------------------
 * options_json: {"min_run":5,"with_tlx":true}. Requires the dataset keys to
 * be numeric, strictly increasing timestamps. */
SF_API sf_status sf_timeline_run(const sf_model* m, const sf_dataset* ds,
                                 const char* options_json, sf_timeline** out);
SF_API void sf_timeline_close(sf_timeline* t);
SF_API sf_status sf_timeline_entry_count(const sf_timeline* t, size_t* out);
SF_API sf_status sf_timeline_alert_count(const sf_timeline* t, size_t* out);
/* format: "table" (csv) or "structured" (json). */
SF_API sf_status sf_timeline_export(const sf_timeline* t, const char* path,
                                    const char* format);
SF_API sf_status sf_timeline_render_svg(const sf_timeline* t, const char* path);
SF_API sf_status sf_timeline_json(const sf_timeline* t, char** out_json);

/* ----- cross validation ---------------------------------------------------
 * options_json: training options plus {"k":5}. Returns per-fold and
 * aggregate (mean, stddev) metrics as JSON. */
SF_API sf_status sf_crossval(const sf_dataset* ds, const char* options_json,
                             char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* STRESSFUSE_H */
