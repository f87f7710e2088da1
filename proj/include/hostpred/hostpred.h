/*
 * hostpred C API.
 *
 * All functions return hp_status. On failure, hp_last_error() holds a message
 * for the calling thread until its next failing call. Objects are opaque
 * handles released with the matching *_free function; passing NULL to a
 * *_free function is a no-op.
 */
#ifndef HOSTPRED_HOSTPRED_H
#define HOSTPRED_HOSTPRED_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HOSTPRED_BUILDING)
#    define HP_API __declspec(dllexport)
#  else
#    define HP_API __declspec(dllimport)
#  endif
#else
#  define HP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hp_status {
  HP_OK = 0,
  HP_E_INVALID_ARGUMENT = 1,
  HP_E_PARSE = 2,
  HP_E_IO = 3,
  HP_E_PRECONDITION = 4, /* input violates a documented precondition */
  HP_E_VALIDATION = 5,   /* internal consistency check failed (e.g. fold leakage) */
  HP_E_INTERNAL = 6
} hp_status;

typedef enum hp_log_level { HP_LOG_INFO = 0, HP_LOG_WARNING = 1 } hp_log_level;

typedef void (*hp_log_fn)(hp_log_level level, const char* message, void* user);

HP_API const char* hp_version(void);
HP_API const char* hp_status_name(hp_status status);
HP_API const char* hp_last_error(void);
/* Short machine-readable kind of the last error, e.g. "MalformedHeader". */
HP_API const char* hp_last_error_kind(void);

/* NULL restores the default handler, which writes to stderr. */
HP_API void hp_set_log_handler(hp_log_fn fn, void* user);

/* ------------------------------------------------------------------------ */
/* Sequences                                                                 */

typedef struct hp_fasta_options {
  char delimiter;   /* header field separator, default '|' */
  int host_field;   /* negative counts from the end; default -1 */
} hp_fasta_options;

HP_API hp_fasta_options hp_fasta_options_default(void);

/* *accepted = 1 if every residue is one of the 20 amino acids. On rejection
 * *bad_index is the offending position, or (size_t)-1 for an empty string. */
HP_API hp_status hp_validate_sequence(const char* residues, int* accepted, size_t* bad_index);

typedef struct hp_dataset hp_dataset;

typedef struct hp_curation_stats {
  size_t parsed;
  size_t kept;
  size_t dropped;
  size_t invalid;
  size_t unlabeled;
  size_t duplicates;
  size_t cross_host;
  size_t duplicate_ids;
} hp_curation_stats;

/* Parses FASTA text, validates, deduplicates. options and stats may be NULL. */
HP_API hp_status hp_dataset_curate(const char* fasta_text, const hp_fasta_options* options,
                                   hp_dataset** out, hp_curation_stats* stats);
HP_API hp_status hp_dataset_load(const char* tsv_path, hp_dataset** out);
HP_API hp_status hp_dataset_save(const hp_dataset* dataset, const char* tsv_path);
HP_API size_t hp_dataset_size(const hp_dataset* dataset);
HP_API size_t hp_dataset_num_classes(const hp_dataset* dataset);
/* Returned strings live as long as the dataset. */
HP_API const char* hp_dataset_class(const hp_dataset* dataset, size_t index);
HP_API hp_status hp_dataset_record(const hp_dataset* dataset, size_t index, const char** id,
                                   const char** host, const char** residues);
HP_API void hp_dataset_free(hp_dataset* dataset);

/* ------------------------------------------------------------------------ */
/* PSSM features                                                             */

typedef enum hp_scheme {
  HP_SCHEME_EG = 0,
  HP_SCHEME_GDPC = 1,
  HP_SCHEME_ER = 2
} hp_scheme;

/* 100, 100 or 910; 0 for an unknown scheme. */
HP_API size_t hp_scheme_dimension(hp_scheme scheme);

/* Parses PSI-BLAST ascii-pssm text and writes the encoding into out, which
 * must hold hp_scheme_dimension(scheme) values. */
HP_API hp_status hp_pssm_features(const char* pssm_text, hp_scheme scheme, double* out,
                                  size_t out_len);

/* ------------------------------------------------------------------------ */
/* Metrics                                                                   */

/* counts is a row-major num_classes x num_classes confusion matrix (row =
 * truth). per_class_* may be NULL; otherwise they hold num_classes values. */
HP_API hp_status hp_metrics(const int64_t* counts, size_t num_classes, double* per_class_f1,
                            double* per_class_mcc, double* overall_f1, double* overall_mcc);

/* ------------------------------------------------------------------------ */
/* Trained CNN                                                               */

typedef struct hp_model hp_model;

HP_API hp_status hp_model_load(const char* checkpoint_path, const char* vocab_path,
                               hp_model** out);
HP_API size_t hp_model_num_classes(const hp_model* model);
/* probs holds hp_model_num_classes() values; label may be NULL. */
HP_API hp_status hp_model_predict(const hp_model* model, const char* residues, double* probs,
                                  size_t probs_len, size_t* label);
HP_API void hp_model_free(hp_model* model);

/* ------------------------------------------------------------------------ */
/* Pipeline commands. config_json is a run configuration document.          */

HP_API hp_status hp_run_curate(const char* fasta_path, const char* dataset_out,
                               const hp_fasta_options* options, hp_curation_stats* stats);

typedef struct hp_features_summary {
  size_t written;
  size_t skipped;
  size_t columns;
} hp_features_summary;

/* out_path may be NULL for <output_dir>/features.csv. */
HP_API hp_status hp_run_features(const char* config_json, const char* out_path,
                                 hp_features_summary* summary);

typedef struct hp_train_summary {
  size_t train_rows;
  size_t val_rows;
  size_t epochs;
  double final_val_acc;
} hp_train_summary;

HP_API hp_status hp_run_train(const char* config_json, hp_train_summary* summary);

typedef struct hp_eval_summary {
  size_t folds;
  double train_fraction;
  double val_fraction;
  double test_fraction;
  double overall_f1;
  double overall_mcc;
} hp_eval_summary;

HP_API hp_status hp_run_eval(const char* config_json, hp_eval_summary* summary);

typedef struct hp_integrate_summary {
  size_t sequences;
  size_t models;
  /* rate == 0, (0, 0.5), [0.5, 1), == 1 */
  size_t histogram[4];
} hp_integrate_summary;

HP_API hp_status hp_run_integrate(const char* const* prediction_paths, size_t count,
                                  const char* report_out, hp_integrate_summary* summary);

HP_API hp_status hp_run_synthesize(const char* out_dir, size_t per_class, uint64_t seed,
                                   size_t* records);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* HOSTPRED_HOSTPRED_H */
