/* C API for the tofner shared library. All functions are synchronous and
 * thread-compatible; the last-error message is per thread. Strings returned
 * by the library stay valid until the next library call on the same thread
 * (or, for handle accessors, until the handle is freed). */
#ifndef TOFNER_H
#define TOFNER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tof_status {
  TOF_OK = 0,
  TOF_ERR_USAGE = 1,      /* malformed call or arguments */
  TOF_ERR_VALIDATION = 2, /* config or data failed validation */
  TOF_ERR_PARSE = 3,      /* malformed input file */
  TOF_ERR_CONTRACT = 4,   /* operation precondition broken */
  TOF_ERR_TRAINING = 5,   /* training diverged or could not proceed */
  TOF_ERR_IO = 6,         /* filesystem failure */
  TOF_ERR_INTERNAL = 7
} tof_status;

const char* tof_version(void);

/* Message for the most recent failure on this thread; "" when none. */
const char* tof_last_error(void);

/* ---- conversions (file to file) ------------------------------------- */

/* CoNLL NER data -> MRC examples, one per (sentence, entity type) pair.
 * n_records (optional) receives the number of examples written. */
tof_status tof_convert_ner_to_mrc(const char* conll_in, const char* templates_path,
                                  const char* labels_csv, const char* jsonl_out,
                                  size_t* n_records);

/* SQuAD-style JSON -> internal MRC line-JSON with token-aligned answers. */
tof_status tof_convert_normalize_mrc(const char* squad_json_in, const char* jsonl_out,
                                     size_t* n_records);

/* Copies a CoNLL file with every tag replaced by O. */
tof_status tof_convert_strip_labels(const char* conll_in, const char* labels_csv,
                                    const char* conll_out, size_t* n_records);

/* Token-wise word substitution from a two-column map file. */
tof_status tof_convert_substitute(const char* conll_in, const char* labels_csv,
                                  const char* wordmap_path, int lowercase_fallback,
                                  const char* conll_out, size_t* n_records);

/* ---- training ------------------------------------------------------- */

/* Runs the staged pipeline described by the config file. overrides_json may
 * be NULL or a JSON object of flat config keys applied over the file (after
 * TOF_* environment overrides). run_dir_buf (optional) receives the
 * effective run directory, NUL-terminated and truncated to run_dir_len. */
tof_status tof_train(const char* config_path, const char* overrides_json, char* run_dir_buf,
                     size_t run_dir_len);

/* Continues an interrupted run; arguments as tof_train. */
tof_status tof_resume(const char* config_path, const char* overrides_json, char* run_dir_buf,
                      size_t run_dir_len);

/* ---- models --------------------------------------------------------- */

typedef struct tof_model tof_model; /* opaque */

tof_status tof_model_load(const char* checkpoint_path, tof_model** out);
void tof_model_free(tof_model* model);

/* Stage tag recorded in the checkpoint, e.g. "theta_ner_1". */
const char* tof_model_stage_tag(const tof_model* model);

/* Tags a CoNLL file (any tag column is ignored) and writes token/tag lines. */
tof_status tof_model_predict_file(const tof_model* model, const char* conll_in,
                                  const char* conll_out);

/* Load + predict + free in one call. */
tof_status tof_predict(const char* checkpoint_path, const char* conll_in, const char* conll_out);

/* ---- evaluation ----------------------------------------------------- */

/* Entity-level micro P/R/F1 of pred against gold. format is "json" or
 * "table"; the report is written NUL-terminated into report_buf. */
tof_status tof_eval(const char* gold_conll, const char* pred_conll, const char* labels_csv,
                    const char* format, char* report_buf, size_t report_len);

/* ---- synthetic suite ------------------------------------------------ */

/* Writes the deterministic synthetic corpus suite and a ready-to-run
 * config.json into out_dir. */
tof_status tof_make_synthetic(const char* out_dir, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* TOFNER_H */
