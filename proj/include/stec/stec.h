/* C interface to the stec forecasting library.
 *
 * All functions return STEC_OK on success, STEC_EUSAGE for bad arguments or
 * unreadable configs, and STEC_ERUNTIME for failures during execution. On any
 * non-zero return, stec_last_error() holds a thread-local message. Strings
 * returned through out-parameters are owned by the caller and must be
 * released with stec_string_free().
 */
#ifndef STEC_STEC_H
#define STEC_STEC_H

#ifdef __cplusplus
extern "C" {
#endif

#define STEC_OK 0
#define STEC_EUSAGE 1
#define STEC_ERUNTIME 2

const char* stec_last_error(void);
void stec_string_free(char* s);

/* Trains per the JSON config and writes artifacts to its out_dir; the report
 * JSON is returned through report_json_out (may be NULL to discard). */
int stec_experiment_run(const char* config_path, char** report_json_out);

/* Evaluates an existing checkpoint on the config's test split. */
int stec_experiment_eval(const char* config_path, const char* checkpoint_path,
                         char** report_json_out);

/* Per-subperiod MSE CSV for one checkpoint, optionally compared against a
 * cascaded-decoding-off baseline checkpoint (pass NULL to skip). */
int stec_consistency(const char* config_path, const char* checkpoint_path,
                     const char* baseline_checkpoint_path, char** csv_out);

/* Runs the five-row ablation toggle grid; returns the results as CSV. */
int stec_ablate(const char* config_path, int parallel, char** csv_out);

/* Generates a synthetic dataset CSV from a spec JSON. */
int stec_synth(const char* spec_json_path, const char* out_csv_path);

/* Trained model handle for in-process forecasting. */
typedef struct stec_model stec_model;

int stec_model_load(const char* config_path, const char* checkpoint_path, stec_model** out);
void stec_model_free(stec_model* model);
int stec_model_dims(const stec_model* model, long long* t_in, long long* t_pred,
                    long long* num_vars);
/* history is row-major [t_in, num_vars] in normalized units; forecast_out
 * must hold t_pred * num_vars doubles. */
int stec_model_forecast(const stec_model* model, const double* history,
                        double* forecast_out);

#ifdef __cplusplus
}
#endif

#endif /* STEC_STEC_H */
