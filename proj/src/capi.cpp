#include "stec/stec.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <fstream>
#include <sstream>
#include <string>

#include "stec/eval.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int usage_error(const std::string& msg) {
    g_last_error = msg;
    return STEC_EUSAGE;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return STEC_ERUNTIME;
    } catch (...) {
        g_last_error = "unknown error";
        return STEC_ERUNTIME;
    }
}

int check_file(const char* path, const char* what) {
    if (!path || !*path) return usage_error(std::string(what) + " path is required");
    if (!std::filesystem::exists(path))
        return usage_error(std::string(what) + " not found: " + path);
    return STEC_OK;
}

}  // namespace

extern "C" {

const char* stec_last_error(void) { return g_last_error.c_str(); }

void stec_string_free(char* s) { std::free(s); }

int stec_experiment_run(const char* config_path, char** report_json_out) {
    if (int rc = check_file(config_path, "config file")) return rc;
    return guarded([&]() {
        auto cfg = stec::load_experiment_config(config_path);
        auto report = stec::run_experiment(cfg);
        if (report_json_out) *report_json_out = dup_string(stec::report_to_json(report));
        return STEC_OK;
    });
}

int stec_experiment_eval(const char* config_path, const char* checkpoint_path,
                         char** report_json_out) {
    if (int rc = check_file(config_path, "config file")) return rc;
    if (int rc = check_file(checkpoint_path, "checkpoint file")) return rc;
    return guarded([&]() {
        auto cfg = stec::load_experiment_config(config_path);
        auto report = stec::eval_checkpoint(cfg, checkpoint_path);
        if (report_json_out) *report_json_out = dup_string(stec::report_to_json(report));
        return STEC_OK;
    });
}

int stec_consistency(const char* config_path, const char* checkpoint_path,
                     const char* baseline_checkpoint_path, char** csv_out) {
    if (int rc = check_file(config_path, "config file")) return rc;
    if (int rc = check_file(checkpoint_path, "checkpoint file")) return rc;
    if (baseline_checkpoint_path && *baseline_checkpoint_path) {
        if (int rc = check_file(baseline_checkpoint_path, "baseline checkpoint file"))
            return rc;
    }
    return guarded([&]() {
        auto cfg = stec::load_experiment_config(config_path);
        auto csv = stec::consistency_csv(
            cfg, checkpoint_path,
            baseline_checkpoint_path ? baseline_checkpoint_path : "");
        if (csv_out) *csv_out = dup_string(csv);
        return STEC_OK;
    });
}

int stec_ablate(const char* config_path, int parallel, char** csv_out) {
    if (int rc = check_file(config_path, "config file")) return rc;
    if (parallel < 1) return usage_error("parallel must be >= 1");
    return guarded([&]() {
        auto cfg = stec::load_experiment_config(config_path);
        auto csv = stec::run_ablation_grid(cfg, parallel);
        if (!cfg.out_dir.empty()) {
            std::filesystem::create_directories(cfg.out_dir);
            std::ofstream((std::filesystem::path(cfg.out_dir) / "ablation.csv").string())
                << csv;
        }
        if (csv_out) *csv_out = dup_string(csv);
        return STEC_OK;
    });
}

int stec_synth(const char* spec_json_path, const char* out_csv_path) {
    if (int rc = check_file(spec_json_path, "synth spec file")) return rc;
    if (!out_csv_path || !*out_csv_path) return usage_error("output csv path is required");
    return guarded([&]() {
        std::ifstream in(spec_json_path);
        std::stringstream ss;
        ss << in.rdbuf();
        auto result = stec::synth_dataset(stec::parse_synth_spec(ss.str()));
        stec::write_csv(out_csv_path, result.series);
        return STEC_OK;
    });
}

}  // extern "C"

struct stec_model {
    stec::ExperimentConfig cfg;
    std::unique_ptr<stec::Model> model;
};

extern "C" {

int stec_model_load(const char* config_path, const char* checkpoint_path, stec_model** out) {
    if (int rc = check_file(config_path, "config file")) return rc;
    if (int rc = check_file(checkpoint_path, "checkpoint file")) return rc;
    if (!out) return usage_error("output handle is required");
    return guarded([&]() {
        auto handle = std::make_unique<stec_model>();
        handle->cfg = stec::load_experiment_config(config_path);
        if (handle->cfg.model.V <= 0)
            throw stec::TensorError("model config must set V for direct loading");
        handle->model = std::make_unique<stec::Model>(handle->cfg.model, handle->cfg.seed);
        handle->model->load_checkpoint(checkpoint_path);
        *out = handle.release();
        return STEC_OK;
    });
}

void stec_model_free(stec_model* model) { delete model; }

int stec_model_dims(const stec_model* model, long long* t_in, long long* t_pred,
                    long long* num_vars) {
    if (!model) return usage_error("null model handle");
    const auto& m = model->cfg.model;
    if (t_in) *t_in = m.T_in;
    if (t_pred) *t_pred = m.T_pred;
    if (num_vars) *num_vars = m.V;
    return STEC_OK;
}

int stec_model_forecast(const stec_model* model, const double* history,
                        double* forecast_out) {
    if (!model || !history || !forecast_out) return usage_error("null argument");
    return guarded([&]() {
        const auto& m = model->cfg.model;
        auto n = static_cast<std::size_t>(m.T_in * m.V);
        auto input = stec::make_tensor({m.T_in, m.V},
                                       std::vector<double>(history, history + n));
        auto state = model->model->forward(input);
        std::memcpy(forecast_out, state.forecast->data.data(),
                    state.forecast->data.size() * sizeof(double));
        return STEC_OK;
    });
}

}  // extern "C"
