#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stec/data_io.hpp"
#include "stec/model.hpp"
#include "stec/training.hpp"

namespace stec {

double mse_metric(const std::vector<double>& pred, const std::vector<double>& target);
double mae_metric(const std::vector<double>& pred, const std::vector<double>& target);

struct SubperiodResult {
    std::vector<double> mse;  // temporal order, `parts` entries
    double jitter;            // max adjacent ratio; +inf when a part is error-free
};

// Splits the horizon into `parts` equal sub-periods (remainder goes to the
// last) and reports per-part MSE plus the adjacent-ratio jitter statistic.
SubperiodResult subperiod_consistency(const std::vector<double>& pred,
                                      const std::vector<double>& target,
                                      std::int64_t horizon, std::int64_t row_size,
                                      std::int64_t parts = 6);

struct ForecastReport {
    double mse = 0.0;
    double mae = 0.0;
    double mse_denorm = 0.0;
    double mae_denorm = 0.0;
    std::vector<double> subperiod_mse;
    double jitter = 0.0;
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;
    int epochs_trained = 0;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::string config_echo;  // JSON text of the resolved configuration
};

// Test-set evaluation over all supplied windows; predictions and targets are
// concatenated across windows before computing metrics.
ForecastReport evaluate_model(const Model& model, const std::vector<WindowSample>& test_windows,
                              const NormStats& stats, bool denormalized);

struct ExperimentConfig {
    std::string dataset_csv;      // path, or empty when synth is set
    std::string synth_json;       // inline synthetic spec (JSON object text)
    ModelConfig model;
    TrainConfig train;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool denormalized = false;
    std::int64_t train_stride = 1;
    std::int64_t val_stride = 1;
    std::int64_t test_stride = 1;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

// Full protocol: ingest, split 7:1:2, normalize on train stats, train with
// early stopping, evaluate on test windows, write artifacts under out_dir
// (report.json, history.csv, model.ckpt, config.json, learned_graph.csv,
// subperiods.csv). Returns the report.
ForecastReport run_experiment(const ExperimentConfig& cfg);

// Evaluation-only path against an existing checkpoint.
ForecastReport eval_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path);

std::string report_to_json(const ForecastReport& report);

// Runs the five ablation rows (toggle grid) and returns CSV text with one row
// per experiment id. `parallel` > 1 runs rows on that many threads.
std::string run_ablation_grid(const ExperimentConfig& base, int parallel = 1);

// Per-subperiod MSE rows for one or two checkpoints, as plot-ready CSV.
std::string consistency_csv(const ExperimentConfig& cfg, const std::string& checkpoint,
                            const std::string& baseline_checkpoint);

}  // namespace stec
