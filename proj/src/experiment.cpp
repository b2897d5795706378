#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "stec/eval.hpp"

namespace stec {

namespace {

using nlohmann::json;

json model_to_json(const ModelConfig& m) {
    return json{{"V", m.V},
                {"T_in", m.T_in},
                {"T_pred", m.T_pred},
                {"token_len", m.token_len},
                {"d_model", m.d_model},
                {"num_heads", m.num_heads},
                {"topk_factor", m.topk_factor},
                {"kernel", m.kernel},
                {"C_in", m.C_in},
                {"C_mid", m.C_mid},
                {"C_out", m.C_out},
                {"w_gcm", m.w_gcm},
                {"interval_fractions", m.interval_fractions},
                {"layers_per_stage", m.layers_per_stage},
                {"start_token_extra", m.start_token_extra},
                {"num_encoder_layers", m.num_encoder_layers},
                {"use_gcm", m.use_gcm},
                {"use_learned_graph", m.use_learned_graph},
                {"use_cdp", m.use_cdp}};
}

void model_from_json(const json& j, ModelConfig& m) {
    m.V = j.value("V", m.V);
    m.T_in = j.value("T_in", m.T_in);
    m.T_pred = j.value("T_pred", m.T_pred);
    m.token_len = j.value("token_len", m.token_len);
    m.d_model = j.value("d_model", m.d_model);
    m.num_heads = j.value("num_heads", m.num_heads);
    m.topk_factor = j.value("topk_factor", m.topk_factor);
    m.kernel = j.value("kernel", m.kernel);
    m.C_in = j.value("C_in", m.C_in);
    m.C_mid = j.value("C_mid", m.C_mid);
    m.C_out = j.value("C_out", m.C_out);
    m.w_gcm = j.value("w_gcm", m.w_gcm);
    if (j.contains("interval_fractions"))
        m.interval_fractions = j["interval_fractions"].get<std::vector<double>>();
    m.layers_per_stage = j.value("layers_per_stage", m.layers_per_stage);
    m.start_token_extra = j.value("start_token_extra", m.start_token_extra);
    m.num_encoder_layers = j.value("num_encoder_layers", m.num_encoder_layers);
}

struct PreparedData {
    std::vector<WindowSample> train, val, test;
    NormStats stats;
    std::int64_t v = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg) {
    RawSeries raw;
    if (!cfg.synth_json.empty()) {
        raw = synth_dataset(parse_synth_spec(cfg.synth_json)).series;
    } else if (!cfg.dataset_csv.empty()) {
        raw = load_csv(cfg.dataset_csv);
    } else {
        throw TensorError("experiment: config names neither a dataset csv nor a synth spec");
    }
    if (raw.rows < cfg.model.T_in + cfg.model.T_pred + 10)
        throw TensorError("experiment: dataset too short for T_in + T_pred + 10 rows");

    auto splits = split_712(raw);
    auto stats = compute_stats(splits.train);
    PreparedData data;
    data.stats = stats;
    data.v = raw.cols;
    data.train = windows(apply_normalization(splits.train, stats), cfg.model.T_in,
                         cfg.model.T_pred, cfg.train_stride);
    data.val = windows(apply_normalization(splits.val, stats), cfg.model.T_in,
                       cfg.model.T_pred, cfg.val_stride);
    data.test = windows(apply_normalization(splits.test, stats), cfg.model.T_in,
                        cfg.model.T_pred, cfg.test_stride);
    return data;
}

void write_artifacts(const ExperimentConfig& cfg, const Model& model,
                     const TrainResult& trained, const ForecastReport& report) {
    if (cfg.out_dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    auto path = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

    std::ofstream(path("report.json")) << report_to_json(report) << "\n";
    std::ofstream(path("config.json")) << config_to_json(cfg) << "\n";

    std::ofstream history(path("history.csv"));
    history << "epoch,train_loss,val_loss\n";
    history.precision(17);
    for (const auto& e : trained.history)
        history << e.epoch << "," << e.train_loss << "," << e.val_loss << "\n";

    model.save_checkpoint(path("model.ckpt"));

    const auto& A = model.graph_params().A;
    std::ofstream graph(path("learned_graph.csv"));
    graph.precision(17);
    std::int64_t v = A->shape[0];
    for (std::int64_t i = 0; i < v; ++i) {
        for (std::int64_t j = 0; j < v; ++j) {
            if (j) graph << ",";
            graph << A->data[static_cast<std::size_t>(i * v + j)];
        }
        graph << "\n";
    }

    std::ofstream sub(path("subperiods.csv"));
    sub << "part,mse\n";
    sub.precision(17);
    for (std::size_t p = 0; p < report.subperiod_mse.size(); ++p)
        sub << (p + 1) << "," << report.subperiod_mse[p] << "\n";
}

ExperimentConfig resolved(const ExperimentConfig& base, std::int64_t v_from_data) {
    ExperimentConfig cfg = base;
    if (cfg.model.V <= 0) cfg.model.V = v_from_data;
    if (cfg.model.V != v_from_data)
        throw TensorError("experiment: config V=" + std::to_string(cfg.model.V) +
                          " but dataset has " + std::to_string(v_from_data) + " variables");
    cfg.train.seed = cfg.seed;
    return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j = json::parse(json_text);
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        cfg.dataset_csv = d.value("csv", "");
        if (d.contains("synth")) cfg.synth_json = d["synth"].dump();
    }
    if (j.contains("model")) model_from_json(j["model"], cfg.model);
    if (j.contains("toggles")) {
        const auto& t = j["toggles"];
        cfg.model.use_gcm = t.value("use_gcm", cfg.model.use_gcm);
        cfg.model.use_learned_graph = t.value("use_learned_graph", cfg.model.use_learned_graph);
        cfg.model.use_cdp = t.value("use_cdp", cfg.model.use_cdp);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
        cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
        cfg.train.eps = t.value("eps", cfg.train.eps);
        cfg.train.patience = t.value("patience", cfg.train.patience);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.denormalized = j.value("denormalized", cfg.denormalized);
    cfg.train_stride = j.value("train_stride", cfg.train_stride);
    cfg.val_stride = j.value("val_stride", cfg.val_stride);
    cfg.test_stride = j.value("test_stride", cfg.test_stride);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TensorError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    if (!cfg.dataset_csv.empty()) j["dataset"]["csv"] = cfg.dataset_csv;
    if (!cfg.synth_json.empty()) j["dataset"]["synth"] = json::parse(cfg.synth_json);
    j["model"] = model_to_json(cfg.model);
    j["toggles"] = {{"use_gcm", cfg.model.use_gcm},
                    {"use_learned_graph", cfg.model.use_learned_graph},
                    {"use_cdp", cfg.model.use_cdp}};
    j["train"] = {{"lr", cfg.train.lr},           {"batch_size", cfg.train.batch_size},
                  {"beta1", cfg.train.beta1},     {"beta2", cfg.train.beta2},
                  {"eps", cfg.train.eps},         {"patience", cfg.train.patience},
                  {"max_epochs", cfg.train.max_epochs}};
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["denormalized"] = cfg.denormalized;
    j["train_stride"] = cfg.train_stride;
    j["val_stride"] = cfg.val_stride;
    j["test_stride"] = cfg.test_stride;
    return j.dump(2);
}

std::string report_to_json(const ForecastReport& report) {
    json j;
    j["mse"] = report.mse;
    j["mae"] = report.mae;
    if (report.mse_denorm != 0.0 || report.mae_denorm != 0.0) {
        j["mse_denormalized"] = report.mse_denorm;
        j["mae_denormalized"] = report.mae_denorm;
    }
    j["subperiod_mse"] = report.subperiod_mse;
    j["jitter"] = std::isfinite(report.jitter) ? json(report.jitter) : json("inf");
    j["seed"] = report.seed;
    j["epochs_trained"] = report.epochs_trained;
    j["best_epoch"] = report.best_epoch;
    j["best_val_loss"] = report.best_val_loss;
    j["runtime_seconds"] = report.runtime_seconds;
    j["config"] = json::parse(report.config_echo);
    return j.dump(2);
}

ForecastReport run_experiment(const ExperimentConfig& base) {
    auto start = std::chrono::steady_clock::now();
    auto data = prepare_data(base);
    auto cfg = resolved(base, data.v);

    Model model(cfg.model, cfg.seed);
    auto trained = train(model, as_train_samples(data.train), as_train_samples(data.val),
                         cfg.train);

    auto report = evaluate_model(model, data.test, data.stats, cfg.denormalized);
    report.seed = cfg.seed;
    report.epochs_trained = static_cast<int>(trained.history.size());
    report.best_epoch = trained.best_epoch;
    report.best_val_loss = trained.best_val_loss;
    report.config_echo = config_to_json(cfg);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    write_artifacts(cfg, model, trained, report);
    return report;
}

ForecastReport eval_checkpoint(const ExperimentConfig& base, const std::string& checkpoint_path) {
    auto data = prepare_data(base);
    auto cfg = resolved(base, data.v);
    Model model(cfg.model, cfg.seed);
    model.load_checkpoint(checkpoint_path);
    auto report = evaluate_model(model, data.test, data.stats, cfg.denormalized);
    report.seed = cfg.seed;
    report.config_echo = config_to_json(cfg);
    return report;
}

std::string run_ablation_grid(const ExperimentConfig& base, int parallel) {
    // Exp 1: baseline; 2: +CDP; 3: +GCM; 4: +GCM without the learned graph;
    // 5: +CDP +GCM. Only these toggles vary across rows.
    struct Row {
        int id;
        bool cdp, gcm, learned;
    };
    const std::vector<Row> rows = {{1, false, false, false},
                                   {2, true, false, false},
                                   {3, false, true, true},
                                   {4, false, true, false},
                                   {5, true, true, true}};
    std::vector<ForecastReport> reports(rows.size());
    std::vector<ExperimentConfig> configs;
    for (const auto& row : rows) {
        ExperimentConfig cfg = base;
        cfg.model.use_cdp = row.cdp;
        cfg.model.use_gcm = row.gcm;
        cfg.model.use_learned_graph = row.learned;
        if (!cfg.out_dir.empty())
            cfg.out_dir = (std::filesystem::path(base.out_dir) /
                           ("exp" + std::to_string(row.id)))
                              .string();
        configs.push_back(std::move(cfg));
    }

    if (parallel <= 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) reports[i] = run_experiment(configs[i]);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < parallel; ++t)
            pool.emplace_back([&]() {
                for (std::size_t i = next.fetch_add(1); i < rows.size();
                     i = next.fetch_add(1)) {
                    try {
                        reports[i] = run_experiment(configs[i]);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }

    std::ostringstream csv;
    csv << "exp_id,use_cdp,use_gcm,use_learned_graph,mse,mae\n";
    csv.precision(17);
    for (std::size_t i = 0; i < rows.size(); ++i)
        csv << rows[i].id << "," << rows[i].cdp << "," << rows[i].gcm << ","
            << rows[i].learned << "," << reports[i].mse << "," << reports[i].mae << "\n";
    return csv.str();
}

std::string consistency_csv(const ExperimentConfig& cfg, const std::string& checkpoint,
                            const std::string& baseline_checkpoint) {
    auto report = eval_checkpoint(cfg, checkpoint);
    ForecastReport baseline;
    bool has_baseline = !baseline_checkpoint.empty();
    if (has_baseline) {
        ExperimentConfig off = cfg;
        off.model.use_cdp = false;
        baseline = eval_checkpoint(off, baseline_checkpoint);
    }
    std::ostringstream csv;
    csv << (has_baseline ? "part,mse_cdp_on,mse_cdp_off\n" : "part,mse\n");
    csv.precision(17);
    for (std::size_t p = 0; p < report.subperiod_mse.size(); ++p) {
        csv << (p + 1) << "," << report.subperiod_mse[p];
        if (has_baseline) csv << "," << baseline.subperiod_mse[p];
        csv << "\n";
    }
    return csv.str();
}

}  // namespace stec
