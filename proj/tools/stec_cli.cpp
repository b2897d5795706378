// Command-line front end; links only the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "stec/stec.h"

namespace {

int report_result(int rc, char* text) {
    if (rc != STEC_OK) {
        std::fprintf(stderr, "error: %s\n", stec_last_error());
        return rc;
    }
    if (text) {
        std::fputs(text, stdout);
        std::fputc('\n', stdout);
        stec_string_free(text);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stec: spatio-temporal forecasting with cascaded decoding"};
    app.require_subcommand(1);

    std::string config, checkpoint, baseline, spec, out_csv;
    int parallel = 1;

    auto* train_cmd = app.add_subcommand("train", "train a model per a JSON config");
    train_cmd->add_option("config", config, "experiment config JSON")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval_cmd->add_option("config", config, "experiment config JSON")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint path")->required();

    auto* cons_cmd = app.add_subcommand(
        "consistency", "per-subperiod MSE CSV for a checkpoint (optionally vs a "
                       "cascade-off baseline checkpoint)");
    cons_cmd->add_option("config", config, "experiment config JSON")->required();
    cons_cmd->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
    cons_cmd->add_option("--baseline-checkpoint", baseline,
                         "cascade-off checkpoint for comparison");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the five-row ablation toggle grid");
    ablate_cmd->add_option("config", config, "experiment config JSON")->required();
    ablate_cmd->add_option("--parallel", parallel, "number of worker threads");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    synth_cmd->add_option("spec", spec, "synthetic spec JSON")->required();
    synth_cmd->add_option("out", out_csv, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    // The call must complete before `text` is read, so keep the two apart
    // (function argument evaluation order is unspecified).
    char* text = nullptr;
    int rc = 1;
    if (train_cmd->parsed())
        rc = stec_experiment_run(config.c_str(), &text);
    else if (eval_cmd->parsed())
        rc = stec_experiment_eval(config.c_str(), checkpoint.c_str(), &text);
    else if (cons_cmd->parsed())
        rc = stec_consistency(config.c_str(), checkpoint.c_str(),
                              baseline.empty() ? nullptr : baseline.c_str(), &text);
    else if (ablate_cmd->parsed())
        rc = stec_ablate(config.c_str(), parallel, &text);
    else if (synth_cmd->parsed())
        rc = stec_synth(spec.c_str(), out_csv.c_str());
    return report_result(rc, text);
}
