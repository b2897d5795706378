#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stec/graph_module.hpp"
#include "stec/series_ops.hpp"
#include "stec/tensor.hpp"

namespace stec {

struct ModelConfig {
    std::int64_t V = 0;
    std::int64_t T_in = 96;
    std::int64_t T_pred = 96;
    std::int64_t token_len = -1;  // -1 means T_in / 2
    std::int64_t d_model = 16;
    int num_heads = 2;
    double topk_factor = 1.0;
    std::int64_t kernel = 25;  // decomposition moving-average window
    std::int64_t C_in = 16;
    std::int64_t C_mid = 8;
    std::int64_t C_out = 16;
    double w_gcm = 0.5;
    std::vector<double> interval_fractions = {0.25, 0.75};
    int layers_per_stage = 2;
    std::int64_t start_token_extra = 0;
    int num_encoder_layers = 1;

    bool use_gcm = true;
    bool use_learned_graph = true;
    bool use_cdp = true;

    std::int64_t effective_token_len() const { return token_len < 0 ? T_in / 2 : token_len; }
    std::int64_t d_ff() const { return 2 * d_model; }
    // Validates field ranges and the interval partition; throws TensorError.
    void validate() const;
};

struct IntervalPartition {
    std::vector<std::int64_t> boundaries;  // 0 = b_0 < ... < b_N = T_pred
    std::int64_t num_intervals() const {
        return static_cast<std::int64_t>(boundaries.size()) - 1;
    }
    std::int64_t begin(std::int64_t i) const { return boundaries[static_cast<std::size_t>(i)]; }
    std::int64_t end(std::int64_t i) const { return boundaries[static_cast<std::size_t>(i + 1)]; }
};

// Boundaries from cumulative rounded fractions; errors on empty intervals.
IntervalPartition make_partition(const ModelConfig& cfg);

struct LinearParams {
    TensorPtr w;
    TensorPtr b;
};

struct FeedForwardParams {
    TensorPtr w1, b1, w2, b2;
};

struct EncoderLayerParams {
    AutoCorrParams self_attn;
    FeedForwardParams ffn;
    LinearParams gcm_proj;  // (C_out * V) -> d_model, per time step
};

struct DecoderLayerParams {
    AutoCorrParams self_attn;
    AutoCorrParams cross_attn;
    FeedForwardParams ffn;
};

struct DecoderStageParams {
    std::vector<DecoderLayerParams> layers;
    LinearParams head;  // d_model -> V
};

// Per-stage state of the decoding chain: the constructed
// query, the stage output over the full span, and the owned interval slice.
struct DecoderChainState {
    std::vector<TensorPtr> queries;      // q_i, [token_len + T_pred, V]
    std::vector<TensorPtr> outputs;      // Q_i, same shape in V-space
    std::vector<TensorPtr> predictions;  // y_i, [|I_i|, V]
    TensorPtr forecast;                  // [T_pred, V]
};

TensorPtr positional_encoding(std::int64_t length, std::int64_t d_model);

// Query construction for the cascaded decoder chain. Queries live in V-space
// and keep a constant length token_len + T_pred across stages.
TensorPtr build_first_query(const TensorPtr& x_window, const ModelConfig& cfg);
TensorPtr build_next_query(std::int64_t stage, const TensorPtr& token,
                           const std::vector<TensorPtr>& predictions,
                           const TensorPtr& prev_output, const IntervalPartition& partition,
                           const ModelConfig& cfg);

class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const IntervalPartition& partition() const { return partition_; }

    TensorPtr embed(const TensorPtr& x, const LinearParams& params) const;
    TensorPtr encoder_forward(const TensorPtr& x) const;
    TensorPtr decoder_stage_forward(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                                    std::int64_t stage) const;
    DecoderChainState cdp_forward(const TensorPtr& x_window, const TensorPtr& enc_features) const;

    // Full pass: encoder once, decoders share its features.
    DecoderChainState forward(const TensorPtr& x_window) const;

    const std::vector<std::pair<std::string, TensorPtr>>& named_parameters() const {
        return params_;
    }
    // Parameters updated by the optimizer; excludes A when the learned graph
    // is disabled (it then stays at its zero initialization).
    std::vector<TensorPtr> trainable_parameters() const;
    void zero_grads();

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    const SemiAdaptiveGraphParams& graph_params() const { return gcm_; }
    LinearParams& decoder_embedding() { return embed_dec_; }

private:
    TensorPtr register_param(const std::string& name, std::vector<std::int64_t> shape,
                             std::mt19937_64& rng, double scale);
    AutoCorrParams make_attn(const std::string& prefix, std::mt19937_64& rng,
                             bool output_biases);
    FeedForwardParams make_ffn(const std::string& prefix, std::mt19937_64& rng,
                               bool output_bias);

    ModelConfig cfg_;
    IntervalPartition partition_;
    AutoCorrConfig ac_cfg_;
    std::vector<std::pair<std::string, TensorPtr>> params_;

    LinearParams embed_enc_;
    LinearParams embed_dec_;
    std::vector<EncoderLayerParams> encoder_layers_;
    SemiAdaptiveGraphParams gcm_;
    std::vector<DecoderStageParams> stages_;
};

}  // namespace stec
