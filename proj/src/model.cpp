#include "stec/model.hpp"

#include <cmath>
#include <numeric>

#include "stec/checkpoint.hpp"

namespace stec {

void ModelConfig::validate() const {
    if (V <= 0) throw TensorError("ModelConfig: V must be positive");
    if (T_in <= 0 || T_pred <= 0) throw TensorError("ModelConfig: lengths must be positive");
    if (effective_token_len() > T_in)
        throw TensorError("ModelConfig: token_len exceeds T_in");
    if (d_model % num_heads != 0)
        throw TensorError("ModelConfig: d_model not divisible by num_heads");
    if (kernel % 2 == 0) throw TensorError("ModelConfig: decomposition kernel must be odd");
    if (interval_fractions.empty())
        throw TensorError("ModelConfig: interval_fractions empty");
    for (double f : interval_fractions)
        if (f <= 0.0) throw TensorError("ModelConfig: interval fractions must be positive");
    make_partition(*this);  // throws on empty intervals
}

IntervalPartition make_partition(const ModelConfig& cfg) {
    std::vector<double> fractions =
        cfg.use_cdp ? cfg.interval_fractions : std::vector<double>{1.0};
    double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
    IntervalPartition partition;
    partition.boundaries.push_back(0);
    double cum = 0.0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        cum += fractions[i] / total;
        std::int64_t b = i + 1 == fractions.size()
                             ? cfg.T_pred
                             : std::llround(cum * static_cast<double>(cfg.T_pred));
        if (b <= partition.boundaries.back())
            throw TensorError("make_partition: interval " + std::to_string(i + 1) +
                              " would be empty for T_pred=" + std::to_string(cfg.T_pred));
        partition.boundaries.push_back(b);
    }
    return partition;
}

TensorPtr positional_encoding(std::int64_t length, std::int64_t d_model) {
    std::vector<double> data(static_cast<std::size_t>(length * d_model));
    for (std::int64_t pos = 0; pos < length; ++pos)
        for (std::int64_t i = 0; i < d_model; ++i) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * (i / 2)) /
                                                 static_cast<double>(d_model));
            data[static_cast<std::size_t>(pos * d_model + i)] =
                (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return make_tensor({length, d_model}, std::move(data));
}

TensorPtr build_first_query(const TensorPtr& x_window, const ModelConfig& cfg) {
    std::int64_t token_len = cfg.effective_token_len();
    auto pad = zeros({cfg.T_pred, cfg.V});
    if (token_len == 0) return pad;
    auto token = slice_rows(x_window, x_window->shape[0] - token_len, x_window->shape[0]);
    return concat_rows({token, pad});
}

TensorPtr build_next_query(std::int64_t stage, const TensorPtr& token,
                           const std::vector<TensorPtr>& predictions,
                           const TensorPtr& prev_output, const IntervalPartition& partition,
                           const ModelConfig& cfg) {
    if (stage < 2) throw TensorError("build_next_query: stage must be >= 2");
    if (static_cast<std::int64_t>(predictions.size()) < stage - 1)
        throw TensorError("build_next_query: missing prior stage predictions");
    std::int64_t token_len = cfg.effective_token_len();
    std::vector<TensorPtr> parts;
    if (token) parts.push_back(token);
    for (std::int64_t j = 0; j < stage - 1; ++j)
        parts.push_back(predictions[static_cast<std::size_t>(j)]);
    // Remaining span comes from the previous stage's output over I_i..I_N.
    std::int64_t b = partition.begin(stage - 1);
    parts.push_back(slice_rows(prev_output, token_len + b, token_len + cfg.T_pred));
    return concat_rows(parts);
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    partition_ = make_partition(cfg_);
    ac_cfg_ = AutoCorrConfig{cfg_.num_heads, cfg_.topk_factor};
    std::mt19937_64 rng(seed);

    auto xavier = [](std::int64_t fan_in, std::int64_t fan_out) {
        return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    };
    auto linear = [&](const std::string& name, std::int64_t in, std::int64_t out) {
        LinearParams p;
        p.w = register_param(name + ".w", {in, out}, rng, xavier(in, out));
        p.b = register_param(name + ".b", {out}, rng, 0.0);
        return p;
    };
    auto conv = [&](const std::string& name, std::int64_t cout, std::int64_t cin,
                    std::int64_t k, TensorPtr& w, TensorPtr& b) {
        w = register_param(name + ".w", {cout, cin, k}, rng, xavier(cin * k, cout * k));
        b = register_param(name + ".b", {cout}, rng, 0.0);
    };

    // The encoder keeps only the seasonal component after each layer, so any
    // bias that adds a time-constant channel offset there is stripped by the
    // moving-average detrending and can never receive gradient. Those biases
    // (embedding bias, attention value/output biases, second feed-forward
    // bias) are therefore omitted on the encoder side. The decoder carries
    // the trend components through to its head, so it keeps all biases.
    embed_enc_.w =
        register_param("embed_enc.w", {cfg_.V, cfg_.d_model}, rng, xavier(cfg_.V, cfg_.d_model));
    embed_dec_ = linear("embed_dec", cfg_.V, cfg_.d_model);

    conv("gcm.f", cfg_.C_in, 1, 3, gcm_.w_f, gcm_.b_f);
    conv("gcm.phi", cfg_.C_mid, cfg_.C_in, 1, gcm_.w_phi, gcm_.b_phi);
    // No bias on the psi embedding: a uniform shift of every node's psi
    // vector adds the same constant to each row of the similarity logits and
    // cancels in the row softmax, so such a bias could never train.
    gcm_.w_psi = register_param("gcm.psi.w", {cfg_.C_mid, cfg_.C_in, 1}, rng,
                                xavier(cfg_.C_in, cfg_.C_mid));
    conv("gcm.g", cfg_.C_out, cfg_.C_in, 1, gcm_.w_g, gcm_.b_g);
    conv("gcm.h", cfg_.C_out, cfg_.C_in, 1, gcm_.w_h, gcm_.b_h);
    // Near-zero start: the model begins as computed-graph-only and learns
    // corrections through A.
    gcm_.A = register_param("gcm.A", {cfg_.V, cfg_.V}, rng,
                            cfg_.use_learned_graph ? 1e-3 : 0.0);

    for (int l = 0; l < cfg_.num_encoder_layers; ++l) {
        std::string prefix = "encoder." + std::to_string(l);
        EncoderLayerParams layer;
        layer.self_attn = make_attn(prefix + ".self", rng, /*output_biases=*/false);
        layer.ffn = make_ffn(prefix + ".ffn", rng, /*output_bias=*/false);
        layer.gcm_proj = linear(prefix + ".gcm_proj", cfg_.C_out * cfg_.V, cfg_.d_model);
        encoder_layers_.push_back(std::move(layer));
    }

    std::int64_t stages = partition_.num_intervals();
    for (std::int64_t s = 0; s < stages; ++s) {
        std::string sp = "decoder." + std::to_string(s);
        DecoderStageParams stage;
        for (int l = 0; l < cfg_.layers_per_stage; ++l) {
            std::string lp = sp + "." + std::to_string(l);
            DecoderLayerParams layer;
            layer.self_attn = make_attn(lp + ".self", rng, /*output_biases=*/true);
            layer.cross_attn = make_attn(lp + ".cross", rng, /*output_biases=*/true);
            layer.ffn = make_ffn(lp + ".ffn", rng, /*output_bias=*/true);
            stage.layers.push_back(std::move(layer));
        }
        stage.head = linear(sp + ".head", cfg_.d_model, cfg_.V);
        stages_.push_back(std::move(stage));
    }
}

TensorPtr Model::register_param(const std::string& name, std::vector<std::int64_t> shape,
                                std::mt19937_64& rng, double scale) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> data(static_cast<std::size_t>(n), 0.0);
    if (scale > 0.0) {
        std::uniform_real_distribution<double> dist(-scale, scale);
        for (auto& v : data) v = dist(rng);
    }
    auto t = make_tensor(std::move(shape), std::move(data), true);
    params_.emplace_back(name, t);
    return t;
}

AutoCorrParams Model::make_attn(const std::string& prefix, std::mt19937_64& rng,
                                bool output_biases) {
    double s = std::sqrt(6.0 / static_cast<double>(2 * cfg_.d_model));
    AutoCorrParams p;
    p.wq = register_param(prefix + ".wq", {cfg_.d_model, cfg_.d_model}, rng, s);
    p.wk = register_param(prefix + ".wk", {cfg_.d_model, cfg_.d_model}, rng, s);
    p.wv = register_param(prefix + ".wv", {cfg_.d_model, cfg_.d_model}, rng, s);
    p.wo = register_param(prefix + ".wo", {cfg_.d_model, cfg_.d_model}, rng, s);
    // No biases on the query/key projections: they shift every delay score
    // equally and vanish in the softmax, so they could never train.
    if (output_biases) {
        p.bv = register_param(prefix + ".bv", {cfg_.d_model}, rng, 0.0);
        p.bo = register_param(prefix + ".bo", {cfg_.d_model}, rng, 0.0);
    }
    return p;
}

FeedForwardParams Model::make_ffn(const std::string& prefix, std::mt19937_64& rng,
                                  bool output_bias) {
    FeedForwardParams p;
    double s1 = std::sqrt(6.0 / static_cast<double>(cfg_.d_model + cfg_.d_ff()));
    p.w1 = register_param(prefix + ".w1", {cfg_.d_model, cfg_.d_ff()}, rng, s1);
    p.b1 = register_param(prefix + ".b1", {cfg_.d_ff()}, rng, 0.0);
    p.w2 = register_param(prefix + ".w2", {cfg_.d_ff(), cfg_.d_model}, rng, s1);
    if (output_bias) p.b2 = register_param(prefix + ".b2", {cfg_.d_model}, rng, 0.0);
    return p;
}

TensorPtr Model::embed(const TensorPtr& x, const LinearParams& params) const {
    auto projected = matmul(x, params.w);
    if (params.b) projected = add(projected, params.b);
    return add(projected, positional_encoding(x->shape[0], cfg_.d_model));
}

namespace {

TensorPtr feed_forward(const TensorPtr& x, const FeedForwardParams& p) {
    auto hidden = gelu(add(matmul(x, p.w1), p.b1));
    auto out = matmul(hidden, p.w2);
    return p.b2 ? add(out, p.b2) : out;
}

}  // namespace

TensorPtr Model::encoder_forward(const TensorPtr& x) const {
    if (x->shape[0] != cfg_.T_in || x->shape[1] != cfg_.V)
        throw TensorError("encoder_forward: input must be [T_in, V]");
    double w = cfg_.use_gcm ? cfg_.w_gcm : 0.0;
    auto h = embed(x, embed_enc_);
    TensorPtr x_nodes;  // [V, T_in], shared by all layers' graph branches
    if (w != 0.0) x_nodes = transpose2d(x);
    for (const auto& layer : encoder_layers_) {
        TensorPtr attn_out;
        if (w != 1.0) {
            auto a1 = series_decomp(
                add(auto_correlation_layer(h, h, h, ac_cfg_, layer.self_attn), h),
                cfg_.kernel);
            auto a2 = series_decomp(add(feed_forward(a1.seasonal, layer.ffn), a1.seasonal),
                                    cfg_.kernel);
            attn_out = a2.seasonal;
        }
        TensorPtr gcm_out;
        if (w != 0.0) {
            auto z = gcm_forward(x_nodes, gcm_);  // [C_out, V, T_in]
            auto per_step = reshape(permute3d(z, 2, 0, 1), {cfg_.T_in, cfg_.C_out * cfg_.V});
            gcm_out = add(matmul(per_step, layer.gcm_proj.w), layer.gcm_proj.b);
        }
        if (w == 0.0)
            h = attn_out;
        else if (w == 1.0)
            h = gcm_out;
        else
            h = add(mul_scalar(attn_out, 1.0 - w), mul_scalar(gcm_out, w));
    }
    return h;
}

TensorPtr Model::decoder_stage_forward(const TensorPtr& q, const TensorPtr& k,
                                       const TensorPtr& v, std::int64_t stage) const {
    const auto& sp = stages_[static_cast<std::size_t>(stage)];
    auto h = embed(q, embed_dec_);
    for (const auto& layer : sp.layers) {
        auto d0 = series_decomp(h, cfg_.kernel);
        auto d1 = series_decomp(
            add(auto_correlation_layer(d0.seasonal, d0.seasonal, d0.seasonal, ac_cfg_,
                                       layer.self_attn),
                d0.seasonal),
            cfg_.kernel);
        auto d2 = series_decomp(
            add(auto_correlation_layer(d1.seasonal, k, v, ac_cfg_, layer.cross_attn),
                d1.seasonal),
            cfg_.kernel);
        auto d3 = series_decomp(add(feed_forward(d2.seasonal, layer.ffn), d2.seasonal),
                                cfg_.kernel);
        h = add(add(add(d3.seasonal, d0.trend), add(d1.trend, d2.trend)), d3.trend);
    }
    return add(matmul(h, sp.head.w), sp.head.b);
}

DecoderChainState Model::cdp_forward(const TensorPtr& x_window,
                                     const TensorPtr& enc_features) const {
    std::int64_t token_len = cfg_.effective_token_len();
    std::int64_t N = partition_.num_intervals();
    TensorPtr token = token_len > 0
                          ? slice_rows(x_window, x_window->shape[0] - token_len,
                                       x_window->shape[0])
                          : nullptr;
    DecoderChainState state;
    for (std::int64_t i = 0; i < N; ++i) {
        TensorPtr q = i == 0 ? build_first_query(x_window, cfg_)
                             : build_next_query(i + 1, token, state.predictions,
                                                state.outputs.back(), partition_, cfg_);
        auto Q = decoder_stage_forward(q, enc_features, enc_features, i);
        auto y = slice_rows(Q, token_len + partition_.begin(i), token_len + partition_.end(i));
        state.queries.push_back(q);
        state.outputs.push_back(Q);
        state.predictions.push_back(y);
    }
    state.forecast = state.predictions.size() == 1 ? state.predictions[0]
                                                   : concat_rows(state.predictions);
    return state;
}

DecoderChainState Model::forward(const TensorPtr& x_window) const {
    auto enc = encoder_forward(x_window);
    return cdp_forward(x_window, enc);
}

std::vector<TensorPtr> Model::trainable_parameters() const {
    std::vector<TensorPtr> out;
    for (const auto& [name, t] : params_) {
        if (!cfg_.use_learned_graph && t == gcm_.A) continue;
        if (!cfg_.use_gcm && name.rfind("gcm", 0) == 0) continue;
        out.push_back(t);
    }
    return out;
}

void Model::zero_grads() {
    for (auto& [name, t] : params_) t->zero_grad();
}

void Model::save_checkpoint(const std::string& path) const {
    save_parameters(path, params_);
}

void Model::load_checkpoint(const std::string& path) {
    load_parameters(path, params_);
}

}  // namespace stec
