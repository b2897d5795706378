#pragma once

#include <cstdint>

#include "stec/tensor.hpp"

namespace stec {

// Trend/seasonal split of a series. seasonal + trend reconstructs the input
// exactly (trend is a moving average, seasonal the residual).
struct DecompPair {
    TensorPtr seasonal;
    TensorPtr trend;
};

struct AutoCorrConfig {
    int num_heads = 2;
    double topk_factor = 1.0;  // k = floor(c * log L) delays kept
};

// Centered per-dimension moving average with edge replication, x is [L, d].
TensorPtr moving_average(const TensorPtr& x, std::int64_t kernel);

DecompPair series_decomp(const TensorPtr& x, std::int64_t kernel);

// Circular autocorrelation scores R(tau) = (1/L) sum_t q(t) k((t - tau) mod L),
// computed per channel via FFT (Wiener-Khinchin) and averaged per head.
// q, k are [L, d] with d divisible by num_heads; result is [num_heads, L].
TensorPtr autocorr_scores(const TensorPtr& q, const TensorPtr& k, int num_heads);

// O(L^2) reference for autocorr_scores; not recorded on any tape.
TensorPtr autocorr_scores_naive(const TensorPtr& q, const TensorPtr& k, int num_heads);

std::int64_t topk_delays(double topk_factor, std::int64_t length);

// Softmax-weighted sum of circularly rolled copies of v over the top-k
// scoring delays. v is [L, d], scores is [L].
TensorPtr time_delay_agg(const TensorPtr& v, const TensorPtr& scores,
                         const AutoCorrConfig& cfg);

// Multi-head projections for one auto-correlation block.
struct AutoCorrParams {
    TensorPtr wq, wk, wv, wo;  // [d_model, d_model]
    TensorPtr bq, bk, bv, bo;  // [d_model]
};

// Full block: project q/k/v, score per head, aggregate delays, concat heads,
// apply the output projection. Keys/values of a different length than the
// query are truncated to the most recent L_q steps or zero-padded.
TensorPtr auto_correlation_layer(const TensorPtr& q, const TensorPtr& keys,
                                 const TensorPtr& values, const AutoCorrConfig& cfg,
                                 const AutoCorrParams& params);

}  // namespace stec
