#pragma once

#include <cstdint>
#include <vector>

#include "stec/model.hpp"
#include "stec/tensor.hpp"

namespace stec {

struct LossWeights {
    std::vector<double> lambda;  // lambda_N = 1, step-down 0.1 toward earlier intervals
};

// lambda_i = 1 - 0.1 * (N - i); N must stay small enough for all weights to
// remain positive.
LossWeights loss_weights(std::int64_t n);

struct TrainConfig {
    double lr = 1e-4;
    std::int64_t batch_size = 16;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int patience = 3;
    int max_epochs = 30;
    std::uint64_t seed = 0;
};

// Weighted interval loss: sum_i lambda_i * MSE over interval i.
TensorPtr joint_loss(const std::vector<TensorPtr>& y_list, const TensorPtr& target,
                     const IntervalPartition& partition, const LossWeights& weights);

class Adam {
public:
    Adam(std::vector<TensorPtr> params, const TrainConfig& cfg);
    void step();
    void zero_grads();

private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

// Early-stopping bookkeeping: an epoch improves when its validation loss is
// lower than the best so far by at least 1e-7; `patience` consecutive
// non-improving epochs end training.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    // Feed one epoch's validation loss; returns true if it improved the best.
    bool observe(double val_loss);
    bool should_stop() const { return stale_ >= patience_; }
    int best_epoch() const { return best_epoch_; }  // 1-based
    double best_loss() const { return best_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = -1;
    int stale_ = 0;
    double best_ = 1e308;
};

struct TrainSample {
    TensorPtr input;   // [T_in, V]
    TensorPtr target;  // [T_pred, V]
};

struct EpochStats {
    int epoch;
    double train_loss;
    double val_loss;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::vector<std::vector<double>> best_params;  // snapshot, same order as model params
};

// Seeded minibatch loop with early stopping on the validation joint loss.
// The best parameter snapshot is restored into the model before returning.
TrainResult train(Model& model, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& cfg);

}  // namespace stec
