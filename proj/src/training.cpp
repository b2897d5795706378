#include "stec/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace stec {

LossWeights loss_weights(std::int64_t n) {
    if (n < 1 || n > 10)
        throw TensorError("loss_weights: N must be in [1, 10] to keep weights positive");
    LossWeights w;
    for (std::int64_t i = 1; i <= n; ++i)
        w.lambda.push_back(1.0 - 0.1 * static_cast<double>(n - i));
    return w;
}

TensorPtr joint_loss(const std::vector<TensorPtr>& y_list, const TensorPtr& target,
                     const IntervalPartition& partition, const LossWeights& weights) {
    std::int64_t n = partition.num_intervals();
    if (static_cast<std::int64_t>(y_list.size()) != n ||
        static_cast<std::int64_t>(weights.lambda.size()) != n)
        throw TensorError("joint_loss: y_list/weights do not match the partition");
    if (target->shape[0] != partition.boundaries.back())
        throw TensorError("joint_loss: target length does not cover the partition");
    TensorPtr total;
    for (std::int64_t i = 0; i < n; ++i) {
        auto target_i = slice_rows(target, partition.begin(i), partition.end(i));
        auto term = mul_scalar(mse(y_list[static_cast<std::size_t>(i)], target_i),
                               weights.lambda[static_cast<std::size_t>(i)]);
        total = total ? add(total, term) : term;
    }
    return total;
}

Adam::Adam(std::vector<TensorPtr> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.lr),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p->data.size(), 0.0);
        v_.emplace_back(p->data.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = *params_[pi];
        p.ensure_grad();
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            double g = p.grad[i];
            m_[pi][i] = beta1_ * m_[pi][i] + (1.0 - beta1_) * g;
            v_[pi][i] = beta2_ * v_[pi][i] + (1.0 - beta2_) * g * g;
            double mhat = m_[pi][i] / bc1;
            double vhat = v_[pi][i] / bc2;
            p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

bool EarlyStopper::observe(double val_loss) {
    ++epoch_;
    if (val_loss < best_ - 1e-7) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        stale_ = 0;
        return true;
    }
    ++stale_;
    return false;
}

namespace {

double evaluate_joint_loss(const Model& model, const std::vector<TrainSample>& samples,
                           const LossWeights& weights) {
    double total = 0.0;
    for (const auto& s : samples) {
        auto state = model.forward(s.input);
        auto loss = joint_loss(state.predictions, s.target, model.partition(), weights);
        total += loss->data[0];
    }
    return total / static_cast<double>(samples.size());
}

std::vector<std::vector<double>> snapshot(const Model& model) {
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : model.named_parameters()) out.push_back(t->data);
    return out;
}

void restore(Model& model, const std::vector<std::vector<double>>& snap) {
    const auto& params = model.named_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second->data = snap[i];
}

}  // namespace

TrainResult train(Model& model, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& cfg) {
    if (cfg.patience < 1) throw TensorError("train: patience must be >= 1");
    if (cfg.lr <= 0.0) throw TensorError("train: lr must be positive");
    if (train_set.empty() || val_set.empty())
        throw TensorError("train: empty train or validation set");

    auto weights = loss_weights(model.partition().num_intervals());
    Adam optimizer(model.trainable_parameters(), cfg);
    std::mt19937_64 rng(cfg.seed);

    TrainResult result;
    EarlyStopper stopper(cfg.patience);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::int64_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            optimizer.zero_grads();
            double batch_loss_value = 0.0;
            try {
                Tape tape;
                TensorPtr batch_loss;
                for (std::size_t i = start; i < end; ++i) {
                    const auto& s = train_set[order[i]];
                    auto state = model.forward(s.input);
                    auto loss = joint_loss(state.predictions, s.target, model.partition(),
                                           weights);
                    batch_loss = batch_loss ? add(batch_loss, loss) : loss;
                }
                batch_loss = mul_scalar(batch_loss, 1.0 / static_cast<double>(end - start));
                batch_loss_value = batch_loss->data[0];
                tape.backward(batch_loss);
            } catch (const TensorError& e) {
                double pnorm = 0.0;
                for (const auto& [name, t] : model.named_parameters())
                    for (double v : t->data) pnorm += v * v;
                throw TensorError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batches) +
                                  ", parameter norm " + std::to_string(std::sqrt(pnorm)) +
                                  ": " + e.what());
            }
            optimizer.step();
            epoch_loss += batch_loss_value;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);

        double val_loss = evaluate_joint_loss(model, val_set, weights);
        result.history.push_back(EpochStats{epoch, epoch_loss, val_loss});

        if (stopper.observe(val_loss)) {
            result.best_epoch = epoch;
            result.best_val_loss = val_loss;
            result.best_params = snapshot(model);
        } else if (stopper.should_stop()) {
            break;
        }
    }
    restore(model, result.best_params);
    return result;
}

}  // namespace stec
