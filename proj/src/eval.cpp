#include "stec/eval.hpp"

#include <cmath>
#include <limits>

namespace stec {

double mse_metric(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw TensorError("mse_metric: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double mae_metric(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw TensorError("mae_metric: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

SubperiodResult subperiod_consistency(const std::vector<double>& pred,
                                      const std::vector<double>& target,
                                      std::int64_t horizon, std::int64_t row_size,
                                      std::int64_t parts) {
    if (horizon < parts) throw TensorError("subperiod_consistency: horizon < parts");
    if (pred.size() != target.size() ||
        pred.size() % static_cast<std::size_t>(horizon * row_size) != 0)
        throw TensorError("subperiod_consistency: size mismatch");
    std::int64_t windows = static_cast<std::int64_t>(pred.size()) / (horizon * row_size);
    std::int64_t base = horizon / parts;

    SubperiodResult result;
    for (std::int64_t p = 0; p < parts; ++p) {
        std::int64_t begin = p * base;
        std::int64_t end = p + 1 == parts ? horizon : (p + 1) * base;  // remainder to last
        double acc = 0.0;
        std::int64_t count = 0;
        for (std::int64_t w = 0; w < windows; ++w)
            for (std::int64_t t = begin; t < end; ++t)
                for (std::int64_t c = 0; c < row_size; ++c) {
                    auto i = static_cast<std::size_t>((w * horizon + t) * row_size + c);
                    double d = pred[i] - target[i];
                    acc += d * d;
                    ++count;
                }
        result.mse.push_back(acc / static_cast<double>(count));
    }
    result.jitter = 1.0;
    for (std::size_t p = 0; p + 1 < result.mse.size(); ++p) {
        double a = result.mse[p], b = result.mse[p + 1];
        if (a == 0.0 || b == 0.0) {
            result.jitter = std::numeric_limits<double>::infinity();
            break;
        }
        result.jitter = std::max(result.jitter, std::max(a, b) / std::min(a, b));
    }
    return result;
}

ForecastReport evaluate_model(const Model& model, const std::vector<WindowSample>& test_windows,
                              const NormStats& stats, bool denormalized) {
    if (test_windows.empty()) throw TensorError("evaluate_model: no test windows");
    std::int64_t horizon = model.config().T_pred;
    std::int64_t v = model.config().V;
    std::vector<double> pred, target;
    pred.reserve(test_windows.size() * static_cast<std::size_t>(horizon * v));
    target.reserve(pred.capacity());
    for (const auto& w : test_windows) {
        auto state = model.forward(w.input);
        pred.insert(pred.end(), state.forecast->data.begin(), state.forecast->data.end());
        target.insert(target.end(), w.target->data.begin(), w.target->data.end());
    }

    ForecastReport report;
    report.mse = mse_metric(pred, target);
    report.mae = mae_metric(pred, target);
    auto sub = subperiod_consistency(pred, target, horizon, v);
    report.subperiod_mse = sub.mse;
    report.jitter = sub.jitter;

    if (denormalized) {
        std::vector<double> pred_dn = pred, target_dn = target;
        std::size_t vcols = static_cast<std::size_t>(v);
        for (std::size_t i = 0; i < pred_dn.size(); ++i) {
            std::size_t c = i % vcols;
            pred_dn[i] = pred_dn[i] * stats.std_dev[c] + stats.mean[c];
            target_dn[i] = target_dn[i] * stats.std_dev[c] + stats.mean[c];
        }
        report.mse_denorm = mse_metric(pred_dn, target_dn);
        report.mae_denorm = mae_metric(pred_dn, target_dn);
    }
    return report;
}

}  // namespace stec
