#include "stec/series_ops.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numeric>
#include <vector>

namespace stec {

namespace {

// fftw plan creation is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

struct FftPlans {
    fftw_plan fwd;
    fftw_plan bwd;
};

// Per-length plan cache. Plans are created with FFTW_ESTIMATE for
// deterministic results and executed via the new-array interface.
FftPlans plans_for(std::int64_t L) {
    static std::map<std::int64_t, FftPlans> cache;
    std::lock_guard<std::mutex> lock(fftw_mutex());
    auto it = cache.find(L);
    if (it != cache.end()) return it->second;
    std::vector<double> real(static_cast<std::size_t>(L));
    std::vector<std::complex<double>> cplx(static_cast<std::size_t>(L / 2 + 1));
    FftPlans p;
    p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(L), real.data(),
                                 reinterpret_cast<fftw_complex*>(cplx.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.bwd = fftw_plan_dft_c2r_1d(static_cast<int>(L),
                                 reinterpret_cast<fftw_complex*>(cplx.data()), real.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(L, p);
    return p;
}

void fft_forward(std::int64_t L, double* in, std::complex<double>* out) {
    auto p = plans_for(L);
    fftw_execute_dft_r2c(p.fwd, in, reinterpret_cast<fftw_complex*>(out));
}

void fft_backward(std::int64_t L, std::complex<double>* in, double* out) {
    auto p = plans_for(L);
    fftw_execute_dft_c2r(p.bwd, reinterpret_cast<fftw_complex*>(in), out);
}

void check_qk(const TensorPtr& q, const TensorPtr& k, int num_heads) {
    if (q->shape.size() != 2 || k->shape != q->shape)
        throw TensorError("autocorr_scores: q and k must be [L, d] of equal shape");
    if (q->shape[0] < 2) throw TensorError("autocorr_scores: L must be >= 2");
    if (num_heads < 1 || q->shape[1] % num_heads != 0)
        throw TensorError("autocorr_scores: d must be divisible by num_heads");
}

// Shared O(L^2) kernel for the naive oracle and the analytic backward.
std::vector<double> autocorr_data_naive(const Tensor& q, const Tensor& k, int num_heads) {
    std::int64_t L = q.shape[0], d = q.shape[1];
    std::int64_t dh = d / num_heads;
    std::vector<double> out(static_cast<std::size_t>(num_heads * L), 0.0);
    for (std::int64_t c = 0; c < d; ++c) {
        std::int64_t h = c / dh;
        for (std::int64_t tau = 0; tau < L; ++tau) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < L; ++t)
                acc += q.data[static_cast<std::size_t>(t * d + c)] *
                       k.data[static_cast<std::size_t>(((t - tau + L) % L) * d + c)];
            out[static_cast<std::size_t>(h * L + tau)] += acc / static_cast<double>(L * dh);
        }
    }
    return out;
}

}  // namespace

TensorPtr moving_average(const TensorPtr& x, std::int64_t kernel) {
    if (x->shape.size() != 2) throw TensorError("moving_average: input must be [L, d]");
    if (kernel % 2 == 0) throw TensorError("moving_average: kernel must be odd");
    std::int64_t L = x->shape[0], d = x->shape[1];
    if (kernel > 2 * L - 1) throw TensorError("moving_average: kernel exceeds 2L-1");
    std::int64_t half = kernel / 2;

    auto out = std::make_shared<Tensor>();
    out->shape = x->shape;
    out->data.assign(x->data.size(), 0.0);
    auto clampi = [L](std::int64_t t) { return std::min(std::max(t, std::int64_t{0}), L - 1); };
    double inv_k = 1.0 / static_cast<double>(kernel);
    for (std::int64_t t = 0; t < L; ++t)
        for (std::int64_t j = -half; j <= half; ++j) {
            std::int64_t s = clampi(t + j);
            for (std::int64_t c = 0; c < d; ++c)
                out->data[static_cast<std::size_t>(t * d + c)] +=
                    inv_k * x->data[static_cast<std::size_t>(s * d + c)];
        }
    auto backward = [x, out, L, d, half, clampi, inv_k]() {
        if (x->adjoint.empty()) return;
        for (std::int64_t t = 0; t < L; ++t)
            for (std::int64_t j = -half; j <= half; ++j) {
                std::int64_t s = clampi(t + j);
                for (std::int64_t c = 0; c < d; ++c)
                    x->adjoint[static_cast<std::size_t>(s * d + c)] +=
                        inv_k * out->adjoint[static_cast<std::size_t>(t * d + c)];
            }
    };
    Tape* tape = Tape::active();
    if (tape && x->requires_grad) {
        out->requires_grad = true;
        out->tape_id = tape->record(out, {x}, backward);
    }
    for (double v : out->data)
        if (!std::isfinite(v)) throw TensorError("moving_average: non-finite value in result");
    return out;
}

DecompPair series_decomp(const TensorPtr& x, std::int64_t kernel) {
    auto trend = moving_average(x, kernel);
    auto seasonal = sub(x, trend);
    return DecompPair{seasonal, trend};
}

TensorPtr autocorr_scores(const TensorPtr& q, const TensorPtr& k, int num_heads) {
    check_qk(q, k, num_heads);
    std::int64_t L = q->shape[0], d = q->shape[1];
    std::int64_t dh = d / num_heads;

    auto out = std::make_shared<Tensor>();
    out->shape = {num_heads, L};
    out->data.assign(static_cast<std::size_t>(num_heads * L), 0.0);

    // Wiener-Khinchin: per channel, IFFT(FFT(q) * conj(FFT(k))) / L^2 gives
    // (1/L) sum_t q(t) k((t - tau) mod L); average channels within each head.
    std::vector<double> qc(static_cast<std::size_t>(L)), kc(static_cast<std::size_t>(L));
    std::vector<std::complex<double>> Qf(static_cast<std::size_t>(L / 2 + 1));
    std::vector<std::complex<double>> Kf(static_cast<std::size_t>(L / 2 + 1));
    std::vector<double> corr(static_cast<std::size_t>(L));
    double scale = 1.0 / (static_cast<double>(L) * static_cast<double>(L) *
                          static_cast<double>(dh));
    for (std::int64_t c = 0; c < d; ++c) {
        for (std::int64_t t = 0; t < L; ++t) {
            qc[static_cast<std::size_t>(t)] = q->data[static_cast<std::size_t>(t * d + c)];
            kc[static_cast<std::size_t>(t)] = k->data[static_cast<std::size_t>(t * d + c)];
        }
        fft_forward(L, qc.data(), Qf.data());
        fft_forward(L, kc.data(), Kf.data());
        for (std::size_t w = 0; w < Qf.size(); ++w) Qf[w] *= std::conj(Kf[w]);
        fft_backward(L, Qf.data(), corr.data());
        std::int64_t h = c / dh;
        for (std::int64_t tau = 0; tau < L; ++tau)
            out->data[static_cast<std::size_t>(h * L + tau)] +=
                corr[static_cast<std::size_t>(tau)] * scale;
    }

    auto backward = [q, k, out, L, d, dh]() {
        double inv = 1.0 / static_cast<double>(L * dh);
        for (std::int64_t c = 0; c < d; ++c) {
            std::int64_t h = c / dh;
            const double* g = out->adjoint.data() + h * L;
            for (std::int64_t tau = 0; tau < L; ++tau) {
                double gv = g[tau] * inv;
                if (gv == 0.0) continue;
                for (std::int64_t t = 0; t < L; ++t) {
                    std::int64_t tk = (t - tau + L) % L;
                    if (!q->adjoint.empty())
                        q->adjoint[static_cast<std::size_t>(t * d + c)] +=
                            gv * k->data[static_cast<std::size_t>(tk * d + c)];
                    if (!k->adjoint.empty())
                        k->adjoint[static_cast<std::size_t>(tk * d + c)] +=
                            gv * q->data[static_cast<std::size_t>(t * d + c)];
                }
            }
        }
    };
    Tape* tape = Tape::active();
    if (tape && (q->requires_grad || k->requires_grad)) {
        out->requires_grad = true;
        out->tape_id = tape->record(out, {q, k}, backward);
    }
    for (double v : out->data)
        if (!std::isfinite(v)) throw TensorError("autocorr_scores: non-finite value in result");
    return out;
}

TensorPtr autocorr_scores_naive(const TensorPtr& q, const TensorPtr& k, int num_heads) {
    check_qk(q, k, num_heads);
    auto data = autocorr_data_naive(*q, *k, num_heads);
    return make_tensor({num_heads, q->shape[0]}, std::move(data));
}

std::int64_t topk_delays(double topk_factor, std::int64_t length) {
    auto k = static_cast<std::int64_t>(std::floor(topk_factor * std::log(static_cast<double>(length))));
    return std::clamp<std::int64_t>(k, 1, length - 1);
}

TensorPtr time_delay_agg(const TensorPtr& v, const TensorPtr& scores,
                         const AutoCorrConfig& cfg) {
    if (v->shape.size() != 2) throw TensorError("time_delay_agg: v must be [L, d]");
    std::int64_t L = v->shape[0];
    if (scores->numel() != L) throw TensorError("time_delay_agg: scores length mismatch");
    std::int64_t k = topk_delays(cfg.topk_factor, L);

    // Delay selection is discrete; gradients flow through the selected
    // scores' softmax weights and the rolled values.
    std::vector<std::int64_t> order(static_cast<std::size_t>(L));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return scores->data[static_cast<std::size_t>(a)] >
               scores->data[static_cast<std::size_t>(b)];
    });
    std::vector<std::int64_t> top(order.begin(), order.begin() + k);

    auto flat = scores->numel() == scores->shape[0] ? scores : reshape(scores, {L});
    auto weights = softmax(gather_flat(flat, top), 0);
    TensorPtr out;
    for (std::int64_t j = 0; j < k; ++j) {
        auto wj = slice_rows(weights, j, j + 1);
        auto term = mul(roll_rows(v, top[static_cast<std::size_t>(j)]), wj);
        out = out ? add(out, term) : term;
    }
    return out;
}

TensorPtr auto_correlation_layer(const TensorPtr& q, const TensorPtr& keys,
                                 const TensorPtr& values, const AutoCorrConfig& cfg,
                                 const AutoCorrParams& params) {
    std::int64_t d_model = params.wq->shape[0];
    if (d_model % cfg.num_heads != 0)
        throw TensorError("auto_correlation_layer: d_model not divisible by num_heads");
    std::int64_t Lq = q->shape[0];
    std::int64_t H = cfg.num_heads;
    std::int64_t dh = d_model / H;

    // Query/key projections take no bias: a constant channel shift adds the
    // same value to every delay's correlation score and cancels in the
    // softmax over delays. (bq/bk may still be supplied for generality.)
    auto Q = matmul(q, params.wq);
    if (params.bq) Q = add(Q, params.bq);
    auto K = matmul(keys, params.wk);
    if (params.bk) K = add(K, params.bk);
    auto V = matmul(values, params.wv);
    if (params.bv) V = add(V, params.bv);

    // Cross form: align key/value length to the query length before scoring.
    auto align = [&](TensorPtr t) {
        std::int64_t Lkv = t->shape[0];
        if (Lkv == Lq) return t;
        if (Lkv > Lq) return slice_rows(t, Lkv - Lq, Lkv);  // most recent L_q steps
        return concat_rows({t, zeros({Lq - Lkv, d_model})});
    };
    K = align(K);
    V = align(V);

    auto scores = autocorr_scores(Q, K, cfg.num_heads);  // [H, Lq]

    auto head_of = [&](const TensorPtr& t, std::int64_t h) {
        auto split = permute3d(reshape(t, {Lq, H, dh}), 1, 0, 2);  // [H, Lq, dh]
        return reshape(slice_rows(split, h, h + 1), {Lq, dh});
    };

    std::vector<TensorPtr> head_outputs_t;  // each [dh, Lq]
    for (std::int64_t h = 0; h < H; ++h) {
        auto vh = head_of(V, h);
        auto sh = reshape(slice_rows(scores, h, h + 1), {Lq});
        head_outputs_t.push_back(transpose2d(time_delay_agg(vh, sh, cfg)));
    }
    auto merged = transpose2d(concat_rows(head_outputs_t));  // [Lq, d_model]
    auto out = matmul(merged, params.wo);
    return params.bo ? add(out, params.bo) : out;
}

}  // namespace stec
