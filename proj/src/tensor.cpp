#include "stec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace stec {

namespace {

thread_local Tape* g_active_tape = nullptr;

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw TensorError(std::string(op) + ": non-finite value in result");
        }
    }
}

std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::int64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// b broadcasts against a iff b is a scalar or b.shape is a trailing suffix
// of a.shape. Returns the broadcast period (numel of b).
std::int64_t broadcast_period(const Tensor& a, const Tensor& b, const char* op) {
    if (b.numel() == 1) return 1;
    if (b.shape.size() > a.shape.size())
        throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                          shape_str(b.shape));
    std::size_t off = a.shape.size() - b.shape.size();
    for (std::size_t i = 0; i < b.shape.size(); ++i) {
        if (a.shape[off + i] != b.shape[i])
            throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                              " vs " + shape_str(b.shape));
    }
    return b.numel();
}

TensorPtr finish_op(TensorPtr out, std::vector<TensorPtr> inputs,
                    std::function<void()> backward_fn, const char* op) {
    check_finite(*out, op);
    Tape* tape = Tape::active();
    bool needs_grad = false;
    for (const auto& in : inputs)
        if (in && in->requires_grad) needs_grad = true;
    if (tape && needs_grad) {
        out->requires_grad = true;
        out->tape_id = tape->record(out, std::move(inputs), std::move(backward_fn));
    }
    return out;
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> data,
                      bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    if (numel_of(shape) != static_cast<std::int64_t>(data.size()))
        throw TensorError("make_tensor: shape " + shape_str(shape) + " does not match " +
                          std::to_string(data.size()) + " elements");
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    auto n = numel_of(shape);
    return make_tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr full(std::vector<std::int64_t> shape, double value, bool requires_grad) {
    auto n = numel_of(shape);
    return make_tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

TensorPtr scalar(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

Tape::Tape() {
    if (g_active_tape)
        throw TensorError("Tape: another tape is already active on this thread");
    g_active_tape = this;
}

Tape::~Tape() {
    if (g_active_tape == this) g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

std::int64_t Tape::record(TensorPtr output, std::vector<TensorPtr> inputs,
                          std::function<void()> backward_fn) {
    nodes_.push_back(Node{std::move(output), std::move(inputs), std::move(backward_fn)});
    return static_cast<std::int64_t>(nodes_.size()) - 1;
}

void Tape::backward(const TensorPtr& loss) {
    if (loss->numel() != 1) throw TensorError("backward: loss must be a scalar");
    if (loss->tape_id < 0 || loss->tape_id >= static_cast<std::int64_t>(nodes_.size()) ||
        nodes_[static_cast<std::size_t>(loss->tape_id)].output.get() != loss.get())
        throw TensorError("backward: loss is not a node on this tape");

    // Adjoints live on node outputs and grad-requiring leaves only; other
    // leaves (e.g. dataset windows shared across threads) are never written.
    std::unordered_set<Tensor*> touched;
    for (auto& node : nodes_) {
        touched.insert(node.output.get());
        for (auto& in : node.inputs)
            if (in && in->requires_grad) touched.insert(in.get());
    }
    for (Tensor* t : touched) t->adjoint.assign(t->data.size(), 0.0);

    nodes_[static_cast<std::size_t>(loss->tape_id)].output->adjoint[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->backward) it->backward();
    }
    for (Tensor* t : touched) {
        if (t->requires_grad) {
            t->ensure_grad();
            add_into(t->grad, t->adjoint);
        }
        t->adjoint.clear();
    }
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

namespace {

TensorPtr elementwise_binary(EwKind kind, const TensorPtr& a, const TensorPtr& b,
                             const char* op) {
    std::int64_t period = broadcast_period(*a, *b, op);
    auto out = std::make_shared<Tensor>();
    out->shape = a->shape;
    out->data.resize(a->data.size());
    const auto n = a->data.size();
    for (std::size_t i = 0; i < n; ++i) {
        double bv = b->data[i % static_cast<std::size_t>(period)];
        switch (kind) {
            case EwKind::Add: out->data[i] = a->data[i] + bv; break;
            case EwKind::Sub: out->data[i] = a->data[i] - bv; break;
            case EwKind::Mul: out->data[i] = a->data[i] * bv; break;
            case EwKind::Div: out->data[i] = a->data[i] / bv; break;
        }
    }
    auto backward = [kind, a, b, out, period]() {
        const auto n = a->data.size();
        for (std::size_t i = 0; i < n; ++i) {
            double g = out->adjoint[i];
            std::size_t bi = i % static_cast<std::size_t>(period);
            switch (kind) {
                case EwKind::Add:
                    if (!a->adjoint.empty()) a->adjoint[i] += g;
                    if (!b->adjoint.empty()) b->adjoint[bi] += g;
                    break;
                case EwKind::Sub:
                    if (!a->adjoint.empty()) a->adjoint[i] += g;
                    if (!b->adjoint.empty()) b->adjoint[bi] -= g;
                    break;
                case EwKind::Mul:
                    if (!a->adjoint.empty()) a->adjoint[i] += g * b->data[bi];
                    if (!b->adjoint.empty()) b->adjoint[bi] += g * a->data[i];
                    break;
                case EwKind::Div:
                    if (!a->adjoint.empty()) a->adjoint[i] += g / b->data[bi];
                    if (!b->adjoint.empty())
                        b->adjoint[bi] -= g * a->data[i] / (b->data[bi] * b->data[bi]);
                    break;
            }
        }
    };
    return finish_op(out, {a, b}, backward, op);
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    return elementwise_binary(EwKind::Add, a, b, "add");
}
TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    return elementwise_binary(EwKind::Sub, a, b, "sub");
}
TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    return elementwise_binary(EwKind::Mul, a, b, "mul");
}
TensorPtr div(const TensorPtr& a, const TensorPtr& b) {
    return elementwise_binary(EwKind::Div, a, b, "div");
}

TensorPtr add_scalar(const TensorPtr& a, double s) { return add(a, scalar(s)); }
TensorPtr mul_scalar(const TensorPtr& a, double s) { return mul(a, scalar(s)); }

TensorPtr relu(const TensorPtr& x) {
    auto out = std::make_shared<Tensor>();
    out->shape = x->shape;
    out->data.resize(x->data.size());
    for (std::size_t i = 0; i < x->data.size(); ++i)
        out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    auto backward = [x, out]() {
        if (x->adjoint.empty()) return;
        for (std::size_t i = 0; i < x->data.size(); ++i)
            if (x->data[i] > 0.0) x->adjoint[i] += out->adjoint[i];
    };
    return finish_op(out, {x}, backward, "relu");
}

TensorPtr gelu(const TensorPtr& x) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    auto out = std::make_shared<Tensor>();
    out->shape = x->shape;
    out->data.resize(x->data.size());
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        double v = x->data[i];
        out->data[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    auto backward = [x, out]() {
        if (x->adjoint.empty()) return;
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            double v = x->data[i];
            double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            x->adjoint[i] += out->adjoint[i] * (cdf + v * pdf);
        }
    };
    return finish_op(out, {x}, backward, "gelu");
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() < 2 || b->shape.size() != a->shape.size())
        throw TensorError("matmul: operands must both have rank >= 2 and equal rank");
    std::size_t rank = a->shape.size();
    std::int64_t m = a->shape[rank - 2], k = a->shape[rank - 1];
    std::int64_t k2 = b->shape[rank - 2], n = b->shape[rank - 1];
    if (k != k2)
        throw TensorError("matmul: inner dimensions disagree, " + shape_str(a->shape) + " vs " +
                          shape_str(b->shape));
    std::int64_t batch = 1;
    for (std::size_t i = 0; i + 2 < rank; ++i) {
        if (a->shape[i] != b->shape[i])
            throw TensorError("matmul: batch dimensions disagree");
        batch *= a->shape[i];
    }
    std::vector<std::int64_t> out_shape(a->shape.begin(), a->shape.end());
    out_shape[rank - 2] = m;
    out_shape[rank - 1] = n;
    auto out = std::make_shared<Tensor>();
    out->shape = out_shape;
    out->data.assign(static_cast<std::size_t>(batch * m * n), 0.0);
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        const double* pa = a->data.data() + bi * m * k;
        const double* pb = b->data.data() + bi * k * n;
        double* po = out->data.data() + bi * m * n;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t l = 0; l < k; ++l) {
                double av = pa[i * k + l];
                if (av == 0.0) continue;
                for (std::int64_t j = 0; j < n; ++j) po[i * n + j] += av * pb[l * n + j];
            }
    }
    auto backward = [a, b, out, batch, m, k, n]() {
        for (std::int64_t bi = 0; bi < batch; ++bi) {
            const double* pa = a->data.data() + bi * m * k;
            const double* pb = b->data.data() + bi * k * n;
            const double* go = out->adjoint.data() + bi * m * n;
            if (!a->adjoint.empty()) {
                double* ga = a->adjoint.data() + bi * m * k;
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < n; ++j) {
                        double g = go[i * n + j];
                        if (g == 0.0) continue;
                        for (std::int64_t l = 0; l < k; ++l) ga[i * k + l] += g * pb[l * n + j];
                    }
            }
            if (!b->adjoint.empty()) {
                double* gb = b->adjoint.data() + bi * k * n;
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t l = 0; l < k; ++l) {
                        double av = pa[i * k + l];
                        if (av == 0.0) continue;
                        for (std::int64_t j = 0; j < n; ++j)
                            gb[l * n + j] += av * go[i * n + j];
                    }
            }
        }
    };
    return finish_op(out, {a, b}, backward, "matmul");
}

TensorPtr softmax(const TensorPtr& x, int axis) {
    int rank = static_cast<int>(x->shape.size());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw TensorError("softmax: axis out of range");
    std::int64_t outer = 1, inner = 1, n = x->shape[static_cast<std::size_t>(axis)];
    for (int i = 0; i < axis; ++i) outer *= x->shape[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < rank; ++i) inner *= x->shape[static_cast<std::size_t>(i)];
    auto out = std::make_shared<Tensor>();
    out->shape = x->shape;
    out->data.resize(x->data.size());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            auto at = [&](std::int64_t j) { return (o * n + j) * inner + in; };
            double mx = -1e308;
            for (std::int64_t j = 0; j < n; ++j) mx = std::max(mx, x->data[at(j)]);
            double sum = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
                double e = std::exp(x->data[at(j)] - mx);
                out->data[at(j)] = e;
                sum += e;
            }
            for (std::int64_t j = 0; j < n; ++j) out->data[at(j)] /= sum;
        }
    auto backward = [x, out, outer, inner, n]() {
        if (x->adjoint.empty()) return;
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                auto at = [&](std::int64_t j) { return (o * n + j) * inner + in; };
                double dot = 0.0;
                for (std::int64_t j = 0; j < n; ++j)
                    dot += out->adjoint[at(j)] * out->data[at(j)];
                for (std::int64_t j = 0; j < n; ++j)
                    x->adjoint[at(j)] += out->data[at(j)] * (out->adjoint[at(j)] - dot);
            }
    };
    return finish_op(out, {x}, backward, "softmax");
}

TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, PadMode pad) {
    if (w->shape.size() != 3) throw TensorError("conv1d: weight must be [C_out, C_in, k]");
    bool batched = x->shape.size() == 3;
    if (!batched && x->shape.size() != 2)
        throw TensorError("conv1d: input must be [C_in, L] or [N, C_in, L]");
    std::int64_t N = batched ? x->shape[0] : 1;
    std::int64_t cin = batched ? x->shape[1] : x->shape[0];
    std::int64_t L = batched ? x->shape[2] : x->shape[1];
    std::int64_t cout = w->shape[0], k = w->shape[2];
    if (w->shape[1] != cin) throw TensorError("conv1d: channel mismatch");
    if (k % 2 == 0) throw TensorError("conv1d: kernel size must be odd");
    if (bias && bias->numel() != cout) throw TensorError("conv1d: bias size mismatch");
    std::int64_t half = k / 2;

    auto out = std::make_shared<Tensor>();
    out->shape = batched ? std::vector<std::int64_t>{N, cout, L}
                         : std::vector<std::int64_t>{cout, L};
    out->data.assign(static_cast<std::size_t>(N * cout * L), 0.0);

    auto src_index = [L, pad](std::int64_t t) -> std::int64_t {
        if (t < 0) return pad == PadMode::Replicate ? 0 : -1;
        if (t >= L) return pad == PadMode::Replicate ? L - 1 : -1;
        return t;
    };

    for (std::int64_t b = 0; b < N; ++b)
        for (std::int64_t co = 0; co < cout; ++co)
            for (std::int64_t t = 0; t < L; ++t) {
                double acc = bias ? bias->data[static_cast<std::size_t>(co)] : 0.0;
                for (std::int64_t ci = 0; ci < cin; ++ci)
                    for (std::int64_t j = 0; j < k; ++j) {
                        std::int64_t s = src_index(t + j - half);
                        if (s < 0) continue;
                        acc += w->data[static_cast<std::size_t>((co * cin + ci) * k + j)] *
                               x->data[static_cast<std::size_t>((b * cin + ci) * L + s)];
                    }
                out->data[static_cast<std::size_t>((b * cout + co) * L + t)] = acc;
            }

    auto backward = [x, w, bias, out, N, cin, cout, L, k, half, src_index]() {
        for (std::int64_t b = 0; b < N; ++b)
            for (std::int64_t co = 0; co < cout; ++co)
                for (std::int64_t t = 0; t < L; ++t) {
                    double g = out->adjoint[static_cast<std::size_t>((b * cout + co) * L + t)];
                    if (g == 0.0) continue;
                    if (bias && !bias->adjoint.empty())
                        bias->adjoint[static_cast<std::size_t>(co)] += g;
                    for (std::int64_t ci = 0; ci < cin; ++ci)
                        for (std::int64_t j = 0; j < k; ++j) {
                            std::int64_t s = src_index(t + j - half);
                            if (s < 0) continue;
                            auto wi = static_cast<std::size_t>((co * cin + ci) * k + j);
                            auto xi = static_cast<std::size_t>((b * cin + ci) * L + s);
                            if (!w->adjoint.empty()) w->adjoint[wi] += g * x->data[xi];
                            if (!x->adjoint.empty()) x->adjoint[xi] += g * w->data[wi];
                        }
                }
    };
    std::vector<TensorPtr> inputs = {x, w};
    if (bias) inputs.push_back(bias);
    return finish_op(out, std::move(inputs), backward, "conv1d");
}

TensorPtr reshape(const TensorPtr& x, std::vector<std::int64_t> shape) {
    if (numel_of(shape) != x->numel()) throw TensorError("reshape: element count mismatch");
    auto out = std::make_shared<Tensor>();
    out->shape = std::move(shape);
    out->data = x->data;
    auto backward = [x, out]() {
        if (x->adjoint.empty()) return;
        add_into(x->adjoint, out->adjoint);
    };
    return finish_op(out, {x}, backward, "reshape");
}

TensorPtr transpose2d(const TensorPtr& x) {
    if (x->shape.size() != 2) throw TensorError("transpose2d: rank-2 input required");
    std::int64_t m = x->shape[0], n = x->shape[1];
    auto out = std::make_shared<Tensor>();
    out->shape = {n, m};
    out->data.resize(x->data.size());
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out->data[static_cast<std::size_t>(j * m + i)] =
                x->data[static_cast<std::size_t>(i * n + j)];
    auto backward = [x, out, m, n]() {
        if (x->adjoint.empty()) return;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                x->adjoint[static_cast<std::size_t>(i * n + j)] +=
                    out->adjoint[static_cast<std::size_t>(j * m + i)];
    };
    return finish_op(out, {x}, backward, "transpose2d");
}

TensorPtr permute3d(const TensorPtr& x, int p0, int p1, int p2) {
    if (x->shape.size() != 3) throw TensorError("permute3d: rank-3 input required");
    int perm[3] = {p0, p1, p2};
    bool seen[3] = {false, false, false};
    for (int p : perm) {
        if (p < 0 || p > 2 || seen[p]) throw TensorError("permute3d: invalid permutation");
        seen[p] = true;
    }
    std::int64_t d[3] = {x->shape[0], x->shape[1], x->shape[2]};
    auto out = std::make_shared<Tensor>();
    out->shape = {d[p0], d[p1], d[p2]};
    out->data.resize(x->data.size());
    auto src_flat = [&](std::int64_t i0, std::int64_t i1, std::int64_t i2) {
        return (i0 * d[1] + i1) * d[2] + i2;
    };
    std::vector<std::int64_t> src_of(out->data.size());
    std::int64_t o = 0;
    std::int64_t idx[3];
    for (idx[0] = 0; idx[0] < d[p0]; ++idx[0])
        for (idx[1] = 0; idx[1] < d[p1]; ++idx[1])
            for (idx[2] = 0; idx[2] < d[p2]; ++idx[2], ++o) {
                std::int64_t s[3];
                s[p0] = idx[0];
                s[p1] = idx[1];
                s[p2] = idx[2];
                src_of[static_cast<std::size_t>(o)] = src_flat(s[0], s[1], s[2]);
                out->data[static_cast<std::size_t>(o)] =
                    x->data[static_cast<std::size_t>(src_of[static_cast<std::size_t>(o)])];
            }
    auto backward = [x, out, src_of]() {
        if (x->adjoint.empty()) return;
        for (std::size_t i = 0; i < out->adjoint.size(); ++i)
            x->adjoint[static_cast<std::size_t>(src_of[i])] += out->adjoint[i];
    };
    return finish_op(out, {x}, backward, "permute3d");
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw TensorError("concat_rows: no inputs");
    auto tail = std::vector<std::int64_t>(parts[0]->shape.begin() + 1, parts[0]->shape.end());
    std::int64_t rows = 0;
    std::int64_t row_size = 1;
    for (auto d : tail) row_size *= d;
    for (const auto& p : parts) {
        auto ptail = std::vector<std::int64_t>(p->shape.begin() + 1, p->shape.end());
        if (ptail != tail) throw TensorError("concat_rows: trailing shapes differ");
        rows += p->shape[0];
    }
    auto out = std::make_shared<Tensor>();
    out->shape = tail;
    out->shape.insert(out->shape.begin(), rows);
    out->data.reserve(static_cast<std::size_t>(rows * row_size));
    for (const auto& p : parts)
        out->data.insert(out->data.end(), p->data.begin(), p->data.end());
    auto backward = [parts, out]() {
        std::size_t off = 0;
        for (const auto& p : parts) {
            if (!p->adjoint.empty())
                for (std::size_t i = 0; i < p->data.size(); ++i)
                    p->adjoint[i] += out->adjoint[off + i];
            off += p->data.size();
        }
    };
    std::vector<TensorPtr> inputs(parts.begin(), parts.end());
    return finish_op(out, std::move(inputs), backward, "concat_rows");
}

TensorPtr slice_rows(const TensorPtr& x, std::int64_t begin, std::int64_t end) {
    if (x->shape.empty()) throw TensorError("slice_rows: rank-0 input");
    if (begin < 0 || end > x->shape[0] || begin >= end)
        throw TensorError("slice_rows: invalid range [" + std::to_string(begin) + "," +
                          std::to_string(end) + ") for " + std::to_string(x->shape[0]) + " rows");
    std::int64_t row_size = x->numel() / x->shape[0];
    auto out = std::make_shared<Tensor>();
    out->shape = x->shape;
    out->shape[0] = end - begin;
    out->data.assign(x->data.begin() + begin * row_size, x->data.begin() + end * row_size);
    auto backward = [x, out, begin, row_size]() {
        if (x->adjoint.empty()) return;
        for (std::size_t i = 0; i < out->adjoint.size(); ++i)
            x->adjoint[static_cast<std::size_t>(begin * row_size) + i] += out->adjoint[i];
    };
    return finish_op(out, {x}, backward, "slice_rows");
}

TensorPtr roll_rows(const TensorPtr& x, std::int64_t shift) {
    if (x->shape.empty()) throw TensorError("roll_rows: rank-0 input");
    std::int64_t L = x->shape[0];
    std::int64_t row_size = x->numel() / L;
    std::int64_t s = ((shift % L) + L) % L;
    auto out = std::make_shared<Tensor>();
    out->shape = x->shape;
    out->data.resize(x->data.size());
    for (std::int64_t t = 0; t < L; ++t) {
        std::int64_t src = (t + s) % L;
        std::memcpy(out->data.data() + t * row_size, x->data.data() + src * row_size,
                    static_cast<std::size_t>(row_size) * sizeof(double));
    }
    auto backward = [x, out, L, row_size, s]() {
        if (x->adjoint.empty()) return;
        for (std::int64_t t = 0; t < L; ++t) {
            std::int64_t src = (t + s) % L;
            for (std::int64_t j = 0; j < row_size; ++j)
                x->adjoint[static_cast<std::size_t>(src * row_size + j)] +=
                    out->adjoint[static_cast<std::size_t>(t * row_size + j)];
        }
    };
    return finish_op(out, {x}, backward, "roll_rows");
}

TensorPtr gather_flat(const TensorPtr& x, const std::vector<std::int64_t>& idx) {
    for (auto i : idx)
        if (i < 0 || i >= x->numel()) throw TensorError("gather_flat: index out of range");
    auto out = std::make_shared<Tensor>();
    out->shape = {static_cast<std::int64_t>(idx.size())};
    out->data.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out->data[i] = x->data[static_cast<std::size_t>(idx[i])];
    auto backward = [x, out, idx]() {
        if (x->adjoint.empty()) return;
        for (std::size_t i = 0; i < idx.size(); ++i)
            x->adjoint[static_cast<std::size_t>(idx[i])] += out->adjoint[i];
    };
    return finish_op(out, {x}, backward, "gather_flat");
}

TensorPtr sum_all(const TensorPtr& x) {
    auto out = std::make_shared<Tensor>();
    out->shape = {1};
    double acc = 0.0;
    for (double v : x->data) acc += v;
    out->data = {acc};
    auto backward = [x, out]() {
        if (x->adjoint.empty()) return;
        double g = out->adjoint[0];
        for (auto& a : x->adjoint) a += g;
    };
    return finish_op(out, {x}, backward, "sum_all");
}

TensorPtr mean_all(const TensorPtr& x) {
    return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x->numel()));
}

TensorPtr mse(const TensorPtr& pred, const TensorPtr& target) {
    auto d = sub(pred, target);
    return mean_all(mul(d, d));
}

void backward(Tape& tape, const TensorPtr& loss) { tape.backward(loss); }

double grad_check(const std::function<TensorPtr()>& f, const std::vector<TensorPtr>& params,
                  double eps) {
    if (eps < 1e-8 || eps > 1e-4) throw TensorError("grad_check: eps out of [1e-8, 1e-4]");
    auto eval = [&f]() {
        NoGradGuard guard;
        auto v = f();
        if (v->numel() != 1) throw TensorError("grad_check: f must return a scalar");
        return v->data[0];
    };
    if (eval() != eval())
        throw TensorError("grad_check: objective is not deterministic");

    for (const auto& p : params) p->zero_grad();
    {
        Tape tape;
        auto loss = f();
        tape.backward(loss);
    }

    double max_err = 0.0;
    for (const auto& p : params) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->data.size(); ++i) {
            double saved = p->data[i];
            p->data[i] = saved + eps;
            double fp = eval();
            p->data[i] = saved - eps;
            double fm = eval();
            p->data[i] = saved;
            double numeric = (fp - fm) / (2.0 * eps);
            double analytic = p->grad[i];
            double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
            max_err = std::max(max_err, std::fabs(analytic - numeric) / denom);
        }
    }
    return max_err;
}

}  // namespace stec
