#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace stec {

// All numerics are 64-bit. Tensors are shared handles; a Tape records the
// forward pass (define-by-run) and replays it in reverse for gradients.

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;     // same size as data when populated
    std::vector<double> adjoint;  // transient, owned by Tape::backward
    std::int64_t tape_id = -1;    // node id on the tape that produced it, -1 for leaves

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }
};

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> data,
                      bool requires_grad = false);
TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
TensorPtr full(std::vector<std::int64_t> shape, double value, bool requires_grad = false);
TensorPtr scalar(double value, bool requires_grad = false);

// Reverse-mode tape. One tape is active per thread at a time; ops record a
// backward closure when a tape is active and any input requires a gradient.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    struct Node {
        TensorPtr output;
        std::vector<TensorPtr> inputs;
        std::function<void()> backward;  // reads output->adjoint, adds into inputs' adjoints
    };

    static Tape* active();
    std::int64_t record(TensorPtr output, std::vector<TensorPtr> inputs,
                        std::function<void()> backward);

    // Seeds d(loss)/d(loss)=1 and accumulates adjoints into .grad of every
    // requires_grad tensor touched by the tape. Repeated calls keep adding.
    void backward(const TensorPtr& loss);

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

// Pauses recording on the active tape for the lifetime of the guard.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();

private:
    Tape* saved_;
};

enum class EwKind { Add, Sub, Mul, Div };
enum class PadMode { Replicate, Zero };

// Elementwise binary ops. b must have equal shape or be a trailing-suffix
// broadcast of a (or a scalar).
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr div(const TensorPtr& a, const TensorPtr& b);
TensorPtr add_scalar(const TensorPtr& a, double s);
TensorPtr mul_scalar(const TensorPtr& a, double s);
TensorPtr relu(const TensorPtr& x);
TensorPtr gelu(const TensorPtr& x);

// Batched matrix product over the trailing two axes; leading dims must match.
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);

TensorPtr softmax(const TensorPtr& x, int axis);

// 1-D convolution with "same" output length. x is [C_in, L] or [N, C_in, L],
// w is [C_out, C_in, k] with odd k, bias is [C_out] (may be null).
TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, PadMode pad);

TensorPtr reshape(const TensorPtr& x, std::vector<std::int64_t> shape);
TensorPtr transpose2d(const TensorPtr& x);
TensorPtr permute3d(const TensorPtr& x, int p0, int p1, int p2);
TensorPtr concat_rows(const std::vector<TensorPtr>& parts);      // along axis 0
TensorPtr slice_rows(const TensorPtr& x, std::int64_t begin, std::int64_t end);
// Circular shift along axis 0: out[t] = x[(t + shift) mod L].
TensorPtr roll_rows(const TensorPtr& x, std::int64_t shift);
// Picks scalar elements by flat index; backward scatters.
TensorPtr gather_flat(const TensorPtr& x, const std::vector<std::int64_t>& idx);
TensorPtr sum_all(const TensorPtr& x);
TensorPtr mean_all(const TensorPtr& x);
TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);

void backward(Tape& tape, const TensorPtr& loss);

// Central-difference gradient audit. Runs f twice up front to detect a
// non-deterministic objective, then compares analytic grads (fresh tape)
// against (f(p+eps)-f(p-eps))/2eps per parameter element. Returns the max of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
double grad_check(const std::function<TensorPtr()>& f, const std::vector<TensorPtr>& params,
                  double eps = 1e-6);

}  // namespace stec
