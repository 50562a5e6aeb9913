#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace maskd {

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::uint64_t tape_id = 0;  // 0: not produced by a taped op
    int node = -1;
};

// Dense f64 tensor participating in reverse-mode differentiation. Cheap to
// copy (shared impl). Rank-0 tensors are scalars with one element.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double v);
    static Tensor ones(Shape s) { return full(std::move(s), 1.0); }
    static Tensor scalar(double v) { return full({}, v); }
    static Tensor from(Shape s, std::vector<double> values);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    // Value of a one-element tensor.
    double item() const;

    Tensor& set_requires_grad(bool b = true) {
        impl_->requires_grad = b;
        return *this;
    }
    bool requires_grad() const { return impl_->requires_grad; }

    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<double>& grad() const { return impl_->grad; }
    void zero_grad();

    // Deep copy detached from any tape, requires_grad off.
    Tensor detach() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

bool all_finite(const Tensor& t);

// Reverse-mode tape. Constructing a Tape makes it the active recording
// target for the current thread (tapes nest as a stack); ops record onto
// the innermost one. Single-threaded use per tape; distinct tapes share
// nothing.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Reverse sweep from a scalar loss produced on this tape. Seeds the
    // loss gradient with 1, visits each node once in reverse topological
    // (creation) order, and accumulates into leaf gradients. Intermediate
    // gradients are released afterwards, so a second backward on the same
    // tape starts clean.
    void backward(const Tensor& loss);

    std::size_t size() const { return nodes_.size(); }
    std::uint64_t id() const { return id_; }

    static Tape* active();

    struct Node;
    int push(Node n);
    Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }

private:
    std::vector<Node> nodes_;
    std::uint64_t id_;
};

enum class OpKind : std::uint8_t {
    add,
    sub,
    mul,        // elementwise, equal shapes
    mul_bcast,  // vector (HW) against matrix (C,HW)
    smul,       // scalar tensor * tensor
    sdiv,       // tensor / scalar tensor
    scale,      // tensor * constant
    add_const,  // tensor + constant
    matmul,
    conv2d,
    relu,
    sigmoid,
    global_avg_pool,
    reduce_sum,
    reduce_mean,
    softmax,
    pixel_ce,
    reshape,
    row,
};

struct Tape::Node {
    OpKind op;
    std::vector<std::shared_ptr<TensorImpl>> in;
    std::shared_ptr<TensorImpl> out;
    std::vector<int> ictx;    // op-specific integers (axes, dims, row index)
    std::vector<double> dctx; // op-specific saved values (e.g. softmax probs)
    double c = 0.0;           // constant for scale / add_const
};

// RAII guard that disables recording (and gradient flow) while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Convenience: backward through the tape that produced `loss`.
void backward(const Tensor& loss);

}  // namespace maskd
