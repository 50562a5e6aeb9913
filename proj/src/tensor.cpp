#include "maskd/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "maskd/kernels.hpp"

namespace maskd {

std::int64_t numel_of(const Shape& s) {
    std::int64_t n = 1;
    for (const int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

Tensor Tensor::zeros(Shape s) { return full(std::move(s), 0.0); }

Tensor Tensor::full(Shape s, double v) {
    for (const int d : s)
        if (d <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(s));
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(static_cast<std::size_t>(numel_of(s)), v);
    impl->shape = std::move(s);
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape s, std::vector<double> values) {
    if (numel_of(s) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(s));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(s);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

double Tensor::item() const {
    if (numel() != 1)
        throw std::invalid_argument("item() requires a one-element tensor, got shape " + shape_str(shape()));
    return impl_->data[0];
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

bool all_finite(const Tensor& t) {
    for (const double v : t.values())
        if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {

thread_local std::vector<Tape*> g_tape_stack;
thread_local int g_no_grad = 0;
std::atomic<std::uint64_t> g_next_tape_id{1};

std::vector<double>& grad_buf(TensorImpl& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
    return t.grad;
}

}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) { g_tape_stack.push_back(this); }

Tape::~Tape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

NoGradGuard::NoGradGuard() { ++g_no_grad; }
NoGradGuard::~NoGradGuard() { --g_no_grad; }

bool grad_enabled() { return g_no_grad == 0; }

namespace {

// Backward rule for one node: reads out->grad, accumulates into the parents
// that require grad. Mirrors the forward definitions in ops.cpp.
void node_backward(Tape::Node& n) {
    const auto& K = kernels::dispatch();
    const std::vector<double>& g = n.out->grad;
    auto wants = [](const std::shared_ptr<TensorImpl>& t) { return t->requires_grad; };

    switch (n.op) {
        case OpKind::add: {
            if (wants(n.in[0])) K.axpy(grad_buf(*n.in[0]).data(), 1.0, g.data(), g.size());
            if (wants(n.in[1])) K.axpy(grad_buf(*n.in[1]).data(), 1.0, g.data(), g.size());
            break;
        }
        case OpKind::sub: {
            if (wants(n.in[0])) K.axpy(grad_buf(*n.in[0]).data(), 1.0, g.data(), g.size());
            if (wants(n.in[1])) K.axpy(grad_buf(*n.in[1]).data(), -1.0, g.data(), g.size());
            break;
        }
        case OpKind::mul: {
            if (wants(n.in[0])) K.mul_acc(grad_buf(*n.in[0]).data(), g.data(), n.in[1]->data.data(), g.size());
            if (wants(n.in[1])) K.mul_acc(grad_buf(*n.in[1]).data(), g.data(), n.in[0]->data.data(), g.size());
            break;
        }
        case OpKind::mul_bcast: {
            // in[0]: matrix (rows, cols); in[1]: vector (cols)
            const std::size_t rows = static_cast<std::size_t>(n.ictx[0]);
            const std::size_t cols = static_cast<std::size_t>(n.ictx[1]);
            const double* vec = n.in[1]->data.data();
            const double* mat = n.in[0]->data.data();
            if (wants(n.in[0])) {
                double* dm = grad_buf(*n.in[0]).data();
                for (std::size_t r = 0; r < rows; ++r)
                    K.mul_acc(dm + r * cols, g.data() + r * cols, vec, cols);
            }
            if (wants(n.in[1])) {
                double* dv = grad_buf(*n.in[1]).data();
                for (std::size_t r = 0; r < rows; ++r)
                    K.mul_acc(dv, g.data() + r * cols, mat + r * cols, cols);
            }
            break;
        }
        case OpKind::smul: {
            // in[0]: scalar s, in[1]: x; out = s*x
            const double s = n.in[0]->data[0];
            if (wants(n.in[0])) grad_buf(*n.in[0])[0] += K.dot(g.data(), n.in[1]->data.data(), g.size());
            if (wants(n.in[1])) K.axpy(grad_buf(*n.in[1]).data(), s, g.data(), g.size());
            break;
        }
        case OpKind::sdiv: {
            // in[0]: x, in[1]: scalar s; out = x/s
            const double s = n.in[1]->data[0];
            if (wants(n.in[0])) K.axpy(grad_buf(*n.in[0]).data(), 1.0 / s, g.data(), g.size());
            if (wants(n.in[1]))
                grad_buf(*n.in[1])[0] -= K.dot(g.data(), n.in[0]->data.data(), g.size()) / (s * s);
            break;
        }
        case OpKind::scale: {
            if (wants(n.in[0])) K.axpy(grad_buf(*n.in[0]).data(), n.c, g.data(), g.size());
            break;
        }
        case OpKind::add_const: {
            if (wants(n.in[0])) K.axpy(grad_buf(*n.in[0]).data(), 1.0, g.data(), g.size());
            break;
        }
        case OpKind::matmul: {
            const std::size_t m = static_cast<std::size_t>(n.ictx[0]);
            const std::size_t k = static_cast<std::size_t>(n.ictx[1]);
            const std::size_t cols = static_cast<std::size_t>(n.ictx[2]);
            if (wants(n.in[0]))
                K.gemm_nt(grad_buf(*n.in[0]).data(), g.data(), n.in[1]->data.data(), m, cols, k, true);
            if (wants(n.in[1]))
                K.gemm_tn(grad_buf(*n.in[1]).data(), n.in[0]->data.data(), g.data(), k, m, cols, true);
            break;
        }
        case OpKind::conv2d: {
            const std::size_t cin = static_cast<std::size_t>(n.ictx[0]);
            const std::size_t cout = static_cast<std::size_t>(n.ictx[1]);
            const std::size_t h = static_cast<std::size_t>(n.ictx[2]);
            const std::size_t w = static_cast<std::size_t>(n.ictx[3]);
            const std::size_t k = static_cast<std::size_t>(n.ictx[4]);
            if (wants(n.in[0]))
                K.conv2d_bwd_input(grad_buf(*n.in[0]).data(), g.data(), n.in[1]->data.data(),
                                   cin, cout, h, w, k);
            if (wants(n.in[1]))
                K.conv2d_bwd_weight(grad_buf(*n.in[1]).data(), g.data(), n.in[0]->data.data(),
                                    cin, cout, h, w, k);
            if (wants(n.in[2])) K.conv2d_bwd_bias(grad_buf(*n.in[2]).data(), g.data(), cout, h, w);
            break;
        }
        case OpKind::relu: {
            if (wants(n.in[0]))
                K.relu_bwd(grad_buf(*n.in[0]).data(), n.in[0]->data.data(), g.data(), g.size());
            break;
        }
        case OpKind::sigmoid: {
            if (wants(n.in[0]))
                K.sigmoid_bwd(grad_buf(*n.in[0]).data(), n.out->data.data(), g.data(), g.size());
            break;
        }
        case OpKind::global_avg_pool: {
            if (wants(n.in[0])) {
                const std::size_t c = static_cast<std::size_t>(n.ictx[0]);
                const std::size_t plane = static_cast<std::size_t>(n.ictx[1]);
                double* dx = grad_buf(*n.in[0]).data();
                const double inv = 1.0 / static_cast<double>(plane);
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double gv = g[ch] * inv;
                    double* drow = dx + ch * plane;
                    for (std::size_t i = 0; i < plane; ++i) drow[i] += gv;
                }
            }
            break;
        }
        case OpKind::reduce_sum:
        case OpKind::reduce_mean: {
            if (!wants(n.in[0])) break;
            // ictx: rank, then shape, then a 0/1 flag per axis (1 = reduced)
            const int rank = n.ictx[0];
            const int* dims = n.ictx.data() + 1;
            const int* red = n.ictx.data() + 1 + rank;
            double inv = 1.0;
            if (n.op == OpKind::reduce_mean) {
                std::int64_t cnt = 1;
                for (int a = 0; a < rank; ++a)
                    if (red[a]) cnt *= dims[a];
                inv = 1.0 / static_cast<double>(cnt);
            }
            double* dx = grad_buf(*n.in[0]).data();
            const std::size_t total = n.in[0]->data.size();
            std::vector<int> coord(static_cast<std::size_t>(rank), 0);
            std::size_t out_idx = 0;
            // out strides over kept axes
            std::vector<std::size_t> out_stride(static_cast<std::size_t>(rank), 0);
            {
                std::size_t s = 1;
                for (int a = rank - 1; a >= 0; --a) {
                    if (!red[a]) {
                        out_stride[static_cast<std::size_t>(a)] = s;
                        s *= static_cast<std::size_t>(dims[a]);
                    }
                }
            }
            for (std::size_t i = 0; i < total; ++i) {
                dx[i] += g[out_idx] * inv;
                for (int a = rank - 1; a >= 0; --a) {
                    auto ua = static_cast<std::size_t>(a);
                    if (++coord[ua] < dims[a]) {
                        if (!red[a]) out_idx += out_stride[ua];
                        break;
                    }
                    coord[ua] = 0;
                    if (!red[a]) out_idx -= out_stride[ua] * static_cast<std::size_t>(dims[a] - 1);
                }
            }
            break;
        }
        case OpKind::softmax: {
            if (wants(n.in[0])) {
                const double* y = n.out->data.data();
                const std::size_t nn = g.size();
                const double gy = K.dot(g.data(), y, nn);
                double* dx = grad_buf(*n.in[0]).data();
                for (std::size_t i = 0; i < nn; ++i) dx[i] += y[i] * (g[i] - gy);
            }
            break;
        }
        case OpKind::pixel_ce: {
            if (wants(n.in[0])) {
                const std::size_t kcls = static_cast<std::size_t>(n.ictx[0]);
                const std::size_t npix = static_cast<std::size_t>(n.ictx[1]);
                const int* labels = n.ictx.data() + 2;
                const double* probs = n.dctx.data();  // (K, npix)
                double* dx = grad_buf(*n.in[0]).data();
                const double gv = g[0] / static_cast<double>(npix);
                for (std::size_t k = 0; k < kcls; ++k) {
                    double* drow = dx + k * npix;
                    const double* prow = probs + k * npix;
                    for (std::size_t px = 0; px < npix; ++px) {
                        const double ind = labels[px] == static_cast<int>(k) ? 1.0 : 0.0;
                        drow[px] += gv * (prow[px] - ind);
                    }
                }
            }
            break;
        }
        case OpKind::reshape: {
            if (wants(n.in[0])) K.axpy(grad_buf(*n.in[0]).data(), 1.0, g.data(), g.size());
            break;
        }
        case OpKind::row: {
            if (wants(n.in[0])) {
                const std::size_t len = g.size();
                double* dx = grad_buf(*n.in[0]).data() + static_cast<std::size_t>(n.ictx[0]) * len;
                K.axpy(dx, 1.0, g.data(), len);
            }
            break;
        }
    }
}

}  // namespace

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                    (loss.defined() ? shape_str(loss.shape()) : std::string("(undefined)")));
    const auto& impl = loss.impl();
    if (impl->tape_id != id_ || impl->node < 0)
        throw std::invalid_argument("backward: loss was not produced on this tape");

    impl->grad.assign(1, 1.0);
    for (int i = impl->node; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.out->grad.empty()) continue;
        node_backward(n);
    }
    // Release intermediate gradients; leaf accumulations stay.
    for (Node& n : nodes_) n.out->grad.clear();
}

void backward(const Tensor& loss) {
    Tape* t = Tape::active();
    if (!t) throw std::runtime_error("backward: no active tape");
    t->backward(loss);
}

}  // namespace maskd
