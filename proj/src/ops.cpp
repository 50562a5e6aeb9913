#include "maskd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "maskd/kernels.hpp"

namespace maskd {
namespace {

const kernels::Kernels& K() { return kernels::dispatch(); }

// Builds the result tensor and records the node when gradients are wanted.
// Computing with requires_grad inputs while grad is enabled but no tape is
// active is a usage error and reported as such.
Tensor make_result(Shape shape, std::vector<double> data, OpKind op,
                   std::vector<std::shared_ptr<TensorImpl>> inputs,
                   std::vector<int> ictx = {}, std::vector<double> dctx = {},
                   double c = 0.0) {
    auto out = std::make_shared<TensorImpl>();
    out->shape = std::move(shape);
    out->data = std::move(data);

    bool needs_grad = false;
    if (grad_enabled())
        for (const auto& in : inputs)
            if (in->requires_grad) {
                needs_grad = true;
                break;
            }
    if (needs_grad) {
        Tape* tape = Tape::active();
        if (!tape)
            throw std::runtime_error(
                "op on a requires_grad tensor outside any tape; wrap the computation in a Tape "
                "or a NoGradGuard");
        out->requires_grad = true;
        out->tape_id = tape->id();
        Tape::Node node{op, std::move(inputs), out, std::move(ictx), std::move(dctx), c};
        out->node = tape->push(std::move(node));
    }
    return Tensor(std::move(out));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(what) + ": shapes differ: " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

void require_scalar(const Tensor& s, const char* what) {
    if (s.numel() != 1)
        throw std::invalid_argument(std::string(what) + ": expected a one-element tensor, got " +
                                    shape_str(s.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values().size());
    K().add(out.data(), a.data(), b.data(), out.size());
    return make_result(a.shape(), std::move(out), OpKind::add, {a.impl(), b.impl()});
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values().size());
    K().sub(out.data(), a.data(), b.data(), out.size());
    return make_result(a.shape(), std::move(out), OpKind::sub, {a.impl(), b.impl()});
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.values().size());
        K().mul(out.data(), a.data(), b.data(), out.size());
        return make_result(a.shape(), std::move(out), OpKind::mul, {a.impl(), b.impl()});
    }
    // single supported broadcast: rank-1 mask (HW) against rank-2 (C, HW)
    const Tensor* mat = nullptr;
    const Tensor* vec = nullptr;
    if (a.rank() == 2 && b.rank() == 1)
        mat = &a, vec = &b;
    else if (a.rank() == 1 && b.rank() == 2)
        mat = &b, vec = &a;
    if (!mat || mat->dim(1) != vec->dim(0))
        throw std::invalid_argument("hadamard: incompatible shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()) +
                                    " (equal shapes or (C,HW) against (HW) required)");
    const std::size_t rows = static_cast<std::size_t>(mat->dim(0));
    const std::size_t cols = static_cast<std::size_t>(mat->dim(1));
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        K().mul(out.data() + r * cols, mat->data() + r * cols, vec->data(), cols);
    return make_result(mat->shape(), std::move(out), OpKind::mul_bcast, {mat->impl(), vec->impl()},
                       {static_cast<int>(rows), static_cast<int>(cols)});
}

Tensor smul(const Tensor& s, const Tensor& x) {
    require_scalar(s, "smul");
    std::vector<double> out(x.values().size());
    K().scale(out.data(), x.data(), s.item(), out.size());
    return make_result(x.shape(), std::move(out), OpKind::smul, {s.impl(), x.impl()});
}

Tensor sdiv(const Tensor& x, const Tensor& s) {
    require_scalar(s, "sdiv");
    const double sv = s.item();
    if (sv == 0.0) throw std::invalid_argument("sdiv: division by zero scalar");
    std::vector<double> out(x.values().size());
    K().scale(out.data(), x.data(), 1.0 / sv, out.size());
    return make_result(x.shape(), std::move(out), OpKind::sdiv, {x.impl(), s.impl()});
}

Tensor scale(const Tensor& x, double c) {
    std::vector<double> out(x.values().size());
    K().scale(out.data(), x.data(), c, out.size());
    return make_result(x.shape(), std::move(out), OpKind::scale, {x.impl()}, {}, {}, c);
}

Tensor add_const(const Tensor& x, double c) {
    std::vector<double> out(x.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + c;
    return make_result(x.shape(), std::move(out), OpKind::add_const, {x.impl()}, {}, {}, c);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
    K().gemm_nn(out.data(), a.data(), b.data(), static_cast<std::size_t>(m),
                static_cast<std::size_t>(k), static_cast<std::size_t>(n), false);
    return make_result({m, n}, std::move(out), OpKind::matmul, {a.impl(), b.impl()}, {m, k, n});
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be (Cin,H,W), got " + shape_str(x.shape()));
    if (w.rank() != 4)
        throw std::invalid_argument("conv2d: kernel must be (Cout,Cin,k,k), got " + shape_str(w.shape()));
    const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin)
        throw std::invalid_argument("conv2d: channel mismatch: input " + shape_str(x.shape()) +
                                    " vs kernel " + shape_str(w.shape()));
    if (w.dim(3) != k || k % 2 == 0)
        throw std::invalid_argument("conv2d: kernel must be square with odd extent, got " +
                                    shape_str(w.shape()));
    if (b.rank() != 1 || b.dim(0) != cout)
        throw std::invalid_argument("conv2d: bias must be (Cout), got " + shape_str(b.shape()));

    std::vector<double> out(static_cast<std::size_t>(cout) * static_cast<std::size_t>(h) *
                            static_cast<std::size_t>(wd));
    K().conv2d_fwd(out.data(), x.data(), w.data(), b.data(), static_cast<std::size_t>(cin),
                   static_cast<std::size_t>(cout), static_cast<std::size_t>(h),
                   static_cast<std::size_t>(wd), static_cast<std::size_t>(k));
    return make_result({cout, h, wd}, std::move(out), OpKind::conv2d, {x.impl(), w.impl(), b.impl()},
                       {cin, cout, h, wd, k});
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.values().size());
    K().relu(out.data(), x.data(), out.size());
    return make_result(x.shape(), std::move(out), OpKind::relu, {x.impl()});
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.values().size());
    // keep the image strictly inside (0,1) even where exp saturates
    static const double lo = std::numeric_limits<double>::min();
    static const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.data()[i];
        double y;
        if (v >= 0.0) {
            y = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            y = e / (1.0 + e);
        }
        out[i] = std::min(hi, std::max(lo, y));
    }
    return make_result(x.shape(), std::move(out), OpKind::sigmoid, {x.impl()});
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 3)
        throw std::invalid_argument("global_avg_pool: input must be (C,H,W), got " + shape_str(x.shape()));
    const int c = x.dim(0);
    const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * static_cast<std::size_t>(x.dim(2));
    std::vector<double> out(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch)
        out[static_cast<std::size_t>(ch)] =
            K().sum(x.data() + static_cast<std::size_t>(ch) * plane, plane) / static_cast<double>(plane);
    return make_result({c}, std::move(out), OpKind::global_avg_pool, {x.impl()},
                       {c, static_cast<int>(plane)});
}

Tensor reduce(const Tensor& x, Reduce kind, std::vector<int> axes) {
    const int rank = x.rank();
    std::vector<int> red(static_cast<std::size_t>(rank), 0);
    if (axes.empty()) {
        std::fill(red.begin(), red.end(), 1);
    } else {
        for (const int a : axes) {
            if (a < 0 || a >= rank)
                throw std::invalid_argument("reduce: axis " + std::to_string(a) +
                                            " out of range for shape " + shape_str(x.shape()));
            red[static_cast<std::size_t>(a)] = 1;
        }
    }
    Shape out_shape;
    std::int64_t count = 1;
    for (int a = 0; a < rank; ++a) {
        if (red[static_cast<std::size_t>(a)])
            count *= x.dim(a);
        else
            out_shape.push_back(x.dim(a));
    }

    std::vector<double> out(static_cast<std::size_t>(numel_of(out_shape)), 0.0);
    if (out.size() == 1) {
        out[0] = K().sum(x.data(), x.values().size());
    } else {
        std::vector<std::size_t> out_stride(static_cast<std::size_t>(rank), 0);
        std::size_t s = 1;
        for (int a = rank - 1; a >= 0; --a) {
            if (!red[static_cast<std::size_t>(a)]) {
                out_stride[static_cast<std::size_t>(a)] = s;
                s *= static_cast<std::size_t>(x.dim(a));
            }
        }
        std::vector<int> coord(static_cast<std::size_t>(rank), 0);
        std::size_t out_idx = 0;
        const std::size_t total = x.values().size();
        for (std::size_t i = 0; i < total; ++i) {
            out[out_idx] += x.data()[i];
            for (int a = rank - 1; a >= 0; --a) {
                auto ua = static_cast<std::size_t>(a);
                if (++coord[ua] < x.dim(a)) {
                    if (!red[ua]) out_idx += out_stride[ua];
                    break;
                }
                coord[ua] = 0;
                if (!red[ua]) out_idx -= out_stride[ua] * static_cast<std::size_t>(x.dim(a) - 1);
            }
        }
    }
    if (kind == Reduce::mean)
        for (double& v : out) v /= static_cast<double>(count);

    std::vector<int> ictx;
    ictx.push_back(rank);
    for (int a = 0; a < rank; ++a) ictx.push_back(x.dim(a));
    for (int a = 0; a < rank; ++a) ictx.push_back(red[static_cast<std::size_t>(a)]);
    return make_result(std::move(out_shape), std::move(out),
                       kind == Reduce::sum ? OpKind::reduce_sum : OpKind::reduce_mean, {x.impl()},
                       std::move(ictx));
}

Tensor sum(const Tensor& x) { return reduce(x, Reduce::sum); }
Tensor mean(const Tensor& x) { return reduce(x, Reduce::mean); }

Tensor softmax(const Tensor& x) {
    if (x.rank() != 1)
        throw std::invalid_argument("softmax: expected a rank-1 tensor, got " + shape_str(x.shape()));
    const std::size_t n = x.values().size();
    std::vector<double> out(n);
    double mx = x.data()[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x.data()[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x.data()[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= z;
    return make_result(x.shape(), std::move(out), OpKind::softmax, {x.impl()});
}

Tensor pixel_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 3)
        throw std::invalid_argument("pixel_cross_entropy: logits must be (K,H,W), got " +
                                    shape_str(logits.shape()));
    const int kcls = logits.dim(0);
    const std::size_t npix = static_cast<std::size_t>(logits.dim(1)) * static_cast<std::size_t>(logits.dim(2));
    if (labels.size() != npix)
        throw std::invalid_argument("pixel_cross_entropy: label count " + std::to_string(labels.size()) +
                                    " does not match " + std::to_string(npix) + " pixels");
    for (const int l : labels)
        if (l < 0 || l >= kcls)
            throw std::invalid_argument("pixel_cross_entropy: label " + std::to_string(l) +
                                        " out of range [0," + std::to_string(kcls) + ")");

    std::vector<double> probs(static_cast<std::size_t>(kcls) * npix);
    const double* lg = logits.data();
    double loss = 0.0;
    for (std::size_t px = 0; px < npix; ++px) {
        double mx = lg[px];
        for (int k = 1; k < kcls; ++k) mx = std::max(mx, lg[static_cast<std::size_t>(k) * npix + px]);
        double z = 0.0;
        for (int k = 0; k < kcls; ++k) {
            const double e = std::exp(lg[static_cast<std::size_t>(k) * npix + px] - mx);
            probs[static_cast<std::size_t>(k) * npix + px] = e;
            z += e;
        }
        const double lse = mx + std::log(z);
        loss += lse - lg[static_cast<std::size_t>(labels[px]) * npix + px];
        const double inv = 1.0 / z;
        for (int k = 0; k < kcls; ++k) probs[static_cast<std::size_t>(k) * npix + px] *= inv;
    }
    loss /= static_cast<double>(npix);

    std::vector<int> ictx;
    ictx.reserve(2 + labels.size());
    ictx.push_back(kcls);
    ictx.push_back(static_cast<int>(npix));
    ictx.insert(ictx.end(), labels.begin(), labels.end());
    return make_result({}, {loss}, OpKind::pixel_ce, {logits.impl()}, std::move(ictx), std::move(probs));
}

Tensor reshape(const Tensor& x, Shape s) {
    if (numel_of(s) != x.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(s));
    std::vector<double> out = x.values();
    return make_result(std::move(s), std::move(out), OpKind::reshape, {x.impl()});
}

Tensor row(const Tensor& x, int i) {
    if (x.rank() < 1)
        throw std::invalid_argument("row: cannot index a rank-0 tensor");
    if (i < 0 || i >= x.dim(0))
        throw std::invalid_argument("row: index " + std::to_string(i) + " out of range for shape " +
                                    shape_str(x.shape()));
    Shape s(x.shape().begin() + 1, x.shape().end());
    const std::size_t len = static_cast<std::size_t>(numel_of(s));
    const double* src = x.data() + static_cast<std::size_t>(i) * len;
    std::vector<double> out(src, src + len);
    return make_result(std::move(s), std::move(out), OpKind::row, {x.impl()}, {i});
}

}  // namespace maskd
