#include "maskd/kernels.hpp"

#include <algorithm>
#include <cstddef>

// Reference kernels: plain loops, no intrinsics. These define the semantics
// the SIMD variants are equivalence-tested against.

namespace maskd::kernels {
namespace {

void k_add(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(double* out, const double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void k_axpy(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void k_mul_acc(double* acc, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

void k_relu(double* out, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd(double* dx, const double* x, const double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
}

void k_sigmoid_bwd(double* dx, const double* y, const double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
}

double k_sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double k_dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void k_gemm_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc) std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            const double* brow = b + l * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void k_gemm_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            const double* arow = a + i * k;
            const double* brow = b + j * k;
            for (std::size_t l = 0; l < k; ++l) s += arow[l] * brow[l];
            if (acc)
                c[i * n + j] += s;
            else
                c[i * n + j] = s;
        }
    }
}

void k_gemm_tn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc) std::fill(c, c + m * n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// The three convolution kernels share one decomposition: for every
// (cout,cin,ky,kx) the contribution is a row-shifted axpy/dot with the
// shift clipped at the image border (zero padding).

void k_conv2d_fwd(double* out, const double* in, const double* wgt,
                  const double* bias, std::size_t cin, std::size_t cout,
                  std::size_t h, std::size_t w, std::size_t k) {
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(k) / 2;
    const std::size_t plane = h * w;
    for (std::size_t co = 0; co < cout; ++co) {
        double* oplane = out + co * plane;
        std::fill(oplane, oplane + plane, bias ? bias[co] : 0.0);
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* iplane = in + ci * plane;
            const double* wk = wgt + (co * cin + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - p;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - p;
                    const double wv = wk[ky * k + kx];
                    if (wv == 0.0) continue;
                    const std::size_t xs = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t xe = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                    if (xs >= xe) continue;
                    for (std::size_t y = 0; y < h; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        double* orow = oplane + y * w + xs;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * w + xs + dx;
                        const std::size_t len = xe - xs;
                        for (std::size_t x = 0; x < len; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

void k_conv2d_bwd_input(double* din, const double* g, const double* wgt,
                        std::size_t cin, std::size_t cout,
                        std::size_t h, std::size_t w, std::size_t k) {
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(k) / 2;
    const std::size_t plane = h * w;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        double* dplane = din + ci * plane;
        for (std::size_t co = 0; co < cout; ++co) {
            const double* gplane = g + co * plane;
            const double* wk = wgt + (co * cin + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t dy = p - static_cast<std::ptrdiff_t>(ky);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t dx = p - static_cast<std::ptrdiff_t>(kx);
                    const double wv = wk[ky * k + kx];
                    if (wv == 0.0) continue;
                    const std::size_t xs = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t xe = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                    if (xs >= xe) continue;
                    for (std::size_t y = 0; y < h; ++y) {
                        const std::ptrdiff_t gy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (gy < 0 || gy >= static_cast<std::ptrdiff_t>(h)) continue;
                        double* drow = dplane + y * w + xs;
                        const double* grow = gplane + static_cast<std::size_t>(gy) * w + xs + dx;
                        const std::size_t len = xe - xs;
                        for (std::size_t x = 0; x < len; ++x) drow[x] += wv * grow[x];
                    }
                }
            }
        }
    }
}

void k_conv2d_bwd_weight(double* dwgt, const double* g, const double* in,
                         std::size_t cin, std::size_t cout,
                         std::size_t h, std::size_t w, std::size_t k) {
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(k) / 2;
    const std::size_t plane = h * w;
    for (std::size_t co = 0; co < cout; ++co) {
        const double* gplane = g + co * plane;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* iplane = in + ci * plane;
            double* wk = dwgt + (co * cin + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - p;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - p;
                    const std::size_t xs = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                    const std::size_t xe = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
                    if (xs >= xe) continue;
                    double s = 0.0;
                    for (std::size_t y = 0; y < h; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) + dy;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const double* grow = gplane + y * w + xs;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * w + xs + dx;
                        const std::size_t len = xe - xs;
                        for (std::size_t x = 0; x < len; ++x) s += grow[x] * irow[x];
                    }
                    wk[ky * k + kx] += s;
                }
            }
        }
    }
}

void k_conv2d_bwd_bias(double* dbias, const double* g,
                       std::size_t cout, std::size_t h, std::size_t w) {
    const std::size_t plane = h * w;
    for (std::size_t co = 0; co < cout; ++co) {
        double s = 0.0;
        const double* gplane = g + co * plane;
        for (std::size_t i = 0; i < plane; ++i) s += gplane[i];
        dbias[co] += s;
    }
}

}  // namespace

const Kernels& scalar() {
    static const Kernels table = {
        k_add,    k_sub,        k_mul,        k_scale,
        k_axpy,   k_mul_acc,    k_relu,       k_relu_bwd,
        k_sigmoid_bwd,
        k_sum,    k_dot,
        k_gemm_nn, k_gemm_nt,   k_gemm_tn,
        k_conv2d_fwd, k_conv2d_bwd_input, k_conv2d_bwd_weight, k_conv2d_bwd_bias,
    };
    return table;
}

}  // namespace maskd::kernels
