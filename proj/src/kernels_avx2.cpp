#include "maskd/kernels.hpp"

// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma and
// is only entered after the runtime CPU check in dispatch(); on non-x86
// builds it compiles to an empty table.

#if defined(__x86_64__) || defined(_M_X64)
#define MASKD_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define MASKD_HAVE_AVX2_TU 0
#endif

#include <algorithm>
#include <cstddef>

namespace maskd::kernels {

#if MASKD_HAVE_AVX2_TU

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void k_add(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(double* out, const double* x, double a, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

inline void axpy_n(double* y, double a, const double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), y0);
        y1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), y1);
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void k_axpy(double* y, double a, const double* x, std::size_t n) { axpy_n(y, a, x, n); }

void k_mul_acc(double* acc, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                    _mm256_loadu_pd(acc + i));
        _mm256_storeu_pd(acc + i, v);
    }
    for (; i < n; ++i) acc[i] += a[i] * b[i];
}

void k_relu(double* out, const double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_bwd(double* dx, const double* x, const double* g, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gv));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
}

void k_sigmoid_bwd(double* dx, const double* y, const double* g, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        __m256d d = _mm256_mul_pd(yv, _mm256_sub_pd(one, yv));
        __m256d v = _mm256_fmadd_pd(_mm256_loadu_pd(g + i), d, _mm256_loadu_pd(dx + i));
        _mm256_storeu_pd(dx + i, v);
    }
    for (; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
}

double k_sum(const double* x, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
        s1 = _mm256_add_pd(s1, _mm256_loadu_pd(x + i + 4));
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i];
    return s;
}

inline double dot_n(const double* a, const double* b, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double k_dot(const double* a, const double* b, std::size_t n) { return dot_n(a, b, n); }

void k_gemm_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc) std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l)
            axpy_n(c + i * n, a[i * k + l], b + l * n, n);
    }
}

void k_gemm_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double s = dot_n(a + i * k, b + j * k, k);
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
        for (std::size_t i = 0; i < m; ++i)
            axpy_n(c + i * n, a[l * m + i], b + l * n, n);
    }
}

// Convolution: same clipped row-shift decomposition as the reference kernel,
// with the row loop running through the FMA helpers above.

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
                    const std::size_t len = xe - xs;
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    for (std::size_t y = y0; y < y1; ++y) {
                        double* orow = oplane + y * w + xs;
                        const double* irow =
                            iplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * w + xs + dx;
                        axpy_n(orow, wv, irow, len);
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
                    const std::size_t len = xe - xs;
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    for (std::size_t y = y0; y < y1; ++y) {
                        double* drow = dplane + y * w + xs;
                        const double* grow =
                            gplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * w + xs + dx;
                        axpy_n(drow, wv, grow, len);
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
                    const std::size_t len = xe - xs;
                    const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                    const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                    double s = 0.0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* grow = gplane + y * w + xs;
                        const double* irow =
                            iplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * w + xs + dx;
                        s += dot_n(grow, irow, len);
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
    for (std::size_t co = 0; co < cout; ++co) dbias[co] += k_sum(g + co * plane, plane);
}

const Kernels avx2_table = {
    k_add,    k_sub,        k_mul,        k_scale,
    k_axpy,   k_mul_acc,    k_relu,       k_relu_bwd,
    k_sigmoid_bwd,
    k_sum,    k_dot,
    k_gemm_nn, k_gemm_nt,   k_gemm_tn,
    k_conv2d_fwd, k_conv2d_bwd_input, k_conv2d_bwd_weight, k_conv2d_bwd_bias,
};

}  // namespace

const Kernels* avx2() { return &avx2_table; }

#else

const Kernels* avx2() { return nullptr; }

#endif  // MASKD_HAVE_AVX2_TU

}  // namespace maskd::kernels
