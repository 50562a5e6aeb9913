#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the tensor engine. Every kernel has a
// scalar reference implementation and may have SIMD variants; the active
// variant is chosen once at startup (see dispatch()) and never changes
// mid-run, so repeated runs on one machine are bit-identical.
//
// Conventions:
//   - all buffers are dense row-major double arrays owned by the caller
//   - "acc" kernels accumulate (+=) into the destination, used by backward
//     passes; plain kernels overwrite
//   - convolutions are cross-correlations, stride 1, zero padding (k-1)/2,
//     k odd, so spatial extents are preserved

namespace maskd::kernels {

struct Kernels {
    // elementwise
    void (*add)(double* out, const double* a, const double* b, std::size_t n);
    void (*sub)(double* out, const double* a, const double* b, std::size_t n);
    void (*mul)(double* out, const double* a, const double* b, std::size_t n);
    void (*scale)(double* out, const double* x, double a, std::size_t n);
    void (*axpy)(double* y, double a, const double* x, std::size_t n);      // y += a*x
    void (*mul_acc)(double* acc, const double* a, const double* b, std::size_t n); // acc += a.*b
    void (*relu)(double* out, const double* x, std::size_t n);
    void (*relu_bwd)(double* dx, const double* x, const double* g, std::size_t n);   // dx += g*(x>0)
    void (*sigmoid_bwd)(double* dx, const double* y, const double* g, std::size_t n); // dx += g*y*(1-y)

    // reductions
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);

    // dense matrix products, row-major
    // gemm_nn: C(m,n) <- A(m,k) * B(k,n)        (+= when acc)
    // gemm_nt: C(m,n) <- A(m,k) * B(n,k)^T      (+= when acc)
    // gemm_tn: C(m,n) <- A(k,m)^T * B(k,n)      (+= when acc)
    void (*gemm_nn)(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
    void (*gemm_nt)(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
    void (*gemm_tn)(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);

    // 2-d convolution, layout in (cin,h,w), w (cout,cin,k,k), out (cout,h,w)
    void (*conv2d_fwd)(double* out, const double* in, const double* wgt,
                       const double* bias, std::size_t cin, std::size_t cout,
                       std::size_t h, std::size_t w, std::size_t k);
    void (*conv2d_bwd_input)(double* din, const double* g, const double* wgt,
                             std::size_t cin, std::size_t cout,
                             std::size_t h, std::size_t w, std::size_t k);
    void (*conv2d_bwd_weight)(double* dwgt, const double* g, const double* in,
                              std::size_t cin, std::size_t cout,
                              std::size_t h, std::size_t w, std::size_t k);
    void (*conv2d_bwd_bias)(double* dbias, const double* g,
                            std::size_t cout, std::size_t h, std::size_t w);
};

// Kernel tables. avx2() is null when the build or the CPU lacks AVX2.
const Kernels& scalar();
const Kernels* avx2();

// Active table. Defaults to the best variant the CPU supports; the
// MASKD_KERNELS environment variable ("scalar", "avx2", "auto") overrides.
const Kernels& dispatch();

// Force a variant by name ("scalar", "avx2", "auto"); throws on an unknown
// name or an unsupported variant. Intended for tests and the CLI.
void force_variant(const std::string& name);

// Name of the variant dispatch() currently returns.
std::string active_variant();

}  // namespace maskd::kernels
