#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "maskd/kernels.hpp"
#include "maskd/rng.hpp"

using namespace maskd;
namespace kn = maskd::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
        CHECK(std::abs(a[i] - b[i]) / denom <= tol);
    }
}

bool have_avx2() { return kn::avx2() != nullptr && [] {
#if defined(__x86_64__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}(); }

}  // namespace

TEST_CASE("elementwise kernels: scalar and avx2 agree across remainder lengths") {
    if (!have_avx2()) return;
    const auto& s = kn::scalar();
    const auto& v = *kn::avx2();
    Rng rng(7);
    for (const std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{4}, std::size_t{7},
                                std::size_t{8}, std::size_t{17}, std::size_t{63}, std::size_t{64},
                                std::size_t{1000}}) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        std::vector<double> r1(n), r2(n);

        s.add(r1.data(), a.data(), b.data(), n);
        v.add(r2.data(), a.data(), b.data(), n);
        check_close(r1, r2, 0.0);

        s.sub(r1.data(), a.data(), b.data(), n);
        v.sub(r2.data(), a.data(), b.data(), n);
        check_close(r1, r2, 0.0);

        s.mul(r1.data(), a.data(), b.data(), n);
        v.mul(r2.data(), a.data(), b.data(), n);
        check_close(r1, r2, 0.0);

        s.scale(r1.data(), a.data(), 1.7, n);
        v.scale(r2.data(), a.data(), 1.7, n);
        check_close(r1, r2, 0.0);

        r1 = b; r2 = b;
        s.axpy(r1.data(), 0.37, a.data(), n);
        v.axpy(r2.data(), 0.37, a.data(), n);
        check_close(r1, r2, 1e-15);

        r1 = b; r2 = b;
        s.mul_acc(r1.data(), a.data(), b.data(), n);
        v.mul_acc(r2.data(), a.data(), b.data(), n);
        check_close(r1, r2, 1e-15);

        s.relu(r1.data(), a.data(), n);
        v.relu(r2.data(), a.data(), n);
        check_close(r1, r2, 0.0);

        r1.assign(n, 0.1); r2.assign(n, 0.1);
        s.relu_bwd(r1.data(), a.data(), b.data(), n);
        v.relu_bwd(r2.data(), a.data(), b.data(), n);
        check_close(r1, r2, 0.0);

        const auto y = random_vec(rng, n, 0.01, 0.99);
        r1.assign(n, 0.0); r2.assign(n, 0.0);
        s.sigmoid_bwd(r1.data(), y.data(), b.data(), n);
        v.sigmoid_bwd(r2.data(), y.data(), b.data(), n);
        check_close(r1, r2, 1e-15);

        CHECK(std::abs(s.sum(a.data(), n) - v.sum(a.data(), n)) <= 1e-12 * (1.0 + n));
        CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) <=
              1e-12 * (1.0 + n));
    }
}

TEST_CASE("gemm kernels agree with each other and a triple loop") {
    Rng rng(11);
    const auto& s = kn::scalar();
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.uniform_int(7);
        const std::size_t k = 1 + rng.uniform_int(9);
        const std::size_t n = 1 + rng.uniform_int(70);  // exercise vector remainders
        const auto a = random_vec(rng, m * k);
        const auto b = random_vec(rng, k * n);

        std::vector<double> ref(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
                ref[i * n + j] = acc;
            }

        std::vector<double> got(m * n, 7.0);
        s.gemm_nn(got.data(), a.data(), b.data(), m, k, n, false);
        check_close(got, ref, 1e-12);

        if (have_avx2()) {
            std::vector<double> got2(m * n, 7.0);
            kn::avx2()->gemm_nn(got2.data(), a.data(), b.data(), m, k, n, false);
            check_close(got2, ref, 1e-12);
        }

        // nt route: compute A * (B^T)^T via gemm_nt with B stored transposed
        std::vector<double> bt(n * k);
        for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < n; ++j) bt[j * k + l] = b[l * n + j];
        s.gemm_nt(got.data(), a.data(), bt.data(), m, k, n, false);
        check_close(got, ref, 1e-12);
        if (have_avx2()) {
            std::vector<double> got2(m * n);
            kn::avx2()->gemm_nt(got2.data(), a.data(), bt.data(), m, k, n, false);
            check_close(got2, ref, 1e-12);
        }

        // tn route: compute (A^T)^T * B via gemm_tn with A stored transposed
        std::vector<double> at(k * m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t l = 0; l < k; ++l) at[l * m + i] = a[i * k + l];
        s.gemm_tn(got.data(), at.data(), b.data(), m, k, n, false);
        check_close(got, ref, 1e-12);
        if (have_avx2()) {
            std::vector<double> got2(m * n);
            kn::avx2()->gemm_tn(got2.data(), at.data(), b.data(), m, k, n, false);
            check_close(got2, ref, 1e-12);
        }

        // accumulate flag adds on top of existing contents
        std::vector<double> accd(m * n, 0.5);
        s.gemm_nn(accd.data(), a.data(), b.data(), m, k, n, true);
        for (std::size_t i = 0; i < m * n; ++i)
            CHECK(std::abs(accd[i] - (0.5 + ref[i])) <= 1e-12);
    }
}

namespace {

// Direct six-nested-loop cross-correlation with zero padding.
std::vector<double> conv_oracle(const std::vector<double>& in, const std::vector<double>& w,
                                const std::vector<double>& bias, int cin, int cout, int h, int wd,
                                int k) {
    const int p = k / 2;
    std::vector<double> out(static_cast<std::size_t>(cout) * h * wd, 0.0);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < wd; ++x) {
                double acc = bias[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = y + ky - p;
                            const int ix = x + kx - p;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                            acc += in[(static_cast<std::size_t>(ci) * h + iy) * wd + ix] *
                                   w[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
                        }
                out[(static_cast<std::size_t>(co) * h + y) * wd + x] = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d forward matches the nested-loop oracle, scalar and avx2") {
    Rng rng(13);
    for (int trial = 0; trial < 12; ++trial) {
        const int cin = 1 + static_cast<int>(rng.uniform_int(4));
        const int cout = 1 + static_cast<int>(rng.uniform_int(4));
        const int h = 3 + static_cast<int>(rng.uniform_int(10));
        const int wd = 3 + static_cast<int>(rng.uniform_int(10));
        const int k = trial % 3 == 0 ? 1 : (trial % 3 == 1 ? 3 : 5);
        const auto in = random_vec(rng, static_cast<std::size_t>(cin) * h * wd);
        const auto w = random_vec(rng, static_cast<std::size_t>(cout) * cin * k * k);
        const auto b = random_vec(rng, static_cast<std::size_t>(cout));
        const auto ref = conv_oracle(in, w, b, cin, cout, h, wd, k);

        std::vector<double> got(ref.size());
        kn::scalar().conv2d_fwd(got.data(), in.data(), w.data(), b.data(), cin, cout, h, wd, k);
        check_close(got, ref, 1e-12);

        if (have_avx2()) {
            std::vector<double> got2(ref.size());
            kn::avx2()->conv2d_fwd(got2.data(), in.data(), w.data(), b.data(), cin, cout, h, wd, k);
            check_close(got2, ref, 1e-12);
        }
    }
}

TEST_CASE("conv2d backward kernels agree between variants") {
    if (!have_avx2()) return;
    Rng rng(17);
    for (int trial = 0; trial < 8; ++trial) {
        const int cin = 1 + static_cast<int>(rng.uniform_int(3));
        const int cout = 1 + static_cast<int>(rng.uniform_int(3));
        const int h = 4 + static_cast<int>(rng.uniform_int(9));
        const int wd = 4 + static_cast<int>(rng.uniform_int(9));
        const int k = trial % 2 == 0 ? 3 : 1;
        const auto in = random_vec(rng, static_cast<std::size_t>(cin) * h * wd);
        const auto w = random_vec(rng, static_cast<std::size_t>(cout) * cin * k * k);
        const auto g = random_vec(rng, static_cast<std::size_t>(cout) * h * wd);

        std::vector<double> din1(in.size(), 0.25), din2(in.size(), 0.25);
        kn::scalar().conv2d_bwd_input(din1.data(), g.data(), w.data(), cin, cout, h, wd, k);
        kn::avx2()->conv2d_bwd_input(din2.data(), g.data(), w.data(), cin, cout, h, wd, k);
        check_close(din1, din2, 1e-13);

        std::vector<double> dw1(w.size(), 0.0), dw2(w.size(), 0.0);
        kn::scalar().conv2d_bwd_weight(dw1.data(), g.data(), in.data(), cin, cout, h, wd, k);
        kn::avx2()->conv2d_bwd_weight(dw2.data(), g.data(), in.data(), cin, cout, h, wd, k);
        check_close(dw1, dw2, 1e-12);

        std::vector<double> db1(static_cast<std::size_t>(cout), 0.0), db2(db1);
        kn::scalar().conv2d_bwd_bias(db1.data(), g.data(), cout, h, wd);
        kn::avx2()->conv2d_bwd_bias(db2.data(), g.data(), cout, h, wd);
        check_close(db1, db2, 1e-12);
    }
}

TEST_CASE("dispatch honors forced variants") {
    kn::force_variant("scalar");
    CHECK(kn::active_variant() == "scalar");
    CHECK(&kn::dispatch() == &kn::scalar());
    if (have_avx2()) {
        kn::force_variant("avx2");
        CHECK(kn::active_variant() == "avx2");
    }
    kn::force_variant("auto");
    CHECK_THROWS(kn::force_variant("sse9"));
}
