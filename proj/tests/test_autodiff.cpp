#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "maskd/gradcheck.hpp"
#include "maskd/ops.hpp"
#include "maskd/rng.hpp"

using namespace maskd;

namespace {

Tensor random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(s));
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("matmul: identity, zero annihilator, triple-loop oracle") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from({2, 2}, {3, 4, 5, 6});
    Tensor r = matmul(eye, m);
    CHECK(r.values() == std::vector<double>{3, 4, 5, 6});

    Rng rng(3);
    Tensor z = Tensor::zeros({1, 3});
    Tensor any = random_tensor(rng, {3, 2});
    for (const double v : matmul(z, any).values()) CHECK(v == 0.0);

    Tensor a = random_tensor(rng, {4, 5});
    Tensor b = random_tensor(rng, {5, 3});
    Tensor c = matmul(a, b);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 5; ++k) acc += a.data()[i * 5 + k] * b.data()[k * 3 + j];
            CHECK(std::abs(c.data()[i * 3 + j] - acc) <= 1e-12);
        }

    CHECK_THROWS_AS(matmul(a, Tensor::zeros({4, 2})), std::invalid_argument);
}

TEST_CASE("conv2d: identity kernel, zero kernel bias, nested-loop oracle") {
    Rng rng(5);
    Tensor x = random_tensor(rng, {2, 4, 5});
    Tensor ident = Tensor::zeros({2, 2, 1, 1});
    ident.data()[0] = 1.0;  // out0 <- in0
    ident.data()[3] = 1.0;  // out1 <- in1
    Tensor zb = Tensor::zeros({2});
    CHECK(conv2d(x, ident, zb).values() == x.values());

    Tensor zk = Tensor::zeros({3, 2, 3, 3});
    Tensor bias = Tensor::from({3}, {0.3, -1.0, 2.5});
    Tensor out = conv2d(x, zk, bias);
    for (int co = 0; co < 3; ++co)
        for (int i = 0; i < 20; ++i) CHECK(out.data()[co * 20 + i] == bias.data()[co]);

    // random 3-channel case against a direct six-nested-loop evaluation
    const int cin = 3, cout = 2, h = 5, wd = 6, k = 3, p = 1;
    Tensor in = random_tensor(rng, {cin, h, wd});
    Tensor w = random_tensor(rng, {cout, cin, k, k});
    Tensor b = random_tensor(rng, {cout});
    Tensor got = conv2d(in, w, b);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < wd; ++x2) {
                double acc = b.data()[co];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = y + ky - p, ix = x2 + kx - p;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                            acc += in.data()[(ci * h + iy) * wd + ix] *
                                   w.data()[((co * cin + ci) * k + ky) * k + kx];
                        }
                CHECK(std::abs(got.data()[(co * h + y) * wd + x2] - acc) <= 1e-10);
            }

    CHECK_THROWS_AS(conv2d(in, Tensor::zeros({2, 3, 2, 2}), Tensor::zeros({2})),
                    std::invalid_argument);  // even k
    CHECK_THROWS_AS(conv2d(in, Tensor::zeros({2, 4, 3, 3}), Tensor::zeros({2})),
                    std::invalid_argument);  // channel mismatch
}

TEST_CASE("global_avg_pool values and gradient") {
    Tensor c = Tensor::full({3, 2, 2}, 0.7);
    for (const double v : global_avg_pool(c).values()) CHECK(v == doctest::Approx(0.7));

    Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    CHECK(global_avg_pool(x).item() == doctest::Approx(2.5));

    Rng rng(9);
    Tensor r = random_tensor(rng, {2, 3, 3});
    r.set_requires_grad();
    const double err = grad_check(
        [](const std::vector<Tensor>& in) { return sum(sigmoid(global_avg_pool(in[0]))); }, {r});
    CHECK(err <= 1e-6);
}

TEST_CASE("sigmoid: values, derivative, open-interval range") {
    Tensor z = Tensor::scalar(0.0);
    CHECK(sigmoid(z).item() == 0.5);
    CHECK(sigmoid(Tensor::scalar(std::log(3.0))).item() == doctest::Approx(0.75).epsilon(1e-12));

    Tensor x = Tensor::scalar(0.0);
    x.set_requires_grad();
    {
        Tape tape;
        Tensor y = sigmoid(x);
        tape.backward(y);
    }
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));

    for (const double v : {1e3, -1e3, 745.0, -745.0, 1e308, -1e308}) {
        const double y = sigmoid(Tensor::scalar(v)).item();
        CHECK(y > 0.0);
        CHECK(y < 1.0);
    }
}

TEST_CASE("hadamard: units, zeros, broadcast oracle, rejections") {
    Rng rng(21);
    Tensor a = random_tensor(rng, {3, 4});
    CHECK(hadamard(a, Tensor::ones({3, 4})).values() == a.values());
    for (const double v : hadamard(a, Tensor::zeros({3, 4})).values()) CHECK(v == 0.0);

    Tensor mask = random_tensor(rng, {4}, 0.0, 1.0);
    Tensor got = hadamard(a, mask);
    for (int r = 0; r < 3; ++r)
        for (int ccol = 0; ccol < 4; ++ccol)
            CHECK(std::abs(got.data()[r * 4 + ccol] - a.data()[r * 4 + ccol] * mask.data()[ccol]) <=
                  1e-12);
    CHECK(hadamard(mask, a).values() == got.values());

    CHECK_THROWS_AS(hadamard(a, Tensor::zeros({5})), std::invalid_argument);
    CHECK_THROWS_AS(hadamard(a, Tensor::zeros({4, 3})), std::invalid_argument);
}

TEST_CASE("reduce: sums, means, gradient, axis validation") {
    CHECK(sum(Tensor::ones({3, 4})).item() == 12.0);
    CHECK(mean(Tensor::from({2}, {2, 4})).item() == 3.0);

    Rng rng(23);
    Tensor x = random_tensor(rng, {2, 3, 4});
    // row sums over the trailing axis against direct accumulation
    Tensor rs = reduce(x, Reduce::sum, {2});
    REQUIRE(rs.shape() == Shape{2, 3});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += x.data()[(i * 3 + j) * 4 + k];
            CHECK(std::abs(rs.data()[i * 3 + j] - acc) <= 1e-12);
        }
    // middle-axis mean
    Tensor ms = reduce(x, Reduce::mean, {1});
    REQUIRE(ms.shape() == Shape{2, 4});
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 4; ++k) {
            double acc = 0.0;
            for (int j = 0; j < 3; ++j) acc += x.data()[(i * 3 + j) * 4 + k];
            CHECK(std::abs(ms.data()[i * 4 + k] - acc / 3.0) <= 1e-12);
        }

    x.set_requires_grad();
    const double err = grad_check(
        [](const std::vector<Tensor>& in) {
            return sum(sigmoid(reduce(in[0], Reduce::mean, {1})));
        },
        {x});
    CHECK(err <= 1e-6);

    CHECK_THROWS_AS(reduce(x, Reduce::sum, {3}), std::invalid_argument);
}

TEST_CASE("pixel_cross_entropy: uniform, saturated, naive oracle, label validation") {
    Tensor uniform = Tensor::zeros({4, 2, 3});
    std::vector<int> labels(6, 2);
    CHECK(pixel_cross_entropy(uniform, labels).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Tensor sat = Tensor::zeros({4, 1, 1});
    sat.data()[1] = 50.0;
    CHECK(pixel_cross_entropy(sat, {1}).item() < 1e-20);

    Rng rng(31);
    Tensor lg = random_tensor(rng, {3, 4, 4}, -2.0, 2.0);
    std::vector<int> lab(16);
    for (auto& l : lab) l = static_cast<int>(rng.uniform_int(3));
    double ref = 0.0;
    for (int px = 0; px < 16; ++px) {
        double z = 0.0;
        for (int k = 0; k < 3; ++k) z += std::exp(lg.data()[k * 16 + px]);
        ref += std::log(z) - lg.data()[lab[static_cast<std::size_t>(px)] * 16 + px];
    }
    ref /= 16.0;
    CHECK(std::abs(pixel_cross_entropy(lg, lab).item() - ref) <= 1e-10);

    CHECK_THROWS_AS(pixel_cross_entropy(lg, std::vector<int>(16, 3)), std::invalid_argument);
    CHECK_THROWS_AS(pixel_cross_entropy(lg, std::vector<int>(15, 0)), std::invalid_argument);
}

TEST_CASE("backward: seed gradients, analytic cases, rejections") {
    Rng rng(37);
    Tensor x = random_tensor(rng, {2, 3});
    x.set_requires_grad();
    {
        Tape tape;
        tape.backward(sum(x));
    }
    for (const double g : x.grad()) CHECK(g == 1.0);

    x.impl()->grad.clear();
    {
        Tape tape;
        tape.backward(sum(hadamard(x, x)));
    }
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-12));

    {
        Tape tape;
        Tensor y = scale(x, 2.0);
        CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);            // non-scalar
        CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), std::invalid_argument);  // off-tape
    }
}

TEST_CASE("gradient accumulation is additive until cleared") {
    Tensor x = Tensor::from({2}, {1.0, 2.0});
    x.set_requires_grad();
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape;
        tape.backward(sum(x));
    }
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("tape replay: identical forwards are bit-identical") {
    Rng rng(41);
    Tensor x = random_tensor(rng, {3, 6, 6});
    Tensor w = random_tensor(rng, {4, 3, 3, 3});
    Tensor b = random_tensor(rng, {4});
    auto run = [&] {
        Tensor h = relu(conv2d(x, w, b));
        return sum(sigmoid(global_avg_pool(h)));
    };
    CHECK(run().item() == run().item());
}

TEST_CASE("grad_check: analytic sigmoid case and rejection of non-scalar f") {
    Tensor x = Tensor::zeros({5});
    x.set_requires_grad();
    const double err =
        grad_check([](const std::vector<Tensor>& in) { return sum(sigmoid(in[0])); }, {x});
    CHECK(err <= 1e-8);

    CHECK_THROWS_AS(
        grad_check([](const std::vector<Tensor>& in) { return scale(in[0], 2.0); }, {x}),
        std::invalid_argument);
}

TEST_CASE("every primitive passes grad_check over 100 random trials") {
    Rng rng(43);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        // mixed composite touching most primitives with small tensors
        Tensor a = random_tensor(rng, {2, 3});
        Tensor b = random_tensor(rng, {3, 4});
        Tensor v = random_tensor(rng, {4}, 0.2, 1.0);
        Tensor s = random_tensor(rng, {}, 0.5, 1.5);
        a.set_requires_grad();
        b.set_requires_grad();
        v.set_requires_grad();
        s.set_requires_grad();
        const double err = grad_check(
            [](const std::vector<Tensor>& in) {
                Tensor mm = matmul(in[0], in[1]);          // (2,4)
                Tensor h = hadamard(mm, in[2]);            // broadcast row mask
                Tensor t = sigmoid(sub(h, add(h, scale(h, -0.5))));
                Tensor r = reduce(t, Reduce::mean, {0});   // (4)
                Tensor sm = softmax(r);
                Tensor q = sdiv(sum(hadamard(sm, sm)), in[3]);
                return add(smul(in[3], q), sum(relu(add_const(mm, 0.1))));
            },
            {a, b, v, s});
        worst = std::max(worst, err);
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("conv and pooling pass grad_check with all parameters differentiable") {
    Rng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor(rng, {2, 4, 4});
        Tensor w = random_tensor(rng, {3, 2, 3, 3});
        Tensor b = random_tensor(rng, {3});
        x.set_requires_grad();
        w.set_requires_grad();
        b.set_requires_grad();
        const double err = grad_check(
            [](const std::vector<Tensor>& in) {
                Tensor y = conv2d(in[0], in[1], in[2]);
                return sum(sigmoid(global_avg_pool(relu(y))));
            },
            {x, w, b});
        CHECK(err <= 1e-5);
    }
}

TEST_CASE("pixel_cross_entropy passes grad_check") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor lg = random_tensor(rng, {3, 3, 3}, -1.5, 1.5);
        std::vector<int> lab(9);
        for (auto& l : lab) l = static_cast<int>(rng.uniform_int(3));
        lg.set_requires_grad();
        const double err = grad_check(
            [&lab](const std::vector<Tensor>& in) { return pixel_cross_entropy(in[0], lab); }, {lg});
        CHECK(err <= 1e-5);
    }
}

TEST_CASE("row and reshape route gradients to the right places") {
    Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    m.set_requires_grad();
    {
        Tape tape;
        tape.backward(sum(hadamard(row(m, 1), row(m, 1))));
    }
    CHECK(m.grad()[0] == 0.0);
    CHECK(m.grad()[3] == doctest::Approx(8.0));
    CHECK_THROWS_AS(row(m, 2), std::invalid_argument);
    CHECK_THROWS_AS(reshape(m, {4, 2}), std::invalid_argument);
}
