#pragma once

#include <vector>

#include "maskd/tensor.hpp"

namespace maskd {

enum class Reduce { sum, mean };

// Elementwise, equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

// Hadamard product. Shapes must be equal, or one operand may be a rank-1
// mask of length HW against a rank-2 feature (C, HW); broadcasting beyond
// that single pattern is rejected.
Tensor hadamard(const Tensor& a, const Tensor& b);

// Scalar-tensor arithmetic: s is a one-element tensor.
Tensor smul(const Tensor& s, const Tensor& x);  // s * x
Tensor sdiv(const Tensor& x, const Tensor& s);  // x / s

// Constant arithmetic.
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);

Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation, stride 1, zero padding (k-1)/2; spatial extents are
// preserved. x (Cin,H,W), w (Cout,Cin,k,k) with k odd, b (Cout).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);

// Elementwise logistic, stable over the full double range; outputs are
// clamped into the open interval (0,1).
Tensor sigmoid(const Tensor& x);

Tensor global_avg_pool(const Tensor& x);  // (C,H,W) -> (C)

// Reduction over `axes` (empty = all axes, producing a rank-0 scalar).
Tensor reduce(const Tensor& x, Reduce kind, std::vector<int> axes = {});
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor softmax(const Tensor& x);  // rank-1

// Mean over pixels of -log softmax(logits)[label]; log-sum-exp stabilized.
// logits (K,H,W), labels row-major H*W with entries in [0,K).
Tensor pixel_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor reshape(const Tensor& x, Shape s);

// x[i] along axis 0; result has shape x.shape[1:].
Tensor row(const Tensor& x, int i);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return hadamard(a, b); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }

}  // namespace maskd
