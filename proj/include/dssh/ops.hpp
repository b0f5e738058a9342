#pragma once

#include <optional>
#include <vector>

#include "dssh/tensor.hpp"

namespace dssh::ad {

// Binary elementwise ops accept identical shapes, or a single-element tensor
// on either side (broadcast as a scalar).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
// Exponent clamped at `cap`; sets *clamped when any element hit the cap.
Tensor exp_clamped(const Tensor& x, double cap, bool* clamped = nullptr);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// log(1 + exp(x)) as max(x, 0) + log1p(exp(-|x|)).
Tensor softplus(const Tensor& x);

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// x [B x in] * w [in x out] + bias [out]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor sum(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor mean(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);

// Column-wise operations on rank-2 tensors.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// [B x 1] -> [B x n] by repetition.
Tensor repeat_cols(const Tensor& x, std::size_t n);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator+(double c, const Tensor& a) { return add_scalar(a, c); }
inline Tensor operator-(double c, const Tensor& a) { return add_scalar(neg(a), c); }
inline Tensor operator/(const Tensor& a, double c) { return scale(a, 1.0 / c); }

}  // namespace dssh::ad
