#pragma once

#include "profe/tensor.hpp"

namespace profe::ops {

// Row-wise temperature softmax. Each row of the result sums to 1.
Tensor softmax_T(const Tensor& logits, float T);

// Row-wise temperature log-softmax, computed with max subtraction so large
// logits stay finite.
Tensor log_softmax_T(const Tensor& logits, float T);

// Mean over the batch of -sum_j y_j ln(softmax(logits)_j), T=1.
float cross_entropy(const Tensor& logits, const LabelBatch& labels);

// Mean over rows of sum_j p_t[j] * (ln p_t[j] - log_p_s[j]), with
// 0*ln(0) := 0. p_t rows must be probability vectors.
float kl_div(const Tensor& p_t, const Tensor& log_p_s);

// Mean over all elements of (a-b)^2.
float mse(const Tensor& a, const Tensor& b);

// C = A(B,K) * W(K,C), row-major.
Tensor matmul(const Tensor& a, const Tensor& w);

}  // namespace profe::ops
