#include "profe/ops.hpp"

#include <algorithm>
#include <cmath>

namespace profe::ops {

Tensor softmax_T(const Tensor& logits, float T) {
  if (!(T > 0.0f)) throw ParameterError("softmax temperature must be > 0");
  const std::size_t rows = logits.rows(), cols = logits.cols();
  Tensor out(logits.shape.empty() ? std::vector<std::size_t>{cols}
                                  : logits.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    float mx = logits.at(r, 0);
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, logits.at(r, c));
    float sum = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) {
      float e = std::exp((logits.at(r, c) - mx) / T);
      out.at(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= sum;
  }
  return out;
}

Tensor log_softmax_T(const Tensor& logits, float T) {
  if (!(T > 0.0f)) throw ParameterError("softmax temperature must be > 0");
  const std::size_t rows = logits.rows(), cols = logits.cols();
  Tensor out(logits.shape.empty() ? std::vector<std::size_t>{cols}
                                  : logits.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    float mx = logits.at(r, 0);
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, logits.at(r, c));
    float sum = 0.0f;
    for (std::size_t c = 0; c < cols; ++c)
      sum += std::exp((logits.at(r, c) - mx) / T);
    const float lse = std::log(sum);
    for (std::size_t c = 0; c < cols; ++c)
      out.at(r, c) = (logits.at(r, c) - mx) / T - lse;
  }
  return out;
}

float cross_entropy(const Tensor& logits, const LabelBatch& labels) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (cols != static_cast<std::size_t>(labels.n_classes))
    throw DimensionError("cross_entropy: logits width " + std::to_string(cols) +
                         " != class count " +
                         std::to_string(labels.n_classes));
  if (labels.size() != rows)
    throw DimensionError("cross_entropy: batch size mismatch");
  Tensor ls = log_softmax_T(logits, 1.0f);
  float total = 0.0f;
  for (std::size_t r = 0; r < rows; ++r)
    total -= ls.at(r, static_cast<std::size_t>(labels.labels[r]));
  return total / static_cast<float>(rows);
}

float kl_div(const Tensor& p_t, const Tensor& log_p_s) {
  require_same_shape(p_t, log_p_s, "kl_div");
  const std::size_t rows = p_t.rows(), cols = p_t.cols();
  float total = 0.0f;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      float p = p_t.at(r, c);
      if (p < 0.0f)
        throw DataError("kl_div: negative probability " + std::to_string(p));
      if (p > 0.0f) total += p * (std::log(p) - log_p_s.at(r, c));
    }
  }
  return total / static_cast<float>(rows);
}

float mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  float total = 0.0f;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    float d = a.v[i] - b.v[i];
    total += d * d;
  }
  return total / static_cast<float>(a.numel());
}

Tensor matmul(const Tensor& a, const Tensor& w) {
  const std::size_t B = a.rows(), K = a.cols();
  if (w.shape.size() != 2 || w.shape[0] != K)
    throw DimensionError("matmul: inner dimension mismatch, lhs " +
                         a.shape_str() + " rhs " + w.shape_str());
  const std::size_t C = w.shape[1];
  Tensor out({B, C});
  // ikj order keeps the inner loop contiguous on both out and w.
  for (std::size_t i = 0; i < B; ++i) {
    const float* arow = &a.v[i * K];
    float* orow = &out.v[i * C];
    for (std::size_t k = 0; k < K; ++k) {
      const float aik = arow[k];
      if (aik == 0.0f) continue;
      const float* wrow = &w.v[k * C];
      for (std::size_t j = 0; j < C; ++j) orow[j] += aik * wrow[j];
    }
  }
  return out;
}

}  // namespace profe::ops
