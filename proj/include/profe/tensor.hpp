#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "profe/errors.hpp"

namespace profe {

// Dense row-major float32 tensor. Plain value type; gradients live in the
// autograd graph, not here.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> v;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(numel_of(shape), 0.0f);
  }

  Tensor(std::vector<std::size_t> s, std::vector<float> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != numel_of(shape))
      throw DimensionError("tensor data size " + std::to_string(v.size()) +
                           " does not match shape product " +
                           std::to_string(numel_of(shape)));
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  std::size_t numel() const { return v.size(); }

  // Matrix view helpers: a (B, C) tensor, or a 1-d tensor seen as one row.
  std::size_t rows() const {
    return shape.size() >= 2 ? shape[0] : 1;
  }
  std::size_t cols() const {
    return shape.size() >= 2 ? numel() / shape[0] : numel();
  }

  float& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  float at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shape mismatch, expected " +
                         a.shape_str() + " got " + b.shape_str());
}

// Batch of integer class labels plus the class count; one-hot rows are
// derived on demand.
struct LabelBatch {
  std::vector<int> labels;
  int n_classes = 0;

  LabelBatch() = default;
  LabelBatch(std::vector<int> l, int n) : labels(std::move(l)), n_classes(n) {
    for (int c : labels)
      if (c < 0 || c >= n_classes)
        throw DataError("label " + std::to_string(c) + " out of range [0," +
                        std::to_string(n_classes) + ")");
  }

  std::size_t size() const { return labels.size(); }

  Tensor one_hot() const {
    Tensor t({labels.size(), static_cast<std::size_t>(n_classes)});
    for (std::size_t i = 0; i < labels.size(); ++i)
      t.at(i, static_cast<std::size_t>(labels[i])) = 1.0f;
    return t;
  }
};

}  // namespace profe
