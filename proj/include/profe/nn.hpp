#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "profe/autograd.hpp"
#include "profe/tensor.hpp"

namespace profe {

struct Linear {
  Var W;  // (in, out)
  Var b;  // (out)

  std::size_t in() const { return W->value.shape[0]; }
  std::size_t out() const { return W->value.shape[1]; }
  Var forward(const Var& x) const { return add_row(matmul(x, W), b); }
};

// Classifier split into a representation extractor (f1, ends at width d
// with its activation applied) and a linear head (f2, d -> n logits).
class SplitModel {
 public:
  // widths = {input, hidden..., d}; every repr layer is Linear + ReLU,
  // the head is a plain Linear(d, n_classes).
  static SplitModel mlp(const std::vector<std::size_t>& widths,
                        std::size_t n_classes, std::uint64_t seed);

  // Graph-building forward; increments the forward counter.
  std::pair<Var, Var> forward_split(const Tensor& batch);

  // Value-only forward for evaluation and prototype extraction.
  std::pair<Tensor, Tensor> forward_eval(const Tensor& batch);
  Tensor forward_repr(const Tensor& batch);

  std::vector<Var>& parameters() { return params_; }
  const std::vector<Var>& parameters() const { return params_; }

  // Flat parameter snapshot in the wire serialization order
  // (layer-major, W before b, repr stage before head).
  std::vector<Tensor> param_snapshot() const;
  void load_params(const std::vector<Tensor>& params);

  // p <- p - lr * grad(p), then clears gradients. Throws StateError when
  // gradients have not been populated by a backward pass.
  void sgd_step(float lr);

  std::size_t input_width() const { return repr_layers_.front().in(); }
  std::size_t repr_width() const { return head_.in(); }
  std::size_t n_classes() const { return head_.out(); }

  std::size_t forward_count() const { return forward_count_; }
  void reset_forward_count() { forward_count_ = 0; }

 private:
  void check_input(const Tensor& batch) const;

  std::vector<Linear> repr_layers_;
  Linear head_;
  std::vector<Var> params_;
  std::size_t forward_count_ = 0;
};

}  // namespace profe
