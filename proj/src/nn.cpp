#include "profe/nn.hpp"

#include <cmath>
#include <random>

namespace profe {

namespace {

Linear init_linear(std::size_t in, std::size_t out, std::mt19937& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  Tensor w({in, out});
  for (float& f : w.v) f = dist(rng);
  Tensor b({out});
  for (float& f : b.v) f = dist(rng);
  return Linear{make_parameter(std::move(w)), make_parameter(std::move(b))};
}

}  // namespace

SplitModel SplitModel::mlp(const std::vector<std::size_t>& widths,
                           std::size_t n_classes, std::uint64_t seed) {
  if (widths.size() < 2)
    throw ParameterError("mlp needs at least input and representation widths");
  SplitModel m;
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    m.repr_layers_.push_back(init_linear(widths[i], widths[i + 1], rng));
  m.head_ = init_linear(widths.back(), n_classes, rng);
  for (const Linear& l : m.repr_layers_) {
    m.params_.push_back(l.W);
    m.params_.push_back(l.b);
  }
  m.params_.push_back(m.head_.W);
  m.params_.push_back(m.head_.b);
  return m;
}

void SplitModel::check_input(const Tensor& batch) const {
  if (batch.cols() != input_width())
    throw DimensionError("model input width mismatch: expected " +
                         std::to_string(input_width()) + " got " +
                         std::to_string(batch.cols()));
}

std::pair<Var, Var> SplitModel::forward_split(const Tensor& batch) {
  check_input(batch);
  ++forward_count_;
  Var x = make_constant(batch);
  for (const Linear& l : repr_layers_) x = relu(l.forward(x));
  Var repr = x;
  Var logits = head_.forward(repr);
  return {repr, logits};
}

std::pair<Tensor, Tensor> SplitModel::forward_eval(const Tensor& batch) {
  check_input(batch);
  ++forward_count_;
  Tensor x = batch;
  for (const Linear& l : repr_layers_) {
    x = ops::matmul(x, l.W->value);
    const std::size_t B = x.rows(), C = x.cols();
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        float f = x.v[i * C + j] + l.b->value.v[j];
        x.v[i * C + j] = f > 0.0f ? f : 0.0f;
      }
  }
  Tensor logits = ops::matmul(x, head_.W->value);
  const std::size_t B = logits.rows(), C = logits.cols();
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < C; ++j)
      logits.v[i * C + j] += head_.b->value.v[j];
  return {std::move(x), std::move(logits)};
}

Tensor SplitModel::forward_repr(const Tensor& batch) {
  return forward_eval(batch).first;
}

std::vector<Tensor> SplitModel::param_snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const Var& p : params_) out.push_back(p->value);
  return out;
}

void SplitModel::load_params(const std::vector<Tensor>& params) {
  if (params.size() != params_.size())
    throw ProtocolError("parameter count mismatch: expected " +
                        std::to_string(params_.size()) + " got " +
                        std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape != params_[i]->value.shape)
      throw ProtocolError("parameter " + std::to_string(i) +
                          " shape mismatch: expected " +
                          params_[i]->value.shape_str() + " got " +
                          params[i].shape_str());
    params_[i]->value = params[i];
  }
}

void SplitModel::sgd_step(float lr) {
  for (Var& p : params_)
    if (!p->grad_ready)
      throw StateError("sgd_step without populated gradients");
  for (Var& p : params_) {
    for (std::size_t i = 0; i < p->value.numel(); ++i)
      p->value.v[i] -= lr * p->grad.v[i];
    p->grad = Tensor();
    p->grad_ready = false;
  }
}

}  // namespace profe
