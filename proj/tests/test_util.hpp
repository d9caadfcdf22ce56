#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "profe/nn.hpp"

namespace profe::testutil {

// Central finite differences over every model parameter against the
// analytic gradients from one backward pass. loss_fn must rebuild the
// graph from the model's current parameter values.
inline void check_model_grads(SplitModel& model,
                              const std::function<Var()>& loss_fn,
                              float step = 1e-3f, float rel_tol = 1e-3f,
                              float abs_floor = 2e-3f) {
  Var loss = loss_fn();
  backward(loss);
  std::vector<Tensor> grads;
  for (const Var& p : model.parameters()) grads.push_back(p->grad);

  auto eval = [&] { return val(loss_fn()).v[0]; };
  for (std::size_t pi = 0; pi < model.parameters().size(); ++pi) {
    Var& p = model.parameters()[pi];
    for (std::size_t k = 0; k < p->value.numel(); ++k) {
      const float orig = p->value.v[k];
      // parameters unreachable from the loss carry no gradient tensor
      const double g = k < grads[pi].v.size() ? grads[pi].v[k] : 0.0;
      // A perturbation can push a ReLU pre-activation across zero, which
      // corrupts the central difference; shrinking the step moves the
      // stencil off the kink, while a genuinely wrong gradient stays
      // wrong at every step size.
      bool ok = false;
      double fd = 0.0;
      for (float h : {step, step / 4.0f, step / 16.0f}) {
        p->value.v[k] = orig + h;
        const double lp = eval();
        p->value.v[k] = orig - h;
        const double lm = eval();
        p->value.v[k] = orig;
        fd = (lp - lm) / (2.0 * h);
        const double tol =
            std::max(static_cast<double>(abs_floor),
                     rel_tol * std::max(std::fabs(fd), std::fabs(g)));
        if (std::fabs(fd - g) <= tol) {
          ok = true;
          break;
        }
      }
      if (!ok)
        throw std::runtime_error(
            "gradient mismatch: param " + std::to_string(pi) + "[" +
            std::to_string(k) + "] analytic " + std::to_string(g) +
            " fd " + std::to_string(fd));
    }
  }
  // leave the model with clean gradient state
  for (Var& p : model.parameters()) {
    p->grad = Tensor();
    p->grad_ready = false;
  }
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                            float lo = -2.0f, float hi = 2.0f) {
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(std::move(shape));
  for (float& f : t.v) f = dist(rng);
  return t;
}

}  // namespace profe::testutil
