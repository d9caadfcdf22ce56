#pragma once

#include "profe/autograd.hpp"
#include "profe/prototype.hpp"
#include "profe/tensor.hpp"

namespace profe {

struct DistillConfig {
  float temperature = 2.0f;  // T
  float alpha_s = 1.0f;      // KD-term weight, halved each round
  float beta_s = 1.0f;       // student prototype-MSE weight
  float beta_t = 1.0f;       // teacher prototype-MSE weight
  float beta_limit = 0.1f;   // alpha_s is zeroed once it drops below this

  void validate() const {
    if (!(temperature > 0.0f))
      throw ParameterError("distill: temperature must be > 0");
    if (alpha_s < 0.0f || beta_s < 0.0f || beta_t < 0.0f || beta_limit < 0.0f)
      throw ParameterError("distill: weights must be >= 0");
  }
};

// KL(softmax_T(y_t) || softmax_T(y_s)) * T^2, batch-averaged.
float kd_loss(const Tensor& y_s, const Tensor& y_t, float T);
Var kd_loss(const Var& y_s, const Tensor& y_t, float T);

// CE + beta_s * proto-MSE + alpha_s * (KD + repr-MSE). Teacher tensors
// are constants; they are not touched at all when alpha_s == 0, and zero
// weights skip their terms entirely so the alpha_s=beta_s=0 case is
// bitwise the plain cross-entropy path.
Var student_loss(const Var& y_s, const Tensor& y_t, const Var& repr_s,
                 const Tensor& repr_t, const LabelBatch& labels,
                 const GlobalPrototypeTable& global_protos,
                 const DistillConfig& cfg);

// CE + beta_t * proto-MSE.
Var teacher_loss(const Var& y_t, const Var& repr_t, const LabelBatch& labels,
                 const GlobalPrototypeTable& global_protos, float beta_t);

// Halves alpha_s, then zeroes it once it falls below beta_limit. Called
// once per completed federated round.
void decay_alpha(DistillConfig& cfg);

}  // namespace profe
