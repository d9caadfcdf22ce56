#include "profe/distill.hpp"

namespace profe {

float kd_loss(const Tensor& y_s, const Tensor& y_t, float T) {
  require_same_shape(y_s, y_t, "kd_loss");
  return ops::kl_div(ops::softmax_T(y_t, T), ops::log_softmax_T(y_s, T)) * T *
         T;
}

Var kd_loss(const Var& y_s, const Tensor& y_t, float T) {
  require_same_shape(y_s->value, y_t, "kd_loss");
  Var kl = kl_div_const_target(ops::softmax_T(y_t, T), log_softmax_T(y_s, T));
  return scale(kl, T * T);
}

Var student_loss(const Var& y_s, const Tensor& y_t, const Var& repr_s,
                 const Tensor& repr_t, const LabelBatch& labels,
                 const GlobalPrototypeTable& global_protos,
                 const DistillConfig& cfg) {
  cfg.validate();
  Var loss = cross_entropy(y_s, labels);
  if (cfg.beta_s > 0.0f)
    loss = add(loss, scale(proto_mse_term(repr_s, labels, global_protos),
                           cfg.beta_s));
  if (cfg.alpha_s > 0.0f) {
    Var kd = kd_loss(y_s, y_t, cfg.temperature);
    Var repr_match = mse_const(repr_s, repr_t);
    loss = add(loss, scale(add(kd, repr_match), cfg.alpha_s));
  }
  return loss;
}

Var teacher_loss(const Var& y_t, const Var& repr_t, const LabelBatch& labels,
                 const GlobalPrototypeTable& global_protos, float beta_t) {
  if (beta_t < 0.0f) throw ParameterError("teacher_loss: beta_t must be >= 0");
  Var loss = cross_entropy(y_t, labels);
  if (beta_t > 0.0f)
    loss = add(loss,
               scale(proto_mse_term(repr_t, labels, global_protos), beta_t));
  return loss;
}

void decay_alpha(DistillConfig& cfg) {
  cfg.alpha_s *= 0.5f;
  if (cfg.alpha_s < cfg.beta_limit) cfg.alpha_s = 0.0f;
}

}  // namespace profe
