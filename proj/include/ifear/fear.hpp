#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ifear/memory.hpp"
#include "ifear/numerics.hpp"
#include "ifear/rng.hpp"

namespace ifear {

/// Supervised catastrophe classifier F: S -> (0, 1). Same architecture as
/// the Q-network but for the logistic output layer.
struct FearModel {
  MlpParams params;
  AdamState opt;
};

inline FearModel make_fear_model(int state_dim, int hidden, double lr,
                                 Rng& rng) {
  FearModel m;
  m.params = make_mlp(state_dim, hidden, 1, Head::Logistic, rng);
  m.opt = make_adam(m.params, lr);
  return m;
}

inline double fear_score(const FearModel& model, std::span<const double> s) {
  return forward(model.params, s)[0];
}

/// One Adam step on the mean cross-entropy over the batch. The loss is fused
/// with the logistic head, so the pre-head cotangent is simply p - label and
/// saturation never zeroes the gradient artificially. Returns the mean loss.
inline double fear_train_step(FearModel& model,
                              const std::vector<FearExample>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty fear batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Gradients acc = zero_gradients(model.params);
  double loss = 0.0;
  for (const FearExample& ex : batch) {
    const double z = logits(model.params, ex.s)[0];
    const double p_raw = sigmoid(z);
    loss += bce(clamp_prob(p_raw), ex.label).loss;
    const double dz = (p_raw - static_cast<double>(ex.label)) * inv_n;
    accumulate(acc, backward_logits(model.params, ex.s,
                                    std::span<const double>(&dz, 1)));
  }
  adam_step(model.opt, model.params, acc);
  return loss * inv_n;
}

}  // namespace ifear
