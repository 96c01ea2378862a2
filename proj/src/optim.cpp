#include "mocorank/optim.hpp"

#include <cmath>
#include <numbers>

namespace mocorank {

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end) {
  if (total_steps <= 0) return lr_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * frac));
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWOptions& opt, const std::vector<bool>* trainable,
                const ModelParams* names) {
  if (params.size() != grads.size()) throw Error("adamw_step: gradient length mismatch");
  if (trainable && trainable->size() != params.size()) {
    throw Error("adamw_step: trainable mask length mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      std::string where = "coordinate " + std::to_string(i);
      if (names) {
        for (const auto& b : names->blocks()) {
          if (i >= b.offset && i < b.offset + b.size()) {
            where = b.name + "[" + std::to_string(i - b.offset) + "]";
          }
        }
      }
      throw Error("adamw_step: non-finite gradient at " + where);
    }
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw Error("adamw_step: optimizer state shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * opt.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (trainable && !(*trainable)[i]) continue;
    const double g = grads[i];
    params[i] *= decay;
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.eps);
  }
}

void adamw_step(ModelParams& params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWOptions& opt, const std::vector<bool>* trainable) {
  adamw_step(params.flat(), grads, state, lr, opt, trainable, &params);
}

}  // namespace mocorank
