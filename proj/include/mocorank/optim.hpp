#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mocorank/core.hpp"
#include "mocorank/params.hpp"

namespace mocorank {

// lr_end + (lr_start - lr_end) * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end);

struct AdamWOptions {
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  Vector m;
  Vector v;
  std::int64_t step = 0;

  bool operator==(const AdamWState&) const = default;
};

// Decoupled weight decay followed by the bias-corrected Adam update.
// Coordinates with trainable[i] == false are left untouched. names, when
// given, is used to report the parameter of a non-finite gradient.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWOptions& opt, const std::vector<bool>* trainable = nullptr,
                const ModelParams* names = nullptr);

void adamw_step(ModelParams& params, std::span<const double> grads, AdamWState& state,
                double lr, const AdamWOptions& opt, const std::vector<bool>* trainable = nullptr);

}  // namespace mocorank
