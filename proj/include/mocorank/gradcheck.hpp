#pragma once

#include <string>
#include <vector>

#include "mocorank/config.hpp"
#include "mocorank/params.hpp"

namespace mocorank {

struct GradCheckOptions {
  LossKind loss = LossKind::mocorank;
  // Route speech-bearing samples through the audio branch.
  bool audio = false;
  int batch = 4;
  int pool = 12;
  std::uint64_t seed = 7;
  double step = 1e-5;
  // Denominator floor of the relative error.
  double floor = 1e-6;
  std::size_t max_params = 1000;
};

struct BlockCheck {
  std::string name;
  std::size_t checked = 0;
  // Coordinates whose +-h probe crossed a ReLU or hinge kink.
  std::size_t skipped = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  LossKind loss = LossKind::mocorank;
  bool audio = false;
  std::size_t params = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool passed = false;
  std::vector<BlockCheck> blocks;
};

// Small network used by the gradient check (a few hundred parameters).
ModelConfig grad_check_model(LossKind loss, bool audio);

// Central finite differences against the analytic backward pass for every
// parameter, with dropout masks held fixed.
GradCheckReport grad_check(const GradCheckOptions& opt, double tolerance = 1e-4);

// Every loss on the visual path plus mocorank and mse through the audio branch.
std::vector<GradCheckReport> grad_check_suite(std::uint64_t seed = 7, double tolerance = 1e-4);

std::string grad_check_json(const std::vector<GradCheckReport>& reports);

}  // namespace mocorank
