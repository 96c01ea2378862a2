#pragma once

#include <array>
#include <span>
#include <vector>

#include "mocorank/core.hpp"
#include "mocorank/moco.hpp"

namespace mocorank {

// Regression targets for the MSE baseline: the midpoint of each score band.
double mse_target(Level l);

// Mean squared error of scores against band midpoints.
BatchLoss mse_loss(std::span<const double> scores, std::span<const Level> labels);

// Mean softmax cross-entropy over 4-logit rows.
BatchLoss ce_loss(const std::vector<Vector>& logits, std::span<const Level> labels);

struct FocalOptions {
  double beta = 0.9999;
  double gamma = 2.0;
};

// Class-balanced focal loss: mean over the batch of
// (1 - beta) / (1 - beta^{n_y}) * (1 - p_y)^gamma * (-log p_y).
BatchLoss cb_focal_loss(const std::vector<Vector>& logits, std::span<const Level> labels,
                        const std::array<std::size_t, kNumLevels>& class_counts,
                        const FocalOptions& opt = {});

struct ClassCenters {
  std::array<Vector, kNumLevels> centers;
  double alpha = 0.5;

  static ClassCenters zeros(std::size_t dim, double alpha = 0.5);
  std::size_t dim() const { return centers[0].size(); }
  bool operator==(const ClassCenters&) const = default;
};

struct CenterLossResult {
  double loss = 0.0;
  std::vector<Vector> d_embeddings;
  ClassCenters updated;
};

inline constexpr double kCenterLossWeight = 0.2;

// weight * mean_i 0.5 * |e_i - c_{y_i}|^2, plus the per-class center step
// c_j += alpha * sum_{y_i = j} (e_i - c_j) / (1 + n_j).
CenterLossResult center_loss(const std::vector<Vector>& embeddings,
                             std::span<const Level> labels, const ClassCenters& centers,
                             double weight = kCenterLossWeight);

}  // namespace mocorank
