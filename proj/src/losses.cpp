#include "mocorank/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mocorank {
namespace {

void check_batch(std::size_t n, std::span<const Level> labels) {
  if (labels.size() != n) throw Error("loss: scores and labels differ in length");
  if (n == 0) throw Error("loss: empty batch");
}

// log-softmax of one row
Vector log_softmax(const Vector& z) {
  if (z.size() != kNumLevels) throw Error("expected 4 logits per sample");
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  Vector out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] - lse;
  return out;
}

}  // namespace

double mse_target(Level l) {
  switch (l) {
    case Level::HD: return -0.75;
    case Level::DE: return -0.25;
    case Level::EG: return 0.25;
    case Level::HE: return 0.75;
  }
  return 0.0;
}

BatchLoss mse_loss(std::span<const double> scores, std::span<const Level> labels) {
  check_batch(scores.size(), labels);
  const double n = static_cast<double>(scores.size());
  BatchLoss out;
  out.d_scores.resize(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double r = scores[i] - mse_target(labels[i]);
    total += r * r;
    out.d_scores[i] = 2.0 * r / n;
  }
  out.loss = total / n;
  return out;
}

BatchLoss ce_loss(const std::vector<Vector>& logits, std::span<const Level> labels) {
  check_batch(logits.size(), labels);
  const double n = static_cast<double>(logits.size());
  BatchLoss out;
  out.d_scores.assign(logits.size(), 0.0);
  out.d_logits.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Vector lp = log_softmax(logits[i]);
    const int y = code(labels[i]);
    total -= lp[y];
    Vector g(kNumLevels);
    for (int k = 0; k < kNumLevels; ++k) g[k] = (std::exp(lp[k]) - (k == y ? 1.0 : 0.0)) / n;
    out.d_logits[i] = std::move(g);
  }
  out.loss = total / n;
  return out;
}

BatchLoss cb_focal_loss(const std::vector<Vector>& logits, std::span<const Level> labels,
                        const std::array<std::size_t, kNumLevels>& class_counts,
                        const FocalOptions& opt) {
  check_batch(logits.size(), labels);
  if (!(opt.beta >= 0.0 && opt.beta < 1.0)) throw Error("cb_focal_loss: beta must lie in [0, 1)");
  if (opt.gamma < 0.0) throw Error("cb_focal_loss: gamma must be non-negative");
  std::array<double, kNumLevels> weight{};
  for (int c = 0; c < kNumLevels; ++c) {
    if (class_counts[c] == 0) throw Error("cb_focal_loss: class counts must be positive");
    weight[c] = (1.0 - opt.beta) /
                (1.0 - std::pow(opt.beta, static_cast<double>(class_counts[c])));
  }
  const double n = static_cast<double>(logits.size());
  BatchLoss out;
  out.d_scores.assign(logits.size(), 0.0);
  out.d_logits.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Vector lp = log_softmax(logits[i]);
    const int y = code(labels[i]);
    const double log_py = lp[y];
    const double py = std::exp(log_py);
    const double q = 1.0 - py;
    const double focal = std::pow(q, opt.gamma);
    total += weight[y] * focal * (-log_py);
    // dL/dlog_py via the chain through p_y; dp_y/dz_k = p_y (1[k=y] - p_k).
    //   d/dp_y [-(1-p)^g log p] = g (1-p)^{g-1} log p - (1-p)^g / p
    double dl_dpy_times_py = -focal;
    if (opt.gamma != 0.0 && q > 0.0) {
      dl_dpy_times_py += opt.gamma * std::pow(q, opt.gamma - 1.0) * log_py * py;
    }
    Vector g(kNumLevels);
    for (int k = 0; k < kNumLevels; ++k) {
      const double pk = std::exp(lp[k]);
      g[k] = weight[y] * dl_dpy_times_py * ((k == y ? 1.0 : 0.0) - pk) / n;
    }
    out.d_logits[i] = std::move(g);
  }
  out.loss = total / n;
  return out;
}

ClassCenters ClassCenters::zeros(std::size_t dim, double alpha) {
  ClassCenters c;
  for (auto& v : c.centers) v.assign(dim, 0.0);
  c.alpha = alpha;
  return c;
}

CenterLossResult center_loss(const std::vector<Vector>& embeddings,
                             std::span<const Level> labels, const ClassCenters& centers,
                             double weight) {
  check_batch(embeddings.size(), labels);
  const std::size_t dim = centers.dim();
  const double n = static_cast<double>(embeddings.size());
  CenterLossResult out;
  out.updated = centers;
  out.d_embeddings.resize(embeddings.size());
  std::array<Vector, kNumLevels> shift;
  std::array<std::size_t, kNumLevels> counts{};
  for (auto& s : shift) s.assign(dim, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto& e = embeddings[i];
    if (e.size() != dim) throw Error("center_loss: embedding length differs from centers");
    const int y = code(labels[i]);
    const auto& c = centers.centers[y];
    Vector g(dim);
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double r = e[k] - c[k];
      sq += r * r;
      g[k] = weight * r / n;
      shift[y][k] += r;
    }
    ++counts[y];
    total += 0.5 * sq;
    out.d_embeddings[i] = std::move(g);
  }
  out.loss = weight * total / n;
  for (int y = 0; y < kNumLevels; ++y) {
    if (counts[y] == 0) continue;
    const double step = centers.alpha / (1.0 + static_cast<double>(counts[y]));
    for (std::size_t k = 0; k < dim; ++k) out.updated.centers[y][k] += step * shift[y][k];
  }
  return out;
}

}  // namespace mocorank
