#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "mocorank/core.hpp"

namespace mocorank {

// rows = truth, cols = prediction
using Confusion = std::array<std::array<std::size_t, kNumLevels>, kNumLevels>;

struct MetricsReport {
  Confusion confusion{};
  double acc = 0.0;
  double avg_acc = 0.0;
  std::array<double, kNumLevels> recall{};
  // Classes with at least one true sample; only these enter avg_acc.
  std::array<bool, kNumLevels> present{};

  std::size_t total() const;
  bool operator==(const MetricsReport&) const = default;
};

Confusion confusion_matrix(std::span<const Level> preds, std::span<const Level> labels);
Confusion confusion_matrix(std::span<const int> preds, std::span<const int> labels);

// Overall accuracy, per-class recall and their mean over populated classes.
MetricsReport accuracy_metrics(const Confusion& confusion);

std::string metrics_json(const MetricsReport& report, int indent = 2);
MetricsReport metrics_from_json(const std::string& text);
// class,recall,support rows for plotting
std::string recall_csv(const MetricsReport& report);

// subjects x raters
struct RatingMatrix {
  std::size_t subjects = 0;
  std::size_t raters = 0;
  std::vector<double> ratings;  // row-major

  double operator()(std::size_t i, std::size_t j) const { return ratings[i * raters + j]; }
  static RatingMatrix from_rows(const std::vector<std::vector<double>>& rows);
};

// Two-way random effects, single rater, absolute agreement.
double icc_2_1(const RatingMatrix& m);

// Whitespace/comma separated numbers, one subject per line; '#' comments.
RatingMatrix load_ratings(const std::string& path);
RatingMatrix parse_ratings(const std::string& text);

}  // namespace mocorank
