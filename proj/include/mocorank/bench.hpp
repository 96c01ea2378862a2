#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mocorank/config.hpp"
#include "mocorank/features.hpp"
#include "mocorank/metrics.hpp"

namespace mocorank {

// A named set of config overrides applied on top of the base config.
struct BenchVariant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Built-in variants: mocorank, mocorank+center, mocorank_detach, mse,
// class_sampler_mse, ce, class_sampler_ce, cb_focal, ce+center, and the
// fusion ablations openface_only, attention_only, concat_only,
// concat_attention (all trained with mocorank).
BenchVariant bench_variant(const std::string& name);
// "name" or "name:key=value,key=value"
BenchVariant parse_bench_variant(const std::string& spec);

inline constexpr double kBenchNoise = 2.5;

struct BenchOptions {
  TrainConfig base = desk_preset();
  SynthOptions synth = [] {
    SynthOptions s;
    s.n = 3000;
    s.noise = kBenchNoise;
    return s;
  }();
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<BenchVariant> variants;
  // Variant the others are compared against.
  std::string reference;
};

struct BenchRun {
  std::string variant;
  std::uint64_t seed = 0;
  MetricsReport test;
  double seconds = 0.0;
};

struct VariantSummary {
  std::string variant;
  double mean_acc = 0.0;
  double mean_avg_acc = 0.0;
  double sd_avg_acc = 0.0;
  std::size_t runs = 0;
};

// Paired per-seed comparison on avg accuracy.
struct Comparison {
  std::string treatment;
  std::string reference;
  double mean_delta_avg_acc = 0.0;
  double mean_delta_acc = 0.0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  // One-sided sign test, ties dropped.
  double p_value = 1.0;
};

struct BenchSummary {
  std::vector<BenchRun> runs;
  std::vector<VariantSummary> variants;
  std::vector<Comparison> comparisons;
};

// P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p(std::size_t wins, std::size_t n);

// Seed s generates the dataset, the 70/10/20 split and the training seed;
// every variant sees the same data for a given seed.
std::vector<BenchRun> run_bench(const BenchOptions& opt,
                                const std::function<void(const BenchRun&)>& on_run = {});
BenchSummary summarize_bench(std::vector<BenchRun> runs, const std::string& reference);
Comparison compare(const std::vector<BenchRun>& runs, const std::string& treatment,
                   const std::string& reference);

std::string bench_csv(const std::vector<BenchRun>& runs);
std::string bench_json(const BenchSummary& summary, const BenchOptions& opt);

}  // namespace mocorank
