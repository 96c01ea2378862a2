#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "mocorank/core.hpp"
#include "mocorank/model.hpp"
#include "mocorank/params.hpp"

namespace mocorank {

inline constexpr double kDefaultMomentum = 0.999;

// A reference triplet produced by the momentum encoder.
struct ScorePoolEntry {
  Level label = Level::EG;
  double score = 0.0;
  Vector embedding;
  // Training iteration that produced the entry; -1 for the initial fill.
  std::int64_t iteration = -1;

  bool operator==(const ScorePoolEntry&) const = default;
};

// Fixed-capacity FIFO queue. Oldest entries sit at the front.
class ScorePool {
 public:
  explicit ScorePool(std::size_t capacity = 0);

  // Evicts as many of the oldest entries as needed to make room, then appends
  // the new entries in order.
  void push(std::vector<ScorePoolEntry> batch);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return entries_.size() == capacity_; }
  bool empty() const { return entries_.empty(); }
  const std::deque<ScorePoolEntry>& entries() const { return entries_; }
  const ScorePoolEntry& operator[](std::size_t i) const { return entries_[i]; }

  bool operator==(const ScorePool&) const = default;

 private:
  std::size_t capacity_;
  std::deque<ScorePoolEntry> entries_;
};

// Shadow copy of the model updated as an exponential moving average.
struct MomentumEncoder {
  ModelParams params;
  double momentum = kDefaultMomentum;

  static MomentumEncoder from(const ModelParams& model,
                              double momentum = kDefaultMomentum) {
    return {model, momentum};
  }
};

// w_m <- m * w_m + (1 - m) * w for every scalar.
void momentum_update(MomentumEncoder& enc, const ModelParams& model);

// Fills a pool with ceil(capacity/4) samples per class scored by the
// momentum encoder in eval mode, truncated to capacity and shuffled.
ScorePool pool_init(const std::vector<PreparedSample>& samples,
                    const MomentumEncoder& enc, std::size_t capacity,
                    std::uint64_t seed, bool use_audio = false);

// Scores samples with the encoder (eval mode) into pool entries.
std::vector<ScorePoolEntry> score_entries(const std::vector<const PreparedSample*>& batch,
                                          const ModelParams& params, bool use_audio,
                                          std::int64_t iteration);

// Cosine similarity; 0 (with a warning) when either vector is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Label-gap margin modulated by embedding similarity:
// M_diff = 0.5 * (diff - 1) + 0.5 * (cos + 1) / 2 for diff in {1, 2, 3}.
double margin(int diff, std::span<const double> e1, std::span<const double> e2);

// Pre-hinge comparison of a live score against one pool entry.
double pairwise_term(Level l1, double s1, std::span<const double> e1,
                     const ScorePoolEntry& entry);

// Loss value plus gradients with respect to the network outputs.
struct BatchLoss {
  double loss = 0.0;
  Vector d_scores;                    // per sample
  std::vector<Vector> d_embeddings;   // per sample; empty vectors mean zero
  std::vector<Vector> d_logits;       // per sample; empty vectors mean zero
};

struct MarginLossOptions {
  // Treat the margins as constants (no gradient through the cosine).
  bool detach_margin = false;
};

// Mean over all batch x pool pairs of max(f, 0). Pool entries are constants.
BatchLoss multi_margin_loss(std::span<const double> scores, std::span<const Level> labels,
                            const std::vector<Vector>& embeddings, const ScorePool& pool,
                            const MarginLossOptions& opt = {});

}  // namespace mocorank
