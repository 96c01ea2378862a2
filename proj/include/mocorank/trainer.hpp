#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mocorank/config.hpp"
#include "mocorank/features.hpp"
#include "mocorank/losses.hpp"
#include "mocorank/metrics.hpp"
#include "mocorank/model.hpp"
#include "mocorank/moco.hpp"
#include "mocorank/optim.hpp"

namespace mocorank {

struct EpochLog {
  int stage = 1;
  int epoch = 0;  // 1-based within the stage
  std::int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<MetricsReport> val;

  bool operator==(const EpochLog&) const = default;
};

// Everything that evolves during training. Restoring a saved state and
// continuing reproduces the uninterrupted run bit for bit.
struct TrainState {
  int stage = 1;
  ModelParams params;
  std::optional<MomentumEncoder> encoder;
  std::optional<ScorePool> pool;
  std::optional<ClassCenters> centers;
  AdamWState optimizer;
  std::int64_t step = 0;  // iterations completed in this stage
  int epoch = 0;          // epochs completed in this stage
  std::int64_t batch_in_epoch = 0;
  std::vector<std::size_t> epoch_order;
  Rng rng;
  std::string sampler_state;
  double epoch_loss_sum = 0.0;
  std::vector<EpochLog> log;
};

struct StageSpec {
  int stage = 1;
  // Build the model with an audio branch (needed for two-stage runs).
  bool audio_model = false;
  // Route speech-bearing samples through the audio branch.
  bool use_audio = false;
  int epochs = 1;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const Dataset& train, const Dataset* val,
          const StageSpec& stage);

  // Fresh stage start. init, when given, supplies the starting weights.
  void begin(const std::optional<ModelParams>& init = std::nullopt);
  void restore(TrainState state);
  TrainState snapshot() const;

  // One iteration: forward, loss, backward, AdamW, momentum update, pool push.
  // Returns the batch loss.
  double step();
  bool epoch_complete() const;
  EpochLog end_epoch();
  bool finished() const { return state_.epoch >= stage_.epochs; }

  // Runs to completion. The callback sees each epoch log and may return
  // false to stop early.
  void run(const std::function<bool(const EpochLog&)>& on_epoch = {});

  const TrainState& state() const { return state_; }
  const ModelConfig& model_config() const { return model_config_; }
  std::int64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::int64_t total_steps() const { return steps_per_epoch_ * stage_.epochs; }
  // Coordinates updated in this stage.
  const std::vector<bool>& trainable() const { return trainable_; }
  // Gradient of the most recent step (after freezing).
  const Vector& last_gradient() const { return grad_; }

 private:
  std::vector<std::size_t> next_batch();

  TrainConfig cfg_;
  StageSpec stage_;
  ModelConfig model_config_;
  std::vector<PreparedSample> train_;
  std::vector<PreparedSample> val_;
  std::array<std::size_t, kNumLevels> class_counts_{};
  std::optional<ClassBalancedSampler> sampler_;
  std::int64_t steps_per_epoch_ = 0;
  std::vector<bool> trainable_;
  TrainState state_;
  std::vector<ForwardTrace> traces_;
  Vector grad_;
};

struct Checkpoint {
  TrainConfig config;
  ModelConfig model;
  TrainState state;
};

enum class EvalSubset { all, speech_only };

MetricsReport evaluate(const ModelParams& params, const std::vector<PreparedSample>& samples,
                       bool use_audio);
MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& ds, EvalSubset subset);

struct TrainOutcome {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// Single-stage training on the given splits.
TrainOutcome train(const TrainConfig& cfg, const Dataset& train, const Dataset* val,
                   const std::function<bool(const EpochLog&)>& on_epoch = {});
// Loads train/val splits from cfg paths.
TrainOutcome train(const TrainConfig& cfg);

// Visual stage on all data, then the audio stage on speech-bearing records
// with every visual parameter frozen.
struct TwoStageOutcome {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  std::uint64_t visual_hash_before_stage2 = 0;
  std::uint64_t visual_hash_after_stage2 = 0;
};
TwoStageOutcome train_two_stage(const TrainConfig& cfg, const Dataset& train,
                                const Dataset* val);
TwoStageOutcome train_two_stage(const TrainConfig& cfg);

std::uint64_t visual_hash(const ModelParams& params);

std::string epoch_log_csv(const std::vector<EpochLog>& log);

PrepareOptions prepare_options(const TrainConfig& cfg);

}  // namespace mocorank
