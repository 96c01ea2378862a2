#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "mocorank/params.hpp"

namespace mocorank {

enum class LossKind { mocorank, mocorank_center, mse, ce, cb_focal, ce_center };
const char* loss_name(LossKind k);
LossKind parse_loss(std::string_view s);
bool uses_pool(LossKind k);
bool uses_center(LossKind k);
bool uses_logits(LossKind k);

enum class SamplerKind { sequential, class_balanced };
const char* sampler_name(SamplerKind s);
SamplerKind parse_sampler(std::string_view s);

inline constexpr int kConfigVersion = 1;

struct TrainConfig {
  LossKind loss = LossKind::mocorank;
  int batch_size = 32;
  int pool_size = 256;
  int epochs = 60;
  int stage2_epochs = 60;
  double lr_start = 5e-4;
  double lr_end = 5e-7;
  double weight_decay = 1e-3;
  double momentum = 0.999;
  SamplerKind sampler = SamplerKind::sequential;
  bool use_audio = false;
  Fusion ablation = Fusion::concat_attention;
  std::uint64_t seed = 0;

  // network shape
  int width = 32;
  int mlp_hidden = 32;
  int chunks = 10;
  int kernel = 3;
  double tcn_dropout = 0.1;
  double mlp1_dropout = 0.1;
  int min_frames = 250;
  bool strict_250 = false;

  // loss constants
  double center_weight = 0.2;
  double center_alpha = 0.5;
  double focal_beta = 0.9999;
  double focal_gamma = 2.0;
  bool detach_margin = false;
  // Score the batch with the momentum encoder before the optimizer step.
  bool score_before_step = false;

  std::string train_path;
  std::string val_path;
  std::string test_path;
  std::string init_from;

  // Throws Error on a violated invariant.
  void validate() const;

  // Sets one field from its key (dashes or underscores) and text value.
  void set(std::string_view key, std::string_view value);
  std::map<std::string, std::string> to_map() const;

  HeadKind head() const { return uses_logits(loss) ? HeadKind::categorical : HeadKind::normalized; }
  ModelConfig model_config(int high_level_dim, int global_dim, bool audio,
                           int speech_dim) const;
  bool operator==(const TrainConfig&) const = default;
};

// |B|=32, |P|=256, 60 epochs, C=32
TrainConfig desk_preset();
// |B|=256, |P|=2048, 1200 epochs, C=64
TrainConfig paper_preset();
TrainConfig preset(std::string_view name);

// Versioned key = value text. The first entry must be config_version = 1.
std::string config_to_text(const TrainConfig& cfg);
TrainConfig config_from_text(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

std::string model_config_to_text(const ModelConfig& cfg);
ModelConfig model_config_from_text(const std::string& text);

}  // namespace mocorank
