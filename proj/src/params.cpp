#include "mocorank/params.hpp"

#include <bit>
#include <cmath>

namespace mocorank {

const char* fusion_name(Fusion f) {
  switch (f) {
    case Fusion::openface_only: return "openface_only";
    case Fusion::attention_only: return "attention_only";
    case Fusion::concat_only: return "concat_only";
    case Fusion::concat_attention: return "concat+attention";
  }
  return "?";
}

Fusion parse_fusion(std::string_view s) {
  if (s == "openface_only") return Fusion::openface_only;
  if (s == "attention_only") return Fusion::attention_only;
  if (s == "concat_only") return Fusion::concat_only;
  if (s == "concat+attention" || s == "concat_attention") {
    return Fusion::concat_attention;
  }
  throw Error("unknown ablation '" + std::string(s) + "'");
}

bool uses_attention(Fusion f) {
  return f == Fusion::attention_only || f == Fusion::concat_attention;
}

bool uses_concat(Fusion f) {
  return f == Fusion::concat_only || f == Fusion::concat_attention;
}

const char* head_name(HeadKind h) {
  return h == HeadKind::normalized ? "normalized" : "categorical";
}

HeadKind parse_head(std::string_view s) {
  if (s == "normalized") return HeadKind::normalized;
  if (s == "categorical") return HeadKind::categorical;
  throw Error("unknown head '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (high_level_dim < 1 || global_dim < 1 || chunks < 1 || width < 1 ||
      mlp_hidden < 1 || kernel < 1) {
    throw Error("model dimensions must be positive");
  }
  if (dilations.empty()) throw Error("encoder needs at least one block");
  for (int d : dilations) {
    if (d < 1) throw Error("dilations must be positive");
  }
  if (tcn_dropout < 0 || tcn_dropout >= 1 || mlp1_dropout < 0 ||
      mlp1_dropout >= 1) {
    throw Error("dropout rates must lie in [0, 1)");
  }
  if (audio && speech_dim < 1) throw Error("speech_dim must be positive");
}

std::size_t ModelParams::add_block(const std::string& name, std::size_t rows,
                                   std::size_t cols, bool visual) {
  ParamBlock b{name, data_.size(), rows, cols, visual};
  data_.resize(data_.size() + b.size(), 0.0);
  blocks_.push_back(b);
  return b.offset;
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config_.validate();
  const auto c = static_cast<std::size_t>(config_.width);
  const auto k = static_cast<std::size_t>(config_.kernel);
  const auto h = static_cast<std::size_t>(config_.mlp_hidden);
  const auto g = static_cast<std::size_t>(config_.global_dim);

  std::size_t in = static_cast<std::size_t>(config_.input_channels());
  for (std::size_t i = 0; i < config_.dilations.size(); ++i) {
    const std::string p = "tcn." + std::to_string(i) + ".";
    ParamLayout::TcnBlock blk;
    blk.dilation = config_.dilations[i];
    blk.conv1 = {add_block(p + "conv1.weight", c, in * k, true),
                 add_block(p + "conv1.bias", 1, c, true), in, c};
    blk.conv2 = {add_block(p + "conv2.weight", c, c * k, true),
                 add_block(p + "conv2.bias", 1, c, true), c, c};
    if (in != c) {
      blk.down = {add_block(p + "downsample.weight", c, in, true),
                  add_block(p + "downsample.bias", 1, c, true), in, c};
    }
    layout_.tcn.push_back(blk);
    in = c;
  }
  if (uses_attention(config_.fusion)) {
    layout_.mlp1_fc1 = {add_block("mlp1.fc1.weight", h, g, true),
                        add_block("mlp1.fc1.bias", 1, h, true), g, h};
    layout_.mlp1_fc2 = {add_block("mlp1.fc2.weight", c, h, true),
                        add_block("mlp1.fc2.bias", 1, c, true), h, c};
  }
  if (uses_concat(config_.fusion)) {
    layout_.mlp2_fc1 = {add_block("mlp2.fc1.weight", h, g, true),
                        add_block("mlp2.fc1.bias", 1, h, true), g, h};
    layout_.mlp2_fc2 = {add_block("mlp2.fc2.weight", c, h, true),
                        add_block("mlp2.fc2.bias", 1, c, true), h, c};
  }
  const auto e = static_cast<std::size_t>(config_.embedding_dim());
  if (config_.head == HeadKind::normalized) {
    layout_.head_w = add_block("head.weight", 1, e, true);
  } else {
    layout_.class_head = {add_block("class_head.weight", kNumLevels, e, true),
                          add_block("class_head.bias", 1, kNumLevels, true), e,
                          kNumLevels};
  }
  if (config_.audio) {
    const auto s = static_cast<std::size_t>(config_.speech_dim);
    const auto ea = static_cast<std::size_t>(config_.audio_embedding_dim());
    layout_.audio_fc = {add_block("audio.fc.weight", s, s, false),
                        add_block("audio.fc.bias", 1, s, false), s, s};
    if (config_.head == HeadKind::normalized) {
      layout_.audio_head_w = add_block("audio.head.weight", 1, ea, false);
    } else {
      layout_.audio_class_head = {
          add_block("audio.class_head.weight", kNumLevels, ea, false),
          add_block("audio.class_head.bias", 1, kNumLevels, false), ea,
          kNumLevels};
    }
  }
}

ModelParams ModelParams::initialized(const ModelConfig& config,
                                     std::uint64_t seed) {
  ModelParams p(config);
  Rng rng(mix_seed(seed, 11));
  for (const auto& b : p.blocks_) {
    auto v = std::span<double>(p.data_).subspan(b.offset, b.size());
    const bool is_bias = b.name.ends_with(".bias");
    const bool is_norm_head = b.name == "head.weight" || b.name == "audio.head.weight";
    if (is_bias) continue;
    if (is_norm_head) {
      for (auto& x : v) x = rng.normal() / std::sqrt(static_cast<double>(b.cols));
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
    for (auto& x : v) x = rng.uniform(-bound, bound);
  }
  return p;
}

const ParamBlock& ModelParams::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw Error("no parameter block named '" + std::string(name) + "'");
}

bool ModelParams::has_block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

std::span<double> ModelParams::values(std::string_view name) {
  const auto& b = block(name);
  return std::span<double>(data_).subspan(b.offset, b.size());
}

std::span<const double> ModelParams::values(std::string_view name) const {
  const auto& b = block(name);
  return std::span<const double>(data_).subspan(b.offset, b.size());
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != data_.size()) {
    throw Error("flat parameter vector has length " +
                std::to_string(flat.size()) + ", expected " +
                std::to_string(data_.size()));
  }
  data_.assign(flat.begin(), flat.end());
}

bool ModelParams::same_shape(const ModelParams& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name != other.blocks_[i].name ||
        blocks_[i].rows != other.blocks_[i].rows ||
        blocks_[i].cols != other.blocks_[i].cols) {
      return false;
    }
  }
  return true;
}

std::vector<bool> ModelParams::visual_mask() const {
  std::vector<bool> mask(data_.size(), false);
  for (const auto& b : blocks_) {
    for (std::size_t i = 0; i < b.size(); ++i) mask[b.offset + i] = b.visual;
  }
  return mask;
}

std::uint64_t hash_values(std::span<const double> values) {
  // FNV-1a over the IEEE bit patterns
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace mocorank
