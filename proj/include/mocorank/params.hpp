#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mocorank/core.hpp"

namespace mocorank {

// How the high-level (chunked) path and the global video feature combine.
enum class Fusion {
  openface_only,     // X = mean-pooled TCN output
  attention_only,    // X = attention-pooled TCN output
  concat_only,       // X = [MLP2(global); mean-pooled TCN output]
  concat_attention,  // X = [MLP2(global); attention-pooled TCN output]
};
const char* fusion_name(Fusion f);
Fusion parse_fusion(std::string_view s);
bool uses_attention(Fusion f);
bool uses_concat(Fusion f);

enum class HeadKind {
  normalized,   // cosine score in [-1, 1]
  categorical,  // 4 logits
};
const char* head_name(HeadKind h);
HeadKind parse_head(std::string_view s);

struct ModelConfig {
  int high_level_dim = 17;  // D; the encoder sees 3D input channels
  int global_dim = 64;      // d
  int chunks = 10;          // T
  int width = 64;           // C
  int mlp_hidden = 64;
  int kernel = 3;
  std::vector<int> dilations{1, 2, 4};
  double tcn_dropout = 0.1;
  double mlp1_dropout = 0.1;
  Fusion fusion = Fusion::concat_attention;
  HeadKind head = HeadKind::normalized;
  bool audio = false;
  int speech_dim = 768;

  int input_channels() const { return 3 * high_level_dim; }
  int embedding_dim() const { return uses_concat(fusion) ? 2 * width : width; }
  int audio_embedding_dim() const { return embedding_dim() + speech_dim + 7; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  // Visual blocks are frozen during the second (audio) training stage.
  bool visual = true;

  std::size_t size() const { return rows * cols; }
};

// Offsets of every parameter tensor inside the flat buffer. Absent tensors
// hold kAbsent.
struct ParamLayout {
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  struct Conv {
    std::size_t w = kAbsent, b = kAbsent;
    std::size_t in = 0, out = 0;
  };
  struct TcnBlock {
    Conv conv1, conv2, down;
    int dilation = 1;
  };
  struct Affine {
    std::size_t w = kAbsent, b = kAbsent;
    std::size_t in = 0, out = 0;
  };
  std::vector<TcnBlock> tcn;
  Affine mlp1_fc1, mlp1_fc2, mlp2_fc1, mlp2_fc2;
  std::size_t head_w = kAbsent;
  Affine class_head;
  Affine audio_fc;
  std::size_t audio_head_w = kAbsent;
  Affine audio_class_head;
};

// All trainable weights in one flat buffer plus a named block table.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelConfig& config);

  // Fan-in scaled uniform weights, zero biases, Gaussian head weights.
  static ModelParams initialized(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::string_view name) const;
  bool has_block(std::string_view name) const;

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> values(std::string_view name);
  std::span<const double> values(std::string_view name) const;

  Vector flatten() const { return data_; }
  void unflatten(std::span<const double> flat);

  bool same_shape(const ModelParams& other) const;
  // Per-coordinate mask, true for coordinates of visual blocks.
  std::vector<bool> visual_mask() const;

  bool operator==(const ModelParams& o) const {
    return config_ == o.config_ && data_ == o.data_;
  }

 private:
  std::size_t add_block(const std::string& name, std::size_t rows,
                        std::size_t cols, bool visual);

  ModelConfig config_;
  ParamLayout layout_;
  std::vector<ParamBlock> blocks_;
  Vector data_;
};

// Content hash of a coordinate subset, used to assert frozen blocks.
std::uint64_t hash_values(std::span<const double> values);

}  // namespace mocorank
