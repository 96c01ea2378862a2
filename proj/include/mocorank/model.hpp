#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mocorank/core.hpp"
#include "mocorank/features.hpp"
#include "mocorank/params.hpp"

namespace mocorank {

enum class Mode { train, eval };

// A record after padding and chunking, ready for the network.
struct PreparedSample {
  ChunkedFeatures chunked;
  Vector global;
  std::optional<Vector> speech;
  std::optional<Vector> meta;
  Level label = Level::EG;

  bool has_speech() const { return speech.has_value(); }
};

struct PrepareOptions {
  int chunks = 10;
  int min_frames = 250;
  bool strict_min_frames = false;
};

PreparedSample prepare_sample(const SampleRecord& r, const PrepareOptions& opt);
std::vector<PreparedSample> prepare_dataset(const Dataset& ds,
                                            const PrepareOptions& opt);

struct TcnBlockTrace {
  Matrix input;          // in x T
  Matrix pre1, act1;     // C x T
  Matrix pre2, act2;     // C x T
  Matrix mask1, mask2;   // dropout scales; empty when inactive
  Matrix residual;       // C x T
  Matrix pre_out, output;
};

// Every intermediate of one forward pass needed for the exact backward.
struct ForwardTrace {
  Mode mode = Mode::eval;
  Matrix input;  // 3D x T
  std::vector<TcnBlockTrace> tcn;
  Matrix tcn_out;  // X_TCN, C x T
  Vector global;

  Vector mlp1_pre, mlp1_mask, mlp1_hidden, query;  // query = MLP1(global)
  Vector attn_logits, attn;                        // X_attn over T
  Vector high_level;                               // X_HL
  Vector mlp2_pre, mlp2_hidden, mlp2_out;
  Vector visual;  // X

  bool audio_used = false;
  Vector speech, speech_proj, meta;

  Vector embedding;  // X, or X' on the audio path
  double embedding_norm = 0.0;
  double score = 0.0;  // normalized head only
  Vector logits;       // categorical head only
};

// Loss gradients with respect to the network outputs.
struct Upstream {
  double d_score = 0.0;
  Vector d_embedding;  // empty means zero
  Vector d_logits;     // empty means zero
};

// ---- individual operations ----------------------------------------------

// Causal dilated residual TCN over a 3D x T chunk matrix; returns C x T.
Matrix temporal_encoder(const Matrix& chunked, const ModelParams& params);

struct AttentionResult {
  Vector high_level;  // X_HL
  Vector attn;        // X_attn
};
// Eval-mode attention pooling of the encoder output guided by MLP1(global).
AttentionResult attention_fuse(const Matrix& tcn_out, std::span<const double> global,
                               const ModelParams& params);
// [MLP2(global); high_level]
Vector concat_fuse(std::span<const double> global, std::span<const double> high_level,
                   const ModelParams& params);
// Cosine of x with the weight vector; 0 when either has zero norm.
double score_head(std::span<const double> x, std::span<const double> weight);
// Thresholds at -0.5, 0, 0.5; each boundary belongs to the upper class.
Level classify(double score);

struct AudioResult {
  double score = 0.0;
  Vector embedding;  // X'
};
AudioResult audio_fuse(std::span<const double> visual, std::span<const double> speech,
                       std::span<const double> meta, const ModelParams& params);

// ---- whole network -------------------------------------------------------

// Runs the network. In train mode, dropout masks are drawn from dropout_rng
// (which must then be non-null). The audio path is taken only if use_audio is
// set, the params carry an audio branch and the sample has speech.
void forward(const PreparedSample& sample, const ModelParams& params, Mode mode,
             Rng* dropout_rng, bool use_audio, ForwardTrace& trace);
ForwardTrace forward(const PreparedSample& sample, const ModelParams& params,
                     Mode mode, Rng* dropout_rng = nullptr, bool use_audio = false);

// Accumulates d(loss)/d(params) into grad (same layout as params.flat()).
void backward(const ForwardTrace& trace, const Upstream& upstream,
              const ModelParams& params, std::span<double> grad);
Vector backward(const ForwardTrace& trace, const Upstream& upstream,
                const ModelParams& params);

// Class decision for a trace: thresholded score or argmax of logits.
Level predict(const ForwardTrace& trace);

// Sign pattern of every piecewise-linear unit, for finite-difference guards.
std::vector<bool> activation_pattern(const ForwardTrace& trace);

}  // namespace mocorank
