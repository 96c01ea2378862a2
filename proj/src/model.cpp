#include "mocorank/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "mocorank/log.hpp"

namespace mocorank {
namespace {

using Affine = ParamLayout::Affine;
using Conv = ParamLayout::Conv;
constexpr std::size_t kAbsent = ParamLayout::kAbsent;

void resize(Matrix& m, std::size_t rows, std::size_t cols) {
  m.rows = rows;
  m.cols = cols;
  m.data.assign(rows * cols, 0.0);
}

void warn_zero_norm() {
  static std::atomic<int> count{0};
  if (count.fetch_add(1) < 5) {
    log::warn("zero-norm embedding at the normalized head; score defined as 0");
  }
}

void affine_forward(const Affine& a, const double* p, std::span<const double> x,
                    Vector& y) {
  const double* w = p + a.w;
  const double* b = p + a.b;
  y.resize(a.out);
  for (std::size_t o = 0; o < a.out; ++o) {
    const double* row = w + o * a.in;
    double s = b[o];
    for (std::size_t i = 0; i < a.in; ++i) s += row[i] * x[i];
    y[o] = s;
  }
}

// dx may be empty when the input gradient is not needed.
void affine_backward(const Affine& a, const double* p, std::span<const double> x,
                     std::span<const double> dy, double* g, std::span<double> dx) {
  const double* w = p + a.w;
  double* gw = g + a.w;
  double* gb = g + a.b;
  for (std::size_t o = 0; o < a.out; ++o) {
    const double d = dy[o];
    if (d == 0.0) continue;
    gb[o] += d;
    double* grow = gw + o * a.in;
    for (std::size_t i = 0; i < a.in; ++i) grow[i] += d * x[i];
    if (!dx.empty()) {
      const double* row = w + o * a.in;
      for (std::size_t i = 0; i < a.in; ++i) dx[i] += d * row[i];
    }
  }
}

// Causal dilated convolution:
//   out[c,t] = b[c] + sum_{i,k} W[c, i*K + k] * x[i, t - (K-1-k)*dilation]
void conv_forward(const Conv& cv, int dilation, int kernel, const double* p,
                  const Matrix& x, Matrix& out) {
  const std::size_t t_len = x.cols;
  const auto k_len = static_cast<std::size_t>(kernel);
  const auto dil = static_cast<std::size_t>(dilation);
  resize(out, cv.out, t_len);
  const double* w = p + cv.w;
  const double* b = p + cv.b;
  for (std::size_t c = 0; c < cv.out; ++c) {
    double* orow = out.data.data() + c * t_len;
    for (std::size_t t = 0; t < t_len; ++t) orow[t] = b[c];
    for (std::size_t i = 0; i < cv.in; ++i) {
      const double* xrow = x.data.data() + i * t_len;
      const double* wk = w + (c * cv.in + i) * k_len;
      for (std::size_t k = 0; k < k_len; ++k) {
        const std::size_t shift = (k_len - 1 - k) * dil;
        if (shift >= t_len) continue;
        const double wv = wk[k];
        for (std::size_t t = shift; t < t_len; ++t) orow[t] += wv * xrow[t - shift];
      }
    }
  }
}

void conv_backward(const Conv& cv, int dilation, int kernel, const double* p,
                   const Matrix& x, const Matrix& dout, double* g, Matrix* dx) {
  const std::size_t t_len = x.cols;
  const auto k_len = static_cast<std::size_t>(kernel);
  const auto dil = static_cast<std::size_t>(dilation);
  const double* w = p + cv.w;
  double* gw = g + cv.w;
  double* gb = g + cv.b;
  for (std::size_t c = 0; c < cv.out; ++c) {
    const double* drow = dout.data.data() + c * t_len;
    double bsum = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) bsum += drow[t];
    gb[c] += bsum;
    for (std::size_t i = 0; i < cv.in; ++i) {
      const double* xrow = x.data.data() + i * t_len;
      double* dxrow = dx ? dx->data.data() + i * t_len : nullptr;
      const double* wk = w + (c * cv.in + i) * k_len;
      double* gk = gw + (c * cv.in + i) * k_len;
      for (std::size_t k = 0; k < k_len; ++k) {
        const std::size_t shift = (k_len - 1 - k) * dil;
        if (shift >= t_len) continue;
        double acc = 0.0;
        for (std::size_t t = shift; t < t_len; ++t) acc += drow[t] * xrow[t - shift];
        gk[k] += acc;
        if (dxrow) {
          const double wv = wk[k];
          for (std::size_t t = shift; t < t_len; ++t) dxrow[t - shift] += wv * drow[t];
        }
      }
    }
  }
}

// Inverted dropout on a buffer. Leaves mask empty when inactive.
void apply_dropout(std::vector<double>& values, std::vector<double>& mask, double rate,
                   Mode mode, Rng* rng) {
  mask.clear();
  if (mode != Mode::train || rate <= 0.0) return;
  if (rng == nullptr) throw Error("train-mode forward requires a dropout RNG");
  const double keep_scale = 1.0 / (1.0 - rate);
  mask.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask[i] = rng->uniform() < rate ? 0.0 : keep_scale;
    values[i] *= mask[i];
  }
}

void softmax(std::span<const double> z, Vector& out) {
  out.resize(z.size());
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
}

void tcn_forward(const ModelParams& params, const Matrix& input, Mode mode, Rng* rng,
                 std::vector<TcnBlockTrace>& blocks, Matrix& out) {
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  const double* p = params.flat().data();
  if (input.rows != static_cast<std::size_t>(cfg.input_channels())) {
    throw Error("encoder input has " + std::to_string(input.rows) +
                " channels, params expect " + std::to_string(cfg.input_channels()));
  }
  if (input.cols == 0) throw Error("encoder input has no chunks");
  blocks.resize(layout.tcn.size());
  const Matrix* x = &input;
  for (std::size_t bi = 0; bi < layout.tcn.size(); ++bi) {
    const auto& lb = layout.tcn[bi];
    auto& tb = blocks[bi];
    tb.input = *x;
    conv_forward(lb.conv1, lb.dilation, cfg.kernel, p, tb.input, tb.pre1);
    tb.act1 = tb.pre1;
    for (auto& v : tb.act1.data) v = std::max(v, 0.0);
    apply_dropout(tb.act1.data, tb.mask1.data, cfg.tcn_dropout, mode, rng);
    tb.mask1.rows = tb.mask1.data.empty() ? 0 : tb.act1.rows;
    tb.mask1.cols = tb.mask1.data.empty() ? 0 : tb.act1.cols;

    conv_forward(lb.conv2, lb.dilation, cfg.kernel, p, tb.act1, tb.pre2);
    tb.act2 = tb.pre2;
    for (auto& v : tb.act2.data) v = std::max(v, 0.0);
    apply_dropout(tb.act2.data, tb.mask2.data, cfg.tcn_dropout, mode, rng);
    tb.mask2.rows = tb.mask2.data.empty() ? 0 : tb.act2.rows;
    tb.mask2.cols = tb.mask2.data.empty() ? 0 : tb.act2.cols;

    if (lb.down.w != kAbsent) {
      // 1x1 convolution
      Conv one = lb.down;
      conv_forward(one, 1, 1, p, tb.input, tb.residual);
    } else {
      tb.residual = tb.input;
    }
    tb.pre_out = tb.act2;
    for (std::size_t i = 0; i < tb.pre_out.data.size(); ++i) {
      tb.pre_out.data[i] += tb.residual.data[i];
    }
    tb.output = tb.pre_out;
    for (auto& v : tb.output.data) v = std::max(v, 0.0);
    x = &tb.output;
  }
  out = *x;
}

// Attention pooling (or uniform pooling when the fusion has no attention).
void pool_forward(const ModelParams& params, ForwardTrace& tr, Mode mode, Rng* rng) {
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  const double* p = params.flat().data();
  const std::size_t c_len = tr.tcn_out.rows;
  const std::size_t t_len = tr.tcn_out.cols;
  if (uses_attention(cfg.fusion)) {
    affine_forward(layout.mlp1_fc1, p, tr.global, tr.mlp1_pre);
    tr.mlp1_hidden = tr.mlp1_pre;
    apply_dropout(tr.mlp1_hidden, tr.mlp1_mask, cfg.mlp1_dropout, mode, rng);
    affine_forward(layout.mlp1_fc2, p, tr.mlp1_hidden, tr.query);
    tr.attn_logits.assign(t_len, 0.0);
    for (std::size_t c = 0; c < c_len; ++c) {
      const double q = tr.query[c];
      auto row = tr.tcn_out.row(c);
      for (std::size_t t = 0; t < t_len; ++t) tr.attn_logits[t] += q * row[t];
    }
    softmax(tr.attn_logits, tr.attn);
  } else {
    tr.mlp1_pre.clear();
    tr.mlp1_mask.clear();
    tr.mlp1_hidden.clear();
    tr.query.clear();
    tr.attn_logits.assign(t_len, 0.0);
    tr.attn.assign(t_len, 1.0 / static_cast<double>(t_len));
  }
  tr.high_level.assign(c_len, 0.0);
  for (std::size_t c = 0; c < c_len; ++c) {
    auto row = tr.tcn_out.row(c);
    double s = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) s += row[t] * tr.attn[t];
    tr.high_level[c] = s;
  }
}

void mlp2_forward(const ModelParams& params, ForwardTrace& tr) {
  const auto& layout = params.layout();
  const double* p = params.flat().data();
  affine_forward(layout.mlp2_fc1, p, tr.global, tr.mlp2_pre);
  tr.mlp2_hidden = tr.mlp2_pre;
  for (auto& v : tr.mlp2_hidden) v = std::max(v, 0.0);
  affine_forward(layout.mlp2_fc2, p, tr.mlp2_hidden, tr.mlp2_out);
}

double normalized_score(std::span<const double> x, std::span<const double> w,
                        double* x_norm_out) {
  const double xn = norm2(x);
  const double wn = norm2(w);
  if (x_norm_out) *x_norm_out = xn;
  if (xn == 0.0 || wn == 0.0) {
    warn_zero_norm();
    return 0.0;
  }
  return std::clamp(dot(x, w) / (xn * wn), -1.0, 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------

PreparedSample prepare_sample(const SampleRecord& r, const PrepareOptions& opt) {
  PreparedSample s;
  FrameSequence padded = repeat_pad(r.frames, opt.min_frames, opt.strict_min_frames);
  s.chunked = chunk_summarize(padded, opt.chunks);
  s.global = r.global_feature;
  s.speech = r.speech_embedding;
  s.meta = r.audio_meta;
  s.label = r.label;
  return s;
}

std::vector<PreparedSample> prepare_dataset(const Dataset& ds,
                                            const PrepareOptions& opt) {
  std::vector<PreparedSample> out;
  out.reserve(ds.records.size());
  for (const auto& r : ds.records) out.push_back(prepare_sample(r, opt));
  return out;
}

Matrix temporal_encoder(const Matrix& chunked, const ModelParams& params) {
  std::vector<TcnBlockTrace> blocks;
  Matrix out;
  tcn_forward(params, chunked, Mode::eval, nullptr, blocks, out);
  return out;
}

AttentionResult attention_fuse(const Matrix& tcn_out, std::span<const double> global,
                               const ModelParams& params) {
  const auto& cfg = params.config();
  if (tcn_out.rows != static_cast<std::size_t>(cfg.width) || tcn_out.cols == 0) {
    throw Error("attention_fuse: encoder output must be C x T with T >= 1");
  }
  if (global.size() != static_cast<std::size_t>(cfg.global_dim)) {
    throw Error("attention_fuse: global feature length mismatch");
  }
  ForwardTrace tr;
  tr.tcn_out = tcn_out;
  tr.global.assign(global.begin(), global.end());
  pool_forward(params, tr, Mode::eval, nullptr);
  return {tr.high_level, tr.attn};
}

Vector concat_fuse(std::span<const double> global, std::span<const double> high_level,
                   const ModelParams& params) {
  const auto& cfg = params.config();
  if (!uses_concat(cfg.fusion)) throw Error("concat_fuse: params have no MLP2");
  if (global.size() != static_cast<std::size_t>(cfg.global_dim) ||
      high_level.size() != static_cast<std::size_t>(cfg.width)) {
    throw Error("concat_fuse: shape mismatch");
  }
  ForwardTrace tr;
  tr.global.assign(global.begin(), global.end());
  mlp2_forward(params, tr);
  Vector x = tr.mlp2_out;
  x.insert(x.end(), high_level.begin(), high_level.end());
  return x;
}

double score_head(std::span<const double> x, std::span<const double> weight) {
  if (x.size() != weight.size()) throw Error("score_head: shape mismatch");
  return normalized_score(x, weight, nullptr);
}

Level classify(double score) {
  if (!(std::abs(score) <= 1.0 + 1e-9)) throw Error("score out of range");
  if (score < -0.5) return Level::HD;
  if (score < 0.0) return Level::DE;
  if (score < 0.5) return Level::EG;
  return Level::HE;
}

AudioResult audio_fuse(std::span<const double> visual, std::span<const double> speech,
                       std::span<const double> meta, const ModelParams& params) {
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  if (!cfg.audio) throw Error("audio_fuse: params have no audio branch");
  if (speech.empty()) throw Error("no audio modality");
  if (visual.size() != static_cast<std::size_t>(cfg.embedding_dim()) ||
      speech.size() != static_cast<std::size_t>(cfg.speech_dim) ||
      meta.size() != static_cast<std::size_t>(kAudioMetaDim)) {
    throw Error("audio_fuse: shape mismatch");
  }
  const double* p = params.flat().data();
  Vector proj;
  affine_forward(layout.audio_fc, p, speech, proj);
  AudioResult out;
  out.embedding.assign(visual.begin(), visual.end());
  out.embedding.insert(out.embedding.end(), proj.begin(), proj.end());
  out.embedding.insert(out.embedding.end(), meta.begin(), meta.end());
  if (cfg.head == HeadKind::normalized) {
    out.score = normalized_score(out.embedding, params.values("audio.head.weight"),
                                 nullptr);
  }
  return out;
}

void forward(const PreparedSample& sample, const ModelParams& params, Mode mode,
             Rng* dropout_rng, bool use_audio, ForwardTrace& tr) {
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  const double* p = params.flat().data();
  if (sample.global.size() != static_cast<std::size_t>(cfg.global_dim)) {
    throw Error("global feature has length " + std::to_string(sample.global.size()) +
                ", params expect " + std::to_string(cfg.global_dim));
  }
  tr.mode = mode;
  tr.input = sample.chunked.values;
  tr.global = sample.global;
  tcn_forward(params, tr.input, mode, dropout_rng, tr.tcn, tr.tcn_out);
  pool_forward(params, tr, mode, dropout_rng);

  if (uses_concat(cfg.fusion)) {
    mlp2_forward(params, tr);
    tr.visual = tr.mlp2_out;
    tr.visual.insert(tr.visual.end(), tr.high_level.begin(), tr.high_level.end());
  } else {
    tr.mlp2_pre.clear();
    tr.mlp2_hidden.clear();
    tr.mlp2_out.clear();
    tr.visual = tr.high_level;
  }

  tr.audio_used = use_audio && cfg.audio && sample.has_speech();
  if (tr.audio_used) {
    if (sample.speech->size() != static_cast<std::size_t>(cfg.speech_dim)) {
      throw Error("speech embedding length mismatch");
    }
    tr.speech = *sample.speech;
    tr.meta = *sample.meta;
    affine_forward(layout.audio_fc, p, tr.speech, tr.speech_proj);
    tr.embedding = tr.visual;
    tr.embedding.insert(tr.embedding.end(), tr.speech_proj.begin(), tr.speech_proj.end());
    tr.embedding.insert(tr.embedding.end(), tr.meta.begin(), tr.meta.end());
  } else {
    tr.speech.clear();
    tr.speech_proj.clear();
    tr.meta.clear();
    tr.embedding = tr.visual;
  }

  tr.score = 0.0;
  tr.logits.clear();
  if (cfg.head == HeadKind::normalized) {
    const std::size_t w_off = tr.audio_used ? layout.audio_head_w : layout.head_w;
    std::span<const double> w(p + w_off, tr.embedding.size());
    tr.score = normalized_score(tr.embedding, w, &tr.embedding_norm);
  } else {
    const Affine& head = tr.audio_used ? layout.audio_class_head : layout.class_head;
    affine_forward(head, p, tr.embedding, tr.logits);
    tr.embedding_norm = norm2(tr.embedding);
  }
}

ForwardTrace forward(const PreparedSample& sample, const ModelParams& params, Mode mode,
                     Rng* dropout_rng, bool use_audio) {
  ForwardTrace tr;
  forward(sample, params, mode, dropout_rng, use_audio, tr);
  return tr;
}

void backward(const ForwardTrace& tr, const Upstream& up, const ModelParams& params,
              std::span<double> grad) {
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  const double* p = params.flat().data();
  double* g = grad.data();
  if (grad.size() != params.size()) throw Error("gradient buffer size mismatch");
  if (tr.input.rows != static_cast<std::size_t>(cfg.input_channels()) ||
      tr.tcn.size() != layout.tcn.size() ||
      tr.tcn_out.rows != static_cast<std::size_t>(cfg.width) ||
      tr.visual.size() != static_cast<std::size_t>(cfg.embedding_dim()) ||
      (tr.audio_used && !cfg.audio)) {
    throw Error("trace does not match params");
  }
  const std::size_t e_len = tr.embedding.size();
  if (!up.d_embedding.empty() && up.d_embedding.size() != e_len) {
    throw Error("upstream embedding gradient length mismatch");
  }

  // Head.
  Vector de(e_len, 0.0);
  if (!up.d_embedding.empty()) de = up.d_embedding;
  if (cfg.head == HeadKind::normalized) {
    const std::size_t w_off = tr.audio_used ? layout.audio_head_w : layout.head_w;
    std::span<const double> w(p + w_off, e_len);
    const double wn = norm2(w);
    const double xn = tr.embedding_norm;
    if (up.d_score != 0.0 && xn > 0.0 && wn > 0.0) {
      const double s = tr.score;
      for (std::size_t i = 0; i < e_len; ++i) {
        const double xh = tr.embedding[i] / xn;
        const double wh = w[i] / wn;
        de[i] += up.d_score * (wh - s * xh) / xn;
        g[w_off + i] += up.d_score * (xh - s * wh) / wn;
      }
    }
  } else if (!up.d_logits.empty()) {
    const Affine& head = tr.audio_used ? layout.audio_class_head : layout.class_head;
    affine_backward(head, p, tr.embedding, up.d_logits, g, de);
  }

  // Audio branch: e = [X; FC(speech); meta].
  const std::size_t x_len = tr.visual.size();
  if (tr.audio_used) {
    std::span<const double> d_proj(de.data() + x_len, tr.speech_proj.size());
    affine_backward(layout.audio_fc, p, tr.speech, d_proj, g, {});
  }
  std::span<const double> dx(de.data(), x_len);

  // Split X into the MLP2 part and X_HL.
  Vector d_hl(static_cast<std::size_t>(cfg.width), 0.0);
  if (uses_concat(cfg.fusion)) {
    const std::size_t c = tr.mlp2_out.size();
    std::span<const double> d_m2(dx.data(), c);
    for (std::size_t i = 0; i < d_hl.size(); ++i) d_hl[i] = dx[c + i];
    Vector d_hidden(tr.mlp2_hidden.size(), 0.0);
    affine_backward(layout.mlp2_fc2, p, tr.mlp2_hidden, d_m2, g, d_hidden);
    for (std::size_t i = 0; i < d_hidden.size(); ++i) {
      if (tr.mlp2_pre[i] <= 0.0) d_hidden[i] = 0.0;
    }
    affine_backward(layout.mlp2_fc1, p, tr.global, d_hidden, g, {});
  } else {
    for (std::size_t i = 0; i < d_hl.size(); ++i) d_hl[i] = dx[i];
  }

  // Pooling: X_HL = X_TCN attn^T.
  const std::size_t c_len = tr.tcn_out.rows;
  const std::size_t t_len = tr.tcn_out.cols;
  Matrix d_tcn(c_len, t_len);
  Vector d_attn(t_len, 0.0);
  for (std::size_t c = 0; c < c_len; ++c) {
    auto row = tr.tcn_out.row(c);
    auto drow = d_tcn.row(c);
    for (std::size_t t = 0; t < t_len; ++t) {
      drow[t] += d_hl[c] * tr.attn[t];
      d_attn[t] += d_hl[c] * row[t];
    }
  }
  if (uses_attention(cfg.fusion)) {
    double inner = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) inner += d_attn[t] * tr.attn[t];
    Vector d_logit(t_len);
    for (std::size_t t = 0; t < t_len; ++t) d_logit[t] = tr.attn[t] * (d_attn[t] - inner);
    Vector d_query(c_len, 0.0);
    for (std::size_t c = 0; c < c_len; ++c) {
      auto row = tr.tcn_out.row(c);
      auto drow = d_tcn.row(c);
      double acc = 0.0;
      for (std::size_t t = 0; t < t_len; ++t) {
        acc += d_logit[t] * row[t];
        drow[t] += tr.query[c] * d_logit[t];
      }
      d_query[c] = acc;
    }
    Vector d_hidden(tr.mlp1_hidden.size(), 0.0);
    affine_backward(layout.mlp1_fc2, p, tr.mlp1_hidden, d_query, g, d_hidden);
    if (!tr.mlp1_mask.empty()) {
      for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= tr.mlp1_mask[i];
    }
    affine_backward(layout.mlp1_fc1, p, tr.global, d_hidden, g, {});
  }

  // Encoder blocks in reverse.
  Matrix d_out = std::move(d_tcn);
  for (std::size_t bi = layout.tcn.size(); bi-- > 0;) {
    const auto& lb = layout.tcn[bi];
    const auto& tb = tr.tcn[bi];
    const bool need_dx = bi > 0;
    Matrix d_pre_out = d_out;
    for (std::size_t i = 0; i < d_pre_out.data.size(); ++i) {
      if (tb.pre_out.data[i] <= 0.0) d_pre_out.data[i] = 0.0;
    }
    Matrix d_input(tb.input.rows, tb.input.cols);
    // residual
    if (lb.down.w != kAbsent) {
      conv_backward(lb.down, 1, 1, p, tb.input, d_pre_out, g, need_dx ? &d_input : nullptr);
    } else if (need_dx) {
      for (std::size_t i = 0; i < d_input.data.size(); ++i) d_input.data[i] += d_pre_out.data[i];
    }
    // second conv
    Matrix d_pre2 = d_pre_out;
    for (std::size_t i = 0; i < d_pre2.data.size(); ++i) {
      double v = tb.pre2.data[i] > 0.0 ? d_pre2.data[i] : 0.0;
      if (!tb.mask2.data.empty()) v *= tb.mask2.data[i];
      d_pre2.data[i] = v;
    }
    Matrix d_act1(tb.act1.rows, tb.act1.cols);
    conv_backward(lb.conv2, lb.dilation, cfg.kernel, p, tb.act1, d_pre2, g, &d_act1);
    // first conv
    for (std::size_t i = 0; i < d_act1.data.size(); ++i) {
      double v = tb.pre1.data[i] > 0.0 ? d_act1.data[i] : 0.0;
      if (!tb.mask1.data.empty()) v *= tb.mask1.data[i];
      d_act1.data[i] = v;
    }
    conv_backward(lb.conv1, lb.dilation, cfg.kernel, p, tb.input, d_act1, g,
                  need_dx ? &d_input : nullptr);
    d_out = std::move(d_input);
  }
}

Vector backward(const ForwardTrace& trace, const Upstream& upstream,
                const ModelParams& params) {
  Vector grad(params.size(), 0.0);
  backward(trace, upstream, params, grad);
  return grad;
}

Level predict(const ForwardTrace& trace) {
  if (!trace.logits.empty()) {
    const auto it = std::max_element(trace.logits.begin(), trace.logits.end());
    return static_cast<Level>(it - trace.logits.begin());
  }
  return classify(trace.score);
}

std::vector<bool> activation_pattern(const ForwardTrace& tr) {
  std::vector<bool> bits;
  for (const auto& tb : tr.tcn) {
    for (double v : tb.pre1.data) bits.push_back(v > 0.0);
    for (double v : tb.pre2.data) bits.push_back(v > 0.0);
    for (double v : tb.pre_out.data) bits.push_back(v > 0.0);
  }
  for (double v : tr.mlp2_pre) bits.push_back(v > 0.0);
  return bits;
}

}  // namespace mocorank
