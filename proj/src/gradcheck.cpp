#include "mocorank/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "mocorank/losses.hpp"
#include "mocorank/model.hpp"
#include "mocorank/moco.hpp"

namespace mocorank {
namespace {

struct Problem {
  std::vector<PreparedSample> samples;
  std::vector<Level> labels;
  ScorePool pool;
  ClassCenters centers;
  std::array<std::size_t, kNumLevels> counts{40, 250, 900, 130};
  std::uint64_t dropout_seed = 0;
};

struct Evaluation {
  double loss = 0.0;
  std::vector<bool> kinks;
  Vector grad;
};

Evaluation evaluate_loss(const Problem& pb, const ModelParams& params, LossKind loss, bool audio,
                         bool with_grad) {
  const std::size_t n = pb.samples.size();
  Rng rng(pb.dropout_seed);
  std::vector<ForwardTrace> traces(n);
  std::vector<double> scores(n);
  std::vector<Vector> embeddings(n), logits(n);
  Evaluation ev;
  for (std::size_t i = 0; i < n; ++i) {
    forward(pb.samples[i], params, Mode::train, &rng, audio, traces[i]);
    scores[i] = traces[i].score;
    embeddings[i] = traces[i].embedding;
    logits[i] = traces[i].logits;
    const auto bits = activation_pattern(traces[i]);
    ev.kinks.insert(ev.kinks.end(), bits.begin(), bits.end());
  }
  BatchLoss bl;
  switch (loss) {
    case LossKind::mocorank:
    case LossKind::mocorank_center:
      bl = multi_margin_loss(scores, pb.labels, embeddings, pb.pool);
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& e : pb.pool.entries()) {
          ev.kinks.push_back(pairwise_term(pb.labels[i], scores[i], embeddings[i], e) > 0.0);
        }
      }
      break;
    case LossKind::mse:
      bl = mse_loss(scores, pb.labels);
      break;
    case LossKind::ce:
    case LossKind::ce_center:
      bl = ce_loss(logits, pb.labels);
      break;
    case LossKind::cb_focal:
      bl = cb_focal_loss(logits, pb.labels, pb.counts);
      break;
  }
  if (uses_center(loss)) {
    const auto c = center_loss(embeddings, pb.labels, pb.centers);
    bl.loss += c.loss;
    if (bl.d_embeddings.size() != n) bl.d_embeddings.assign(n, Vector{});
    for (std::size_t i = 0; i < n; ++i) {
      auto& de = bl.d_embeddings[i];
      if (de.empty()) de.assign(c.d_embeddings[i].size(), 0.0);
      for (std::size_t k = 0; k < de.size(); ++k) de[k] += c.d_embeddings[i][k];
    }
  }
  ev.loss = bl.loss;
  if (with_grad) {
    ev.grad.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Upstream up;
      up.d_score = bl.d_scores.empty() ? 0.0 : bl.d_scores[i];
      if (bl.d_embeddings.size() == n) up.d_embedding = bl.d_embeddings[i];
      if (bl.d_logits.size() == n) up.d_logits = bl.d_logits[i];
      backward(traces[i], up, params, ev.grad);
    }
  }
  return ev;
}

Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

Problem make_problem(const ModelConfig& mc, const GradCheckOptions& opt) {
  Rng rng(mix_seed(opt.seed, 101));
  Problem pb;
  pb.dropout_seed = mix_seed(opt.seed, 102);
  const auto in = static_cast<std::size_t>(mc.input_channels());
  const auto t = static_cast<std::size_t>(mc.chunks);
  for (int i = 0; i < opt.batch; ++i) {
    PreparedSample s;
    s.chunked.values = Matrix(in, t);
    for (auto& x : s.chunked.values.data) x = rng.normal();
    s.global = random_vector(rng, static_cast<std::size_t>(mc.global_dim));
    s.label = static_cast<Level>(i % kNumLevels);
    // pool comparisons need one embedding size; otherwise mix both paths
    if (opt.audio && (uses_pool(opt.loss) || i % 2 == 0)) {
      s.speech = random_vector(rng, static_cast<std::size_t>(mc.speech_dim));
      Vector meta(7);
      for (auto& x : meta) x = rng.uniform();
      s.meta = meta;
    }
    pb.labels.push_back(s.label);
    pb.samples.push_back(std::move(s));
  }
  const auto dim = static_cast<std::size_t>(opt.audio ? mc.audio_embedding_dim()
                                                      : mc.embedding_dim());
  if (uses_pool(opt.loss)) {
    pb.pool = ScorePool(static_cast<std::size_t>(opt.pool));
    std::vector<ScorePoolEntry> entries;
    for (int j = 0; j < opt.pool; ++j) {
      ScorePoolEntry e;
      e.label = static_cast<Level>(j % kNumLevels);
      e.score = rng.uniform(-1.0, 1.0);
      e.embedding = random_vector(rng, dim);
      entries.push_back(std::move(e));
    }
    pb.pool.push(std::move(entries));
  }
  if (uses_center(opt.loss)) {
    pb.centers = ClassCenters::zeros(dim);
    for (auto& c : pb.centers.centers) c = random_vector(rng, dim, 0.3);
  }
  return pb;
}

}  // namespace

ModelConfig grad_check_model(LossKind loss, bool audio) {
  ModelConfig mc;
  mc.high_level_dim = 2;
  mc.global_dim = 4;
  mc.chunks = 4;
  mc.width = 4;
  mc.mlp_hidden = 4;
  mc.fusion = Fusion::concat_attention;
  mc.head = uses_logits(loss) ? HeadKind::categorical : HeadKind::normalized;
  mc.audio = audio;
  mc.speech_dim = 4;
  return mc;
}

GradCheckReport grad_check(const GradCheckOptions& opt, double tolerance) {
  if (opt.audio && uses_center(opt.loss)) {
    throw Error("grad_check: center losses need a single embedding space; run them without audio");
  }
  const ModelConfig mc = grad_check_model(opt.loss, opt.audio);
  ModelParams params = ModelParams::initialized(mc, mix_seed(opt.seed, 103));
  // move biases off zero so every coordinate has a generic gradient
  Rng jitter(mix_seed(opt.seed, 104));
  for (auto& x : params.flat()) x += 0.05 * jitter.normal();
  if (params.size() > opt.max_params) {
    throw Error("grad_check: model has " + std::to_string(params.size()) + " parameters, limit " +
                std::to_string(opt.max_params));
  }
  const Problem pb = make_problem(mc, opt);
  const Evaluation base = evaluate_loss(pb, params, opt.loss, opt.audio, true);

  GradCheckReport rep;
  rep.loss = opt.loss;
  rep.audio = opt.audio;
  rep.params = params.size();
  rep.tolerance = tolerance;
  for (const auto& b : params.blocks()) {
    BlockCheck bc;
    bc.name = b.name;
    for (std::size_t i = b.offset; i < b.offset + b.size(); ++i) {
      const double orig = params.flat()[i];
      params.flat()[i] = orig + opt.step;
      const Evaluation up = evaluate_loss(pb, params, opt.loss, opt.audio, false);
      params.flat()[i] = orig - opt.step;
      const Evaluation down = evaluate_loss(pb, params, opt.loss, opt.audio, false);
      params.flat()[i] = orig;
      if (up.kinks != base.kinks || down.kinks != base.kinks) {
        ++bc.skipped;
        continue;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * opt.step);
      const double analytic = base.grad[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), opt.floor});
      bc.max_rel_err = std::max(bc.max_rel_err, rel);
      bc.max_abs_err = std::max(bc.max_abs_err, abs_err);
      ++bc.checked;
    }
    rep.checked += bc.checked;
    rep.skipped += bc.skipped;
    rep.max_rel_err = std::max(rep.max_rel_err, bc.max_rel_err);
    rep.blocks.push_back(std::move(bc));
  }
  rep.passed = rep.checked > 0 && rep.max_rel_err < tolerance;
  return rep;
}

std::vector<GradCheckReport> grad_check_suite(std::uint64_t seed, double tolerance) {
  std::vector<GradCheckReport> out;
  for (LossKind k : {LossKind::mocorank, LossKind::mocorank_center, LossKind::mse, LossKind::ce,
                     LossKind::cb_focal, LossKind::ce_center}) {
    GradCheckOptions opt;
    opt.loss = k;
    opt.seed = seed;
    out.push_back(grad_check(opt, tolerance));
  }
  for (LossKind k : {LossKind::mocorank, LossKind::mse, LossKind::ce}) {
    GradCheckOptions opt;
    opt.loss = k;
    opt.audio = true;
    opt.seed = seed;
    out.push_back(grad_check(opt, tolerance));
  }
  return out;
}

std::string grad_check_json(const std::vector<GradCheckReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : r.blocks) {
      blocks.push_back({{"block", b.name},
                        {"checked", b.checked},
                        {"skipped", b.skipped},
                        {"max_rel_err", b.max_rel_err},
                        {"max_abs_err", b.max_abs_err}});
    }
    arr.push_back({{"loss", loss_name(r.loss)},
                   {"audio", r.audio},
                   {"params", r.params},
                   {"checked", r.checked},
                   {"skipped", r.skipped},
                   {"max_rel_err", r.max_rel_err},
                   {"tolerance", r.tolerance},
                   {"passed", r.passed},
                   {"blocks", blocks}});
  }
  return arr.dump(2);
}

}  // namespace mocorank
