#include "mocorank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mocorank/checkpoint.hpp"
#include "mocorank/log.hpp"

namespace mocorank {

PrepareOptions prepare_options(const TrainConfig& cfg) {
  return {cfg.chunks, cfg.min_frames, cfg.strict_250};
}

Trainer::Trainer(const TrainConfig& cfg, const Dataset& train, const Dataset* val,
                 const StageSpec& stage)
    : cfg_(cfg), stage_(stage) {
  cfg_.validate();
  if (train.size() == 0) throw Error("training split is empty");
  model_config_ = cfg_.model_config(train.high_level_dim, train.global_dim, stage_.audio_model,
                                    train.speech_dim);
  const auto popt = prepare_options(cfg_);
  train_ = prepare_dataset(train, popt);
  if (val && val->size() > 0) val_ = prepare_dataset(*val, popt);
  class_counts_ = train.class_counts();

  if (stage_.use_audio && (uses_pool(cfg_.loss) || uses_center(cfg_.loss))) {
    const std::size_t speech = train.speech_count();
    if (speech != 0 && speech != train.size()) {
      throw Error("use_audio with a " + std::string(loss_name(cfg_.loss)) +
                  " loss needs uniform embeddings; use train-two-stage for mixed data");
    }
  }
  if (uses_pool(cfg_.loss)) {
    for (int c = 0; c < kNumLevels; ++c) {
      if (class_counts_[c] == 0) {
        throw Error(std::string("training split lacks class ") +
                    level_name(static_cast<Level>(c)) + ", required by the score pool");
      }
    }
  }
  if (cfg_.loss == LossKind::cb_focal) {
    for (auto n : class_counts_) {
      if (n == 0) throw Error("cb_focal needs every class in the training split");
    }
  }
  if (cfg_.sampler == SamplerKind::class_balanced) {
    sampler_.emplace(train.labels(), cfg_.batch_size, mix_seed(cfg_.seed, 31 + stage_.stage));
  }
  const auto n = static_cast<std::int64_t>(train_.size());
  steps_per_epoch_ = (n + cfg_.batch_size - 1) / cfg_.batch_size;
}

void Trainer::begin(const std::optional<ModelParams>& init) {
  TrainState st;
  st.stage = stage_.stage;
  if (init) {
    if (!(init->config() == model_config_)) {
      throw Error("initial parameters do not match the configured model");
    }
    st.params = *init;
  } else {
    st.params = ModelParams::initialized(model_config_, mix_seed(cfg_.seed, 41));
  }
  st.rng = Rng(mix_seed(cfg_.seed, 51 + stage_.stage));
  if (uses_pool(cfg_.loss)) {
    st.encoder = MomentumEncoder::from(st.params, cfg_.momentum);
    st.pool = pool_init(train_, *st.encoder, static_cast<std::size_t>(cfg_.pool_size),
                        mix_seed(cfg_.seed, 61 + stage_.stage), stage_.use_audio);
  }
  if (uses_center(cfg_.loss)) {
    const bool audio_embed = stage_.use_audio && train_.front().has_speech() &&
                             model_config_.audio;
    const int dim = audio_embed ? model_config_.audio_embedding_dim()
                                : model_config_.embedding_dim();
    st.centers = ClassCenters::zeros(static_cast<std::size_t>(dim), cfg_.center_alpha);
  }
  state_ = std::move(st);

  const auto visual = state_.params.visual_mask();
  trainable_.assign(visual.size(), false);
  for (std::size_t i = 0; i < visual.size(); ++i) {
    trainable_[i] = stage_.stage == 1 ? visual[i] : !visual[i];
  }
}

void Trainer::restore(TrainState state) {
  if (!(state.params.config() == model_config_)) {
    throw Error("checkpoint model does not match the configured model");
  }
  if (state.stage != stage_.stage) throw Error("checkpoint stage differs from trainer stage");
  if (sampler_) sampler_->restore(state.sampler_state);
  state_ = std::move(state);
  const auto visual = state_.params.visual_mask();
  trainable_.assign(visual.size(), false);
  for (std::size_t i = 0; i < visual.size(); ++i) {
    trainable_[i] = stage_.stage == 1 ? visual[i] : !visual[i];
  }
}

TrainState Trainer::snapshot() const {
  TrainState st = state_;
  if (sampler_) st.sampler_state = sampler_->state();
  return st;
}

std::vector<std::size_t> Trainer::next_batch() {
  if (sampler_) return sampler_->next_batch();
  auto& st = state_;
  if (st.batch_in_epoch == 0 || st.epoch_order.size() != train_.size()) {
    st.epoch_order.resize(train_.size());
    std::iota(st.epoch_order.begin(), st.epoch_order.end(), std::size_t{0});
    st.rng.shuffle(st.epoch_order);
  }
  const auto b = static_cast<std::size_t>(cfg_.batch_size);
  const std::size_t begin = static_cast<std::size_t>(st.batch_in_epoch) * b;
  const std::size_t end = std::min(begin + b, train_.size());
  return {st.epoch_order.begin() + static_cast<std::ptrdiff_t>(begin),
          st.epoch_order.begin() + static_cast<std::ptrdiff_t>(end)};
}

double Trainer::step() {
  if (finished()) throw Error("step: training already finished");
  if (epoch_complete()) throw Error("step: epoch complete, call end_epoch() first");
  auto& st = state_;
  const std::vector<std::size_t> batch = next_batch();
  const std::size_t n = batch.size();
  const double lr = cosine_lr(st.step, total_steps(), cfg_.lr_start, cfg_.lr_end);

  traces_.resize(n);
  std::vector<double> scores(n);
  std::vector<Level> labels(n);
  std::vector<Vector> embeddings(n);
  std::vector<Vector> logits(n);
  std::vector<const PreparedSample*> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples[i] = &train_[batch[i]];
    forward(*samples[i], st.params, Mode::train, &st.rng, stage_.use_audio, traces_[i]);
    scores[i] = traces_[i].score;
    labels[i] = samples[i]->label;
    embeddings[i] = traces_[i].embedding;
    logits[i] = traces_[i].logits;
  }

  BatchLoss bl;
  switch (cfg_.loss) {
    case LossKind::mocorank:
    case LossKind::mocorank_center:
      bl = multi_margin_loss(scores, labels, embeddings, *st.pool,
                             MarginLossOptions{cfg_.detach_margin});
      break;
    case LossKind::mse:
      bl = mse_loss(scores, labels);
      break;
    case LossKind::ce:
    case LossKind::ce_center:
      bl = ce_loss(logits, labels);
      break;
    case LossKind::cb_focal:
      bl = cb_focal_loss(logits, labels, class_counts_,
                         FocalOptions{cfg_.focal_beta, cfg_.focal_gamma});
      break;
  }
  std::optional<CenterLossResult> center;
  if (uses_center(cfg_.loss)) {
    center = center_loss(embeddings, labels, *st.centers, cfg_.center_weight);
    bl.loss += center->loss;
    if (bl.d_embeddings.size() != n) bl.d_embeddings.assign(n, Vector{});
    for (std::size_t i = 0; i < n; ++i) {
      auto& de = bl.d_embeddings[i];
      if (de.empty()) de.assign(center->d_embeddings[i].size(), 0.0);
      for (std::size_t k = 0; k < de.size(); ++k) de[k] += center->d_embeddings[i][k];
    }
  }
  if (!std::isfinite(bl.loss)) {
    throw Error("non-finite loss at stage " + std::to_string(st.stage) + " step " +
                std::to_string(st.step));
  }

  std::vector<ScorePoolEntry> entries;
  if (st.pool && cfg_.score_before_step) {
    entries = score_entries(samples, st.encoder->params, stage_.use_audio, st.step);
  }

  grad_.assign(st.params.size(), 0.0);
  Upstream up;
  for (std::size_t i = 0; i < n; ++i) {
    up.d_score = bl.d_scores.empty() ? 0.0 : bl.d_scores[i];
    up.d_embedding = bl.d_embeddings.size() == n ? bl.d_embeddings[i] : Vector{};
    up.d_logits = bl.d_logits.size() == n ? bl.d_logits[i] : Vector{};
    backward(traces_[i], up, st.params, grad_);
  }
  for (std::size_t i = 0; i < grad_.size(); ++i) {
    if (!trainable_[i]) grad_[i] = 0.0;
  }
  adamw_step(st.params, grad_, st.optimizer, lr, AdamWOptions{cfg_.weight_decay}, &trainable_);

  if (st.pool) {
    momentum_update(*st.encoder, st.params);
    if (!cfg_.score_before_step) {
      entries = score_entries(samples, st.encoder->params, stage_.use_audio, st.step);
    }
    st.pool->push(std::move(entries));
  }
  if (center) st.centers = std::move(center->updated);

  ++st.step;
  ++st.batch_in_epoch;
  st.epoch_loss_sum += bl.loss;
  return bl.loss;
}

bool Trainer::epoch_complete() const { return state_.batch_in_epoch >= steps_per_epoch_; }

EpochLog Trainer::end_epoch() {
  auto& st = state_;
  EpochLog e;
  e.stage = st.stage;
  e.epoch = st.epoch + 1;
  e.step = st.step;
  e.lr = cosine_lr(st.step, total_steps(), cfg_.lr_start, cfg_.lr_end);
  e.train_loss = st.batch_in_epoch > 0 ? st.epoch_loss_sum / static_cast<double>(st.batch_in_epoch)
                                       : 0.0;
  if (!val_.empty()) e.val = evaluate(st.params, val_, stage_.use_audio);
  st.log.push_back(e);
  ++st.epoch;
  st.batch_in_epoch = 0;
  st.epoch_loss_sum = 0.0;
  log::info("stage ", e.stage, " epoch ", e.epoch, " loss ", e.train_loss,
            e.val ? " val_avg_acc " + std::to_string(e.val->avg_acc) : std::string());
  return e;
}

void Trainer::run(const std::function<bool(const EpochLog&)>& on_epoch) {
  while (!finished()) {
    while (!epoch_complete()) step();
    const EpochLog e = end_epoch();
    if (on_epoch && !on_epoch(e)) break;
  }
}

// ---------------------------------------------------------------------------

MetricsReport evaluate(const ModelParams& params, const std::vector<PreparedSample>& samples,
                       bool use_audio) {
  if (samples.empty()) throw Error("evaluate: empty evaluation subset");
  std::vector<Level> preds, labels;
  preds.reserve(samples.size());
  labels.reserve(samples.size());
  ForwardTrace tr;
  for (const auto& s : samples) {
    forward(s, params, Mode::eval, nullptr, use_audio, tr);
    preds.push_back(predict(tr));
    labels.push_back(s.label);
  }
  return accuracy_metrics(confusion_matrix(preds, labels));
}

MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& ds, EvalSubset subset) {
  const Dataset chosen = subset == EvalSubset::speech_only ? speech_subset(ds) : ds;
  if (chosen.size() == 0) {
    throw Error(subset == EvalSubset::speech_only ? "evaluate: dataset has no speech records"
                                                  : "evaluate: empty dataset");
  }
  if (chosen.high_level_dim != ckpt.model.high_level_dim ||
      chosen.global_dim != ckpt.model.global_dim) {
    throw Error("evaluate: dataset dimensions do not match the checkpoint model");
  }
  const auto samples = prepare_dataset(chosen, prepare_options(ckpt.config));
  const bool use_audio = ckpt.model.audio && (ckpt.config.use_audio || ckpt.state.stage == 2);
  return evaluate(ckpt.state.params, samples, use_audio);
}

namespace {

std::optional<ModelParams> init_params(const TrainConfig& cfg) {
  if (cfg.init_from.empty()) return std::nullopt;
  const Checkpoint ck = load_checkpoint(cfg.init_from);
  log::info("initializing from ", cfg.init_from);
  return ck.state.params;
}

}  // namespace

TrainOutcome train(const TrainConfig& cfg, const Dataset& train_set, const Dataset* val,
                   const std::function<bool(const EpochLog&)>& on_epoch) {
  StageSpec spec{1, cfg.use_audio, cfg.use_audio, cfg.epochs};
  Trainer trainer(cfg, train_set, val, spec);
  std::optional<ModelParams> init = init_params(cfg);
  if (init && !(init->config() == trainer.model_config())) {
    throw Error("--init-from checkpoint has a different model shape");
  }
  trainer.begin(init);
  trainer.run(on_epoch);
  TrainOutcome out;
  out.checkpoint = {cfg, trainer.model_config(), trainer.snapshot()};
  out.log = trainer.state().log;
  return out;
}

TrainOutcome train(const TrainConfig& cfg) {
  if (cfg.train_path.empty()) throw Error("train: no training dataset path configured");
  const Dataset tr = load_records(cfg.train_path);
  std::optional<Dataset> val;
  if (!cfg.val_path.empty()) val = load_records(cfg.val_path);
  return train(cfg, tr, val ? &*val : nullptr);
}

std::uint64_t visual_hash(const ModelParams& params) {
  const auto mask = params.visual_mask();
  Vector visual;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) visual.push_back(params.flat()[i]);
  }
  return hash_values(visual);
}

TwoStageOutcome train_two_stage(const TrainConfig& cfg, const Dataset& train_set,
                                const Dataset* val) {
  const Dataset speech_train = speech_subset(train_set);
  if (speech_train.size() == 0) throw Error("train-two-stage: no speech records in training data");

  TwoStageOutcome out;
  // Stage 1: visual path on every record.
  StageSpec s1{1, true, false, cfg.epochs};
  Trainer stage1(cfg, train_set, val, s1);
  stage1.begin(init_params(cfg));
  stage1.run();
  out.log = stage1.state().log;

  // Stage 2: audio branch on speech-bearing records, visual blocks frozen.
  std::optional<Dataset> speech_val;
  if (val) {
    speech_val = speech_subset(*val);
    if (speech_val->size() == 0) speech_val.reset();
  }
  StageSpec s2{2, true, true, cfg.stage2_epochs};
  Trainer stage2(cfg, speech_train, speech_val ? &*speech_val : nullptr, s2);
  stage2.begin(stage1.state().params);
  out.visual_hash_before_stage2 = visual_hash(stage2.state().params);
  stage2.run();
  out.visual_hash_after_stage2 = visual_hash(stage2.state().params);
  if (out.visual_hash_before_stage2 != out.visual_hash_after_stage2) {
    throw Error("train-two-stage: visual parameters changed during stage 2");
  }
  const auto& log2 = stage2.state().log;
  out.log.insert(out.log.end(), log2.begin(), log2.end());
  TrainConfig snap = cfg;
  snap.use_audio = true;
  out.checkpoint = {snap, stage2.model_config(), stage2.snapshot()};
  return out;
}

TwoStageOutcome train_two_stage(const TrainConfig& cfg) {
  if (cfg.train_path.empty()) throw Error("train-two-stage: no training dataset path configured");
  const Dataset tr = load_records(cfg.train_path);
  std::optional<Dataset> val;
  if (!cfg.val_path.empty()) val = load_records(cfg.val_path);
  return train_two_stage(cfg, tr, val ? &*val : nullptr);
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "stage,epoch,step,lr,train_loss,val_acc,val_avg_acc\n";
  for (const auto& e : log) {
    os << e.stage << ',' << e.epoch << ',' << e.step << ',' << e.lr << ',' << e.train_loss << ',';
    if (e.val) os << e.val->acc << ',' << e.val->avg_acc;
    else os << ',';
    os << '\n';
  }
  return os.str();
}

}  // namespace mocorank
