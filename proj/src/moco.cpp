#include "mocorank/moco.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

#include "mocorank/log.hpp"

namespace mocorank {

ScorePool::ScorePool(std::size_t capacity) : capacity_(capacity) {}

void ScorePool::push(std::vector<ScorePoolEntry> batch) {
  if (batch.size() > capacity_) {
    throw Error("cannot push " + std::to_string(batch.size()) +
                " entries into a pool of capacity " + std::to_string(capacity_));
  }
  while (entries_.size() + batch.size() > capacity_) entries_.pop_front();
  for (auto& e : batch) entries_.push_back(std::move(e));
}

void momentum_update(MomentumEncoder& enc, const ModelParams& model) {
  if (!enc.params.same_shape(model)) {
    throw Error("momentum encoder and model parameter shapes differ");
  }
  const double m = enc.momentum;
  auto wm = enc.params.flat();
  auto w = model.flat();
  for (std::size_t i = 0; i < wm.size(); ++i) wm[i] = m * wm[i] + (1.0 - m) * w[i];
}

std::vector<ScorePoolEntry> score_entries(const std::vector<const PreparedSample*>& batch,
                                          const ModelParams& params, bool use_audio,
                                          std::int64_t iteration) {
  std::vector<ScorePoolEntry> out;
  out.reserve(batch.size());
  ForwardTrace tr;
  for (const PreparedSample* s : batch) {
    forward(*s, params, Mode::eval, nullptr, use_audio, tr);
    out.push_back({s->label, tr.score, tr.embedding, iteration});
  }
  return out;
}

ScorePool pool_init(const std::vector<PreparedSample>& samples, const MomentumEncoder& enc,
                    std::size_t capacity, std::uint64_t seed, bool use_audio) {
  if (capacity == 0) throw Error("score pool capacity must be positive");
  std::array<std::vector<std::size_t>, kNumLevels> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_class[code(samples[i].label)].push_back(i);
  }
  for (int c = 0; c < kNumLevels; ++c) {
    if (by_class[c].empty()) {
      throw Error(std::string("cannot initialize score pool: class ") +
                  level_name(static_cast<Level>(c)) + " is absent");
    }
  }
  Rng rng(mix_seed(seed, 21));
  const std::size_t per_class = (capacity + kNumLevels - 1) / kNumLevels;
  std::vector<const PreparedSample*> chosen;
  chosen.reserve(per_class * kNumLevels);
  for (auto& members : by_class) {
    if (members.size() >= per_class) {
      rng.shuffle(members);
      for (std::size_t k = 0; k < per_class; ++k) chosen.push_back(&samples[members[k]]);
    } else {
      for (std::size_t k = 0; k < per_class; ++k) {
        chosen.push_back(&samples[members[rng.index(members.size())]]);
      }
    }
  }
  auto entries = score_entries(chosen, enc.params, use_audio, -1);
  rng.shuffle(entries);
  entries.resize(capacity);
  ScorePool pool(capacity);
  pool.push(std::move(entries));
  return pool;
}

namespace {

void warn_zero_cosine() {
  static std::atomic<int> count{0};
  if (count.fetch_add(1) < 5) {
    log::warn("cosine similarity with a zero vector; defined as 0");
  }
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: length mismatch");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) {
    warn_zero_cosine();
    return 0.0;
  }
  return dot(a, b) / (na * nb);
}

double margin(int diff, std::span<const double> e1, std::span<const double> e2) {
  if (diff < 1 || diff > 3) {
    throw Error("margin: label difference must be 1, 2 or 3, got " + std::to_string(diff));
  }
  const double c = (cosine_similarity(e1, e2) + 1.0) / 2.0;
  return 0.5 * (diff - 1) + 0.5 * c;
}

double pairwise_term(Level l1, double s1, std::span<const double> e1,
                     const ScorePoolEntry& entry) {
  const int a = code(l1);
  const int b = code(entry.label);
  if (a == b) return std::abs(s1 - entry.score);
  const double m = margin(std::abs(a - b), e1, entry.embedding);
  return a > b ? m - (s1 - entry.score) : m - (entry.score - s1);
}

BatchLoss multi_margin_loss(std::span<const double> scores, std::span<const Level> labels,
                            const std::vector<Vector>& embeddings, const ScorePool& pool,
                            const MarginLossOptions& opt) {
  const std::size_t n_batch = scores.size();
  if (labels.size() != n_batch || embeddings.size() != n_batch) {
    throw Error("multi_margin_loss: batch arrays differ in length");
  }
  if (pool.empty()) throw Error("multi_margin_loss: empty score pool");
  const std::size_t n_pool = pool.size();
  const std::size_t e_len = pool[0].embedding.size();

  // Unit pool embeddings (zero rows stay zero).
  std::vector<double> unit(n_pool * e_len, 0.0);
  std::vector<bool> pool_zero(n_pool, false);
  for (std::size_t j = 0; j < n_pool; ++j) {
    const auto& e2 = pool[j].embedding;
    if (e2.size() != e_len) throw Error("score pool embeddings differ in length");
    const double n2 = norm2(e2);
    pool_zero[j] = n2 == 0.0;
    if (n2 > 0.0) {
      for (std::size_t k = 0; k < e_len; ++k) unit[j * e_len + k] = e2[k] / n2;
    }
  }

  const double scale = 1.0 / (static_cast<double>(n_batch) * static_cast<double>(n_pool));
  BatchLoss out;
  out.d_scores.assign(n_batch, 0.0);
  out.d_embeddings.assign(n_batch, Vector{});
  double total = 0.0;
  Vector acc_dir(e_len);
  for (std::size_t i = 0; i < n_batch; ++i) {
    const auto& e1 = embeddings[i];
    if (e1.size() != e_len) {
      throw Error("multi_margin_loss: batch embedding length differs from pool");
    }
    const double n1 = norm2(e1);
    if (n1 == 0.0) warn_zero_cosine();
    const double s1 = scores[i];
    const int l1 = code(labels[i]);
    std::fill(acc_dir.begin(), acc_dir.end(), 0.0);
    double acc_cos = 0.0;
    bool any_margin_grad = false;
    double row_loss = 0.0;
    double ds = 0.0;
    for (std::size_t j = 0; j < n_pool; ++j) {
      const auto& entry = pool[j];
      const int l2 = code(entry.label);
      const double s2 = entry.score;
      double f;
      double dfds;
      double cos = 0.0;
      const double* u2 = unit.data() + j * e_len;
      if (l1 == l2) {
        f = std::abs(s1 - s2);
        dfds = s1 > s2 ? 1.0 : (s1 < s2 ? -1.0 : 0.0);
      } else {
        if (n1 > 0.0 && !pool_zero[j]) {
          double d = 0.0;
          for (std::size_t k = 0; k < e_len; ++k) d += e1[k] * u2[k];
          cos = d / n1;
        } else if (pool_zero[j]) {
          warn_zero_cosine();
        }
        const double m = 0.5 * (std::abs(l1 - l2) - 1) + 0.25 * (cos + 1.0);
        if (l1 > l2) {
          f = m - (s1 - s2);
          dfds = -1.0;
        } else {
          f = m - (s2 - s1);
          dfds = 1.0;
        }
      }
      if (f <= 0.0) continue;
      row_loss += f;
      ds += dfds;
      if (l1 != l2 && !opt.detach_margin && n1 > 0.0 && !pool_zero[j]) {
        for (std::size_t k = 0; k < e_len; ++k) acc_dir[k] += u2[k];
        acc_cos += cos;
        any_margin_grad = true;
      }
    }
    total += row_loss;
    out.d_scores[i] = ds * scale;
    if (any_margin_grad) {
      // d cos / d e1 = u2 / |e1| - cos * e1 / |e1|^2 ; dM/dcos = 1/4
      Vector de(e_len);
      for (std::size_t k = 0; k < e_len; ++k) {
        de[k] = 0.25 * scale * (acc_dir[k] / n1 - acc_cos * e1[k] / (n1 * n1));
      }
      out.d_embeddings[i] = std::move(de);
    }
  }
  out.loss = total * scale;
  return out;
}

}  // namespace mocorank
