#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mocorank/moco.hpp"

using namespace mocorank;

namespace {

// Written from the margin and hinge definitions, one pair at a time.
double oracle_cos(const Vector& a, const Vector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double oracle_loss(const std::vector<double>& s, const std::vector<Level>& l,
                   const std::vector<Vector>& e, const ScorePool& pool) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const auto& p = pool[j];
      const int l1 = code(l[i]), l2 = code(p.label);
      double f;
      if (l1 == l2) {
        f = std::abs(s[i] - p.score);
      } else {
        const int diff = std::abs(l1 - l2);
        const double sim = 0.5 * (oracle_cos(e[i], p.embedding) + 1.0) / 2.0;
        const double m = diff == 1 ? sim : diff == 2 ? 0.5 + sim : 1.0 + sim;
        f = l1 > l2 ? m - (s[i] - p.score) : m - (p.score - s[i]);
      }
      total += f > 0 ? f : 0.0;
    }
  }
  return total / static_cast<double>(s.size() * pool.size());
}

struct Instance {
  std::vector<double> scores;
  std::vector<Level> labels;
  std::vector<Vector> embeddings;
  ScorePool pool;
};

Instance random_instance(Rng& rng, std::size_t b, std::size_t p, std::size_t dim) {
  Instance in;
  for (std::size_t i = 0; i < b; ++i) {
    in.scores.push_back(rng.uniform(-1, 1));
    in.labels.push_back(static_cast<Level>(rng.index(4)));
    Vector e(dim);
    for (auto& x : e) x = rng.normal();
    in.embeddings.push_back(e);
  }
  in.pool = ScorePool(p);
  std::vector<ScorePoolEntry> entries;
  for (std::size_t j = 0; j < p; ++j) {
    Vector e(dim);
    for (auto& x : e) x = rng.normal();
    entries.push_back({static_cast<Level>(rng.index(4)), rng.uniform(-1, 1), e, -1});
  }
  in.pool.push(entries);
  return in;
}

}  // namespace

TEST_CASE("multi-margin loss equals the brute-force oracle") {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto b = 1 + rng.index(8);
    const auto p = 1 + rng.index(32);
    const auto in = random_instance(rng, b, p, 1 + rng.index(6));
    const auto got = multi_margin_loss(in.scores, in.labels, in.embeddings, in.pool);
    worst = std::max(worst, std::abs(got.loss - oracle_loss(in.scores, in.labels, in.embeddings, in.pool)));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("margins") {
  const Vector a{1, 0}, b{0, 1}, c{-1, 0};
  CHECK(margin(1, a, a) == doctest::Approx(0.5));
  CHECK(margin(2, a, a) == doctest::Approx(1.0));
  CHECK(margin(3, a, a) == doctest::Approx(1.5));
  CHECK(margin(1, a, b) == doctest::Approx(0.25));
  CHECK(margin(3, a, c) == doctest::Approx(1.0));
}

TEST_CASE("pairwise term cases") {
  const Vector e{1, 0};
  ScorePoolEntry entry{Level::DE, -0.3, e, 0};
  CHECK(pairwise_term(Level::DE, 0.1, e, entry) == doctest::Approx(0.4));
  // HE vs DE with identical embeddings: M2 - (s1 - s2)
  CHECK(pairwise_term(Level::HE, 0.5, e, entry) == doctest::Approx(1.0 - 0.8));
  // HD vs DE: M1 - (s2 - s1)
  CHECK(pairwise_term(Level::HD, -0.9, e, entry) == doctest::Approx(0.5 - 0.6));
}

TEST_CASE("hinge dead zone and translation invariance") {
  const Vector e{1, 0};
  ScorePool pool(2);
  pool.push({{Level::HD, -1.0, e, 0}, {Level::EG, 0.0, e, 0}});
  const std::vector<double> s{2.0};
  const std::vector<Level> l{Level::HE};
  const std::vector<Vector> em{e};
  const auto r = multi_margin_loss(s, l, em, pool);
  CHECK(r.loss == 0.0);
  CHECK(r.d_scores[0] == 0.0);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = random_instance(rng, 4, 8, 3);
    const double shift = rng.uniform(-0.5, 0.5);
    std::vector<ScorePoolEntry> moved(in.pool.entries().begin(), in.pool.entries().end());
    for (std::size_t i = 0; i < in.scores.size(); ++i) {
      for (const auto& p : moved) {
        if (p.label == in.labels[i]) continue;
        auto q = p;
        q.score += shift;
        CHECK(pairwise_term(in.labels[i], in.scores[i] + shift, in.embeddings[i], q) ==
              doctest::Approx(pairwise_term(in.labels[i], in.scores[i], in.embeddings[i], p)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("multi-margin gradients match finite differences") {
  Rng rng(77);
  for (bool detach : {false, true}) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      auto in = random_instance(rng, 5, 12, 4);
      const MarginLossOptions opt{detach};
      const auto base = multi_margin_loss(in.scores, in.labels, in.embeddings, in.pool, opt);
      const double h = 1e-6;
      auto eval = [&](const Instance& x) {
        return multi_margin_loss(x.scores, x.labels, x.embeddings, x.pool, opt).loss;
      };
      auto signs = [&](const Instance& x) {
        std::vector<bool> out;
        for (std::size_t i = 0; i < x.scores.size(); ++i) {
          for (const auto& p : x.pool.entries()) {
            out.push_back(pairwise_term(x.labels[i], x.scores[i], x.embeddings[i], p) > 0);
          }
        }
        return out;
      };
      const auto ref = signs(in);
      auto probe = [&](double& slot, double analytic) {
        const double o = slot;
        slot = o + h;
        const auto up_sign = signs(in);
        const double up = eval(in);
        slot = o - h;
        const auto dn_sign = signs(in);
        const double dn = eval(in);
        slot = o;
        if (up_sign != ref || dn_sign != ref) return;
        const double num = (up - dn) / (2 * h);
        worst = std::max(worst, std::abs(num - analytic));
      };
      for (std::size_t i = 0; i < in.scores.size(); ++i) {
        probe(in.scores[i], base.d_scores[i]);
        if (!detach) {
          for (std::size_t k = 0; k < in.embeddings[i].size(); ++k) {
            probe(in.embeddings[i][k], base.d_embeddings[i][k]);
          }
        }
      }
      if (detach) {
        for (const auto& d : base.d_embeddings) {
          for (double v : d) CHECK(v == 0.0);
        }
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("score pool is a FIFO queue") {
  ScorePool pool(5);
  auto batch = [](int first, int n) {
    std::vector<ScorePoolEntry> b;
    for (int i = 0; i < n; ++i) b.push_back({Level::EG, double(first + i), {}, first + i});
    return b;
  };
  pool.push(batch(0, 3));
  CHECK(pool.size() == 3);
  pool.push(batch(3, 3));
  CHECK(pool.size() == 5);
  std::vector<double> got;
  for (const auto& e : pool.entries()) got.push_back(e.score);
  CHECK(got == std::vector<double>{1, 2, 3, 4, 5});
  pool.push(batch(6, 2));
  got.clear();
  for (const auto& e : pool.entries()) got.push_back(e.score);
  CHECK(got == std::vector<double>{3, 4, 5, 6, 7});
  CHECK_THROWS(pool.push(batch(10, 6)));
}

TEST_CASE("momentum encoder decays geometrically") {
  ModelConfig mc;
  mc.high_level_dim = 1;
  mc.global_dim = 2;
  mc.chunks = 2;
  mc.width = 2;
  mc.mlp_hidden = 2;
  ModelParams model(mc);
  for (auto& x : model.flat()) x = 1.0;
  MomentumEncoder enc{ModelParams(mc), 0.999};
  for (auto& x : enc.params.flat()) x = 0.0;
  for (int n = 1; n <= 2000; ++n) {
    momentum_update(enc, model);
    if (n % 250 == 0) {
      const double expect = 1.0 - std::pow(0.999, n);
      for (double v : enc.params.flat()) CHECK(std::abs(v - expect) <= 1e-9 * expect);
    }
  }
  mc.width = 3;
  CHECK_THROWS(momentum_update(enc, ModelParams(mc)));
}

TEST_CASE("cosine similarity of a zero vector is zero") {
  const Vector z{0, 0}, a{1, 2};
  CHECK(cosine_similarity(z, a) == 0.0);
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
}
