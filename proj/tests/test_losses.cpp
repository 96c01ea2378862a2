#include <cmath>

#include "doctest.h"
#include "mocorank/losses.hpp"

using namespace mocorank;

namespace {

std::vector<Vector> random_logits(Rng& rng, std::size_t n) {
  std::vector<Vector> out(n, Vector(4));
  for (auto& row : out) {
    for (auto& x : row) x = 2.0 * rng.normal();
  }
  return out;
}

std::vector<Level> random_labels(Rng& rng, std::size_t n) {
  std::vector<Level> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<Level>(rng.index(4)));
  return out;
}

template <typename F>
double logit_fd_error(std::vector<Vector> logits, const std::vector<Vector>& analytic, F loss) {
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      const double o = logits[i][k];
      logits[i][k] = o + h;
      const double up = loss(logits);
      logits[i][k] = o - h;
      const double dn = loss(logits);
      logits[i][k] = o;
      worst = std::max(worst, std::abs((up - dn) / (2 * h) - analytic[i][k]));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("mse targets are band midpoints") {
  CHECK(mse_target(Level::HD) == -0.75);
  CHECK(mse_target(Level::DE) == -0.25);
  CHECK(mse_target(Level::EG) == 0.25);
  CHECK(mse_target(Level::HE) == 0.75);
  const std::vector<double> s{-0.75, 0.5};
  const std::vector<Level> l{Level::HD, Level::EG};
  const auto r = mse_loss(s, l);
  CHECK(r.loss == doctest::Approx(0.0625 / 2));
  CHECK(r.d_scores[0] == 0.0);
  CHECK(r.d_scores[1] == doctest::Approx(0.25));
}

TEST_CASE("cross-entropy gradient is softmax minus one-hot") {
  Rng rng(1);
  const auto logits = random_logits(rng, 6);
  const auto labels = random_labels(rng, 6);
  const auto r = ce_loss(logits, labels);
  double expect = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    double z = 0.0;
    for (double v : logits[i]) z += std::exp(v);
    expect -= std::log(std::exp(logits[i][code(labels[i])]) / z);
    for (std::size_t k = 0; k < 4; ++k) {
      const double p = std::exp(logits[i][k]) / z;
      const double g = (p - (k == std::size_t(code(labels[i])) ? 1.0 : 0.0)) / 6.0;
      CHECK(r.d_logits[i][k] == doctest::Approx(g).epsilon(1e-12));
    }
  }
  CHECK(r.loss == doctest::Approx(expect / 6.0).epsilon(1e-12));
  CHECK(logit_fd_error(logits, r.d_logits, [&](const std::vector<Vector>& x) {
          return ce_loss(x, labels).loss;
        }) < 1e-8);
}

TEST_CASE("class-balanced focal loss") {
  Rng rng(2);
  const std::array<std::size_t, 4> counts{10, 60, 300, 40};
  const FocalOptions opt{0.99, 2.0};
  const auto logits = random_logits(rng, 5);
  const auto labels = random_labels(rng, 5);
  const auto r = cb_focal_loss(logits, labels, counts, opt);
  double expect = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const int y = code(labels[i]);
    double z = 0.0;
    for (double v : logits[i]) z += std::exp(v);
    const double p = std::exp(logits[i][y]) / z;
    const double w = (1 - opt.beta) / (1 - std::pow(opt.beta, double(counts[y])));
    expect += w * (1 - p) * (1 - p) * -std::log(p);
  }
  CHECK(r.loss == doctest::Approx(expect / 5.0).epsilon(1e-12));
  CHECK(logit_fd_error(logits, r.d_logits, [&](const std::vector<Vector>& x) {
          return cb_focal_loss(x, labels, counts, opt).loss;
        }) < 1e-8);

  // gamma = 0 is class-weighted cross-entropy
  const auto plain = cb_focal_loss(logits, labels, counts, FocalOptions{opt.beta, 0.0});
  double weighted = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const int y = code(labels[i]);
    const double w = (1 - opt.beta) / (1 - std::pow(opt.beta, double(counts[y])));
    weighted += w * ce_loss({logits[i]}, std::vector<Level>{labels[i]}).loss;
  }
  CHECK(plain.loss == doctest::Approx(weighted / 5.0).epsilon(1e-12));
  // rarer classes get larger weights
  const std::vector<Vector> same{Vector{0, 0, 0, 0}};
  CHECK(cb_focal_loss(same, std::vector<Level>{Level::HD}, counts).loss >
        cb_focal_loss(same, std::vector<Level>{Level::EG}, counts).loss);
}

TEST_CASE("center loss value, gradient and center step") {
  ClassCenters c = ClassCenters::zeros(2, 0.5);
  c.centers[0] = {1, 1};
  c.centers[2] = {0, -1};
  const std::vector<Vector> e{{2, 1}, {0, 1}, {3, 3}};
  const std::vector<Level> l{Level::HD, Level::EG, Level::HD};
  const auto r = center_loss(e, l, c, 0.2);
  // 0.2 * mean(0.5 * |e - c|^2) = 0.2 * (0.5 + 2 + 4) / 3
  CHECK(r.loss == doctest::Approx(0.2 * 6.5 / 3.0));
  CHECK(r.d_embeddings[0][0] == doctest::Approx(0.2 / 3.0));
  CHECK(r.d_embeddings[1][1] == doctest::Approx(0.2 * 2.0 / 3.0));
  // HD: sum (e - c) = (1,0)+(2,2) = (3,2); n=2; step 0.5 * (3,2) / 3
  CHECK(r.updated.centers[0][0] == doctest::Approx(1.5));
  CHECK(r.updated.centers[0][1] == doctest::Approx(1.0 + 1.0 / 3.0));
  // EG: (0,2) / 2 * 0.5
  CHECK(r.updated.centers[2][1] == doctest::Approx(-0.5));
  // absent classes keep their centers
  CHECK(r.updated.centers[1] == c.centers[1]);
  CHECK(r.updated.centers[3] == c.centers[3]);
}
