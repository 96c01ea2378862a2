#include <cmath>

#include "doctest.h"
#include "mocorank/metrics.hpp"

using namespace mocorank;

namespace {

// Shrout-Fleiss ICC(2,1) from explicit two-way ANOVA sums of squares.
double oracle_icc(const std::vector<std::vector<double>>& x) {
  const double n = double(x.size()), k = double(x[0].size());
  double grand = 0.0;
  for (const auto& r : x) {
    for (double v : r) grand += v;
  }
  grand /= n * k;
  double ssr = 0, ssc = 0, sst = 0;
  for (const auto& r : x) {
    double m = 0;
    for (double v : r) m += v;
    m /= k;
    ssr += k * (m - grand) * (m - grand);
  }
  for (std::size_t j = 0; j < x[0].size(); ++j) {
    double m = 0;
    for (const auto& r : x) m += r[j];
    m /= n;
    ssc += n * (m - grand) * (m - grand);
  }
  for (const auto& r : x) {
    for (double v : r) sst += (v - grand) * (v - grand);
  }
  const double sse = sst - ssr - ssc;
  const double msr = ssr / (n - 1), msc = ssc / (k - 1), mse = sse / ((n - 1) * (k - 1));
  return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n);
}

}  // namespace

TEST_CASE("accuracy and average accuracy on a hand-built matrix") {
  Confusion c{};
  c[0] = {2, 1, 0, 0};
  c[1] = {0, 3, 1, 0};
  c[2] = {0, 1, 8, 1};
  c[3] = {0, 0, 2, 1};
  const auto m = accuracy_metrics(c);
  CHECK(m.total() == 20);
  CHECK(m.acc == 14.0 / 20.0);
  CHECK(m.recall[0] == 2.0 / 3.0);
  CHECK(m.recall[2] == 0.8);
  CHECK(m.avg_acc == doctest::Approx((2.0 / 3.0 + 0.75 + 0.8 + 1.0 / 3.0) / 4.0).epsilon(1e-15));
}

TEST_CASE("average accuracy skips absent classes") {
  const std::vector<int> labels{0, 0, 2, 2, 2};
  const std::vector<int> preds{0, 1, 2, 2, 3};
  const auto m = accuracy_metrics(confusion_matrix(preds, labels));
  CHECK(m.present == std::array<bool, 4>{true, false, true, false});
  CHECK(m.avg_acc == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));
  CHECK(m.acc == 0.6);
  CHECK_THROWS(accuracy_metrics(Confusion{}));
  CHECK_THROWS(confusion_matrix(std::vector<int>{0}, std::vector<int>{4}));
}

TEST_CASE("confusion rows are truth") {
  const std::vector<Level> labels{Level::HD, Level::HE};
  const std::vector<Level> preds{Level::DE, Level::HE};
  const auto c = confusion_matrix(preds, labels);
  CHECK(c[0][1] == 1);
  CHECK(c[3][3] == 1);
}

TEST_CASE("metrics JSON round trip and recall CSV") {
  Confusion c{};
  c[0] = {1, 0, 0, 0};
  c[2] = {0, 1, 5, 0};
  const auto m = accuracy_metrics(c);
  CHECK(metrics_from_json(metrics_json(m)) == m);
  const auto csv = recall_csv(m);
  CHECK(csv.find("class,recall,support") == 0);
  CHECK(csv.find("EG,0.83333333333333337,6") != std::string::npos);
}

TEST_CASE("ICC(2,1) matches the ANOVA oracle") {
  CHECK(icc_2_1(RatingMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}})) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 2 + rng.index(20), k = 2 + rng.index(5);
    std::vector<std::vector<double>> rows(n, std::vector<double>(k));
    for (auto& r : rows) {
      const double subject = rng.normal();
      for (auto& v : r) v = subject + 0.5 * rng.normal();
    }
    const double want = oracle_icc(rows);
    CHECK(std::abs(icc_2_1(RatingMatrix::from_rows(rows)) - want) <= 1e-6);
    // invariant under a global shift
    for (auto& r : rows) {
      for (auto& v : r) v += 3.0;
    }
    CHECK(std::abs(icc_2_1(RatingMatrix::from_rows(rows)) - want) <= 1e-6);
    CHECK(want <= 1.0);
  }
}

TEST_CASE("ICC(2,1) edge cases") {
  CHECK(icc_2_1(RatingMatrix::from_rows({{1, 1, 1}, {2, 2, 2}, {4, 4, 4}})) == doctest::Approx(1.0));
  CHECK(icc_2_1(RatingMatrix::from_rows({{3, 3}, {3, 3}})) == 1.0);
  CHECK(icc_2_1(RatingMatrix::from_rows({{2, 2, 2}, {5, 5, 5}, {1, 1, 1}})) == 1.0);
  CHECK_THROWS(icc_2_1(RatingMatrix::from_rows({{1, 2}})));
  const auto parsed = parse_ratings("# subjects x raters\n1, 2\n3 4\n\n5\t6\n");
  CHECK(parsed.subjects == 3);
  CHECK(icc_2_1(parsed) == doctest::Approx(8.0 / 9.0));
  CHECK_THROWS(parse_ratings("1 2\n3\n"));
}
