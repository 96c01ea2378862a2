#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "mocorank/features.hpp"

using namespace mocorank;

namespace {

FrameSequence random_frames(std::size_t d, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  FrameSequence s;
  s.values = Matrix(d, f);
  for (auto& x : s.values.data) x = rng.uniform(-3.0, 3.0);
  return s;
}

std::string header(int D, int d) {
  return R"({"schema":"cmose-features/1","D":)" + std::to_string(D) + R"(,"d":)" +
         std::to_string(d) + "}\n";
}

}  // namespace

TEST_CASE("repeat_pad tiles whole copies") {
  FrameSequence one;
  one.values = Matrix(1, 1, 5.0);
  const auto p = repeat_pad(one);
  CHECK(p.frames() == 250);
  for (double v : p.values.data) CHECK(v == 5.0);

  const auto s = random_frames(3, 100, 1);
  const auto q = repeat_pad(s);
  CHECK(q.frames() == 300);
  for (std::size_t copy = 0; copy < 3; ++copy) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < 100; ++t) CHECK(q.values(c, copy * 100 + t) == s.values(c, t));
    }
  }
  CHECK(repeat_pad(random_frames(2, 300, 2)).frames() == 300);
}

TEST_CASE("repeat_pad at exactly 250 frames") {
  const auto s = random_frames(2, 250, 3);
  CHECK(repeat_pad(s).frames() == 250);
  CHECK(repeat_pad(s, 250, true).frames() == 500);
  CHECK(repeat_pad(random_frames(2, 100, 3), 250, true).frames() == 300);
}

TEST_CASE("chunk_summarize matches a two-pass oracle") {
  for (std::size_t f : {10u, 23u, 37u, 250u}) {
    const auto s = random_frames(4, f, f);
    const auto ch = chunk_summarize(s, 10);
    REQUIRE(ch.values.rows == 12);
    REQUIRE(ch.values.cols == 10);
    std::size_t begin = 0;
    for (std::size_t t = 0; t < 10; ++t) {
      const std::size_t len = f / 10 + (t < f % 10 ? 1 : 0);
      for (std::size_t c = 0; c < 4; ++c) {
        double lo = 1e300, hi = -1e300, mean = 0.0;
        for (std::size_t k = begin; k < begin + len; ++k) {
          lo = std::min(lo, s.values(c, k));
          hi = std::max(hi, s.values(c, k));
          mean += s.values(c, k);
        }
        mean /= static_cast<double>(len);
        double var = 0.0;
        for (std::size_t k = begin; k < begin + len; ++k) {
          var += (s.values(c, k) - mean) * (s.values(c, k) - mean);
        }
        var /= static_cast<double>(len);
        CHECK(ch.min(c, t) == lo);
        CHECK(ch.max(c, t) == hi);
        CHECK(std::abs(ch.var(c, t) - var) <= 1e-12);
        for (std::size_t k = begin; k < begin + len; ++k) {
          CHECK(ch.min(c, t) <= s.values(c, k));
          CHECK(s.values(c, k) <= ch.max(c, t));
        }
      }
      begin += len;
    }
    CHECK(begin == f);
  }
}

TEST_CASE("chunk_summarize edge cases") {
  FrameSequence c;
  c.values = Matrix(2, 20, 1.5);
  const auto ch = chunk_summarize(c, 10);
  for (std::size_t t = 0; t < 10; ++t) {
    CHECK(ch.min(0, t) == 1.5);
    CHECK(ch.max(1, t) == 1.5);
    CHECK(ch.var(0, t) == 0.0);
  }
  CHECK_THROWS_WITH(chunk_summarize(random_frames(2, 5, 1), 10), "too few frames");
  CHECK_THROWS_WITH(chunk_summarize(FrameSequence{}, 10), "empty input");
}

TEST_CASE("parse_records reads and round-trips") {
  const std::string text = header(2, 3) +
                           R"({"id":"a","frames":[[1,2],[3,4]],"global_feature":[0,1,2],"label":0})"
                           "\n"
                           R"({"id":"b","frames":[[5,6]],"global_feature":[1,1,1],"label":3,"latent":0.7})"
                           "\n";
  const Dataset ds = parse_records(text, "mem");
  REQUIRE(ds.size() == 2);
  CHECK(ds.high_level_dim == 2);
  CHECK(ds.records[0].frames.values(1, 0) == 2.0);  // frame-major input, channel-major storage
  CHECK(ds.records[0].frames.values(0, 1) == 3.0);
  CHECK(ds.records[1].label == Level::HE);
  CHECK(ds.records[1].latent.value() == 0.7);
  const Dataset again = parse_records(serialize_records(ds), "mem2");
  CHECK(serialize_records(again) == serialize_records(ds));
}

TEST_CASE("parse_records errors name the line and field") {
  const std::string bad_label =
      header(1, 1) + R"({"id":"a","frames":[[1]],"global_feature":[0],"label":4})" "\n";
  CHECK_THROWS_WITH(parse_records(bad_label, "f"), doctest::Contains("f:2:"));
  CHECK_THROWS_WITH(parse_records(bad_label, "f"), doctest::Contains("label"));

  const std::string missing = header(1, 1) + R"({"id":"a","frames":[[1]],"label":1})" "\n";
  CHECK_THROWS_WITH(parse_records(missing, "f"), doctest::Contains("global_feature"));

  const std::string lone_speech =
      header(1, 1) +
      R"({"id":"a","frames":[[1]],"global_feature":[0],"label":1,"speech_embedding":[0]})" "\n";
  CHECK_THROWS_WITH(parse_records(lone_speech, "f"), doctest::Contains("modality fields must co-occur"));

  CHECK_THROWS(parse_records(R"({"id":"a"})" "\n", "f"));
}

TEST_CASE("proportional counts follow the class proportions") {
  const auto c = proportional_counts(12193, {346, 2208, 8469, 1170});
  CHECK(c == std::array<std::size_t, 4>{346, 2208, 8469, 1170});
  const auto s = proportional_counts(3000, {346, 2208, 8469, 1170});
  CHECK(s[0] + s[1] + s[2] + s[3] == 3000);
  CHECK(s[0] == 85);  // 3000 * 346 / 12193 = 85.13
}

TEST_CASE("synth_dataset is deterministic and labelled by latent band") {
  SynthOptions o;
  o.n = 200;
  o.frames = 30;
  o.seed = 9;
  const Dataset a = synth_dataset(o);
  const Dataset b = synth_dataset(o);
  CHECK(serialize_records(a) == serialize_records(b));
  for (const auto& r : a.records) {
    REQUIRE(r.latent.has_value());
    CHECK(latent_band(*r.latent) == r.label);
  }
  o.seed = 10;
  CHECK(serialize_records(synth_dataset(o)) != serialize_records(a));
  o.n = 3;
  CHECK_THROWS_WITH(synth_dataset(o), "need at least one record per class when all proportions positive");
}

TEST_CASE("noiseless synthetic globals are linearly separable") {
  SynthOptions o;
  o.n = 400;
  o.frames = 10;
  o.noise = 0.0;
  o.seed = 4;
  const Dataset ds = synth_dataset(o);
  // any single global coordinate is an affine map of the latent, so sorting
  // by it must sort the labels
  std::vector<std::pair<double, int>> proj;
  for (const auto& r : ds.records) proj.emplace_back(r.global_feature[0], code(r.label));
  std::sort(proj.begin(), proj.end());
  bool up = true, down = true;
  for (std::size_t i = 1; i < proj.size(); ++i) {
    up = up && proj[i].second >= proj[i - 1].second;
    down = down && proj[i].second <= proj[i - 1].second;
  }
  CHECK((up || down));
}

TEST_CASE("stratified split keeps every record once") {
  SynthOptions o;
  o.n = 500;
  o.frames = 10;
  const Dataset ds = synth_dataset(o);
  const auto sp = stratified_split(ds, 0.7, 0.1, 3);
  CHECK(sp.train.size() + sp.val.size() + sp.test.size() == 500);
  std::set<std::string> ids;
  for (const auto* part : {&sp.train, &sp.val, &sp.test}) {
    for (const auto& r : part->records) CHECK(ids.insert(r.id).second);
  }
  const auto all = ds.class_counts();
  const auto tr = sp.train.class_counts();
  for (int c = 0; c < 4; ++c) CHECK(std::abs(double(tr[c]) - 0.7 * double(all[c])) <= 1.0);
}

TEST_CASE("class balanced sampler") {
  std::vector<Level> labels;
  for (int i = 0; i < 98; ++i) labels.push_back(Level::EG);
  labels.push_back(Level::HD);
  labels.push_back(Level::DE);
  CHECK_THROWS_WITH(ClassBalancedSampler(labels, 4, 1), "cannot balance absent class");
  labels.push_back(Level::HE);

  ClassBalancedSampler a(labels, 4, 5), b(labels, 4, 5);
  CHECK(a.next_batch() == b.next_batch());

  std::array<double, 4> freq{};
  const int batches = 5000;
  for (int i = 0; i < batches; ++i) {
    for (auto idx : a.next_batch()) freq[code(labels[idx])] += 1.0;
  }
  for (double f : freq) CHECK(std::abs(f / (4.0 * batches) - 0.25) < 0.015);
}
