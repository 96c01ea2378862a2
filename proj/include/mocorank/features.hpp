#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mocorank/core.hpp"

namespace mocorank {

inline constexpr int kAudioMetaDim = 7;
inline constexpr int kDefaultSpeechDim = 768;
inline constexpr const char* kDatasetSchema = "cmose-features/1";

// Per-frame high-level features, stored channels x frames.
struct FrameSequence {
  Matrix values;
  double frame_rate = 25.0;

  std::size_t channels() const { return values.rows; }
  std::size_t frames() const { return values.cols; }
};

// Per-chunk summary statistics, 3D x T: rows [0, D) hold chunk minima,
// [D, 2D) maxima and [2D, 3D) population variances.
struct ChunkedFeatures {
  Matrix values;

  std::size_t channels() const { return values.rows / 3; }
  std::size_t chunks() const { return values.cols; }
  double min(std::size_t ch, std::size_t t) const { return values(ch, t); }
  double max(std::size_t ch, std::size_t t) const {
    return values(channels() + ch, t);
  }
  double var(std::size_t ch, std::size_t t) const {
    return values(2 * channels() + ch, t);
  }
};

struct SampleRecord {
  std::string id;
  FrameSequence frames;
  Vector global_feature;
  std::optional<Vector> speech_embedding;
  // [L, Hv, Lv, Hp, Lp, std_v, std_p]
  std::optional<Vector> audio_meta;
  Level label = Level::EG;
  // Latent engagement of synthetic records; absent for real data.
  std::optional<double> latent;

  bool has_speech() const { return speech_embedding.has_value(); }
};

enum class Split { train, val, test };
const char* split_name(Split s);
Split parse_split(const std::string& s);

struct Dataset {
  std::vector<SampleRecord> records;
  Split split = Split::train;
  int high_level_dim = 17;  // D
  int global_dim = 64;      // d
  int speech_dim = kDefaultSpeechDim;

  std::size_t size() const { return records.size(); }
  std::vector<Level> labels() const;
  std::array<std::size_t, kNumLevels> class_counts() const;
  std::size_t speech_count() const;
};

// Throws Error describing the first violated record invariant.
void validate_record(const SampleRecord& r, int high_level_dim, int global_dim,
                     int speech_dim);
void validate_dataset(const Dataset& ds);

// Tiles whole copies of the sequence until it reaches min_frames. With
// strict set, a sequence of exactly min_frames is still extended so the
// result holds more than min_frames frames.
FrameSequence repeat_pad(const FrameSequence& frames, int min_frames = 250,
                         bool strict = false);

// Splits frames into `chunks` contiguous runs (the first F mod T runs take one
// extra frame) and emits per-channel min, max and population variance.
ChunkedFeatures chunk_summarize(const FrameSequence& frames, int chunks);

// JSON-lines ingestion/persistence. Line 1 is the schema header.
Dataset load_records(const std::string& path);
void save_records(const Dataset& ds, const std::string& path);
Dataset parse_records(const std::string& text, const std::string& source);
std::string serialize_records(const Dataset& ds);

struct SynthOptions {
  int n = 3000;
  int high_level_dim = 17;
  int global_dim = 64;
  int frames = 100;
  std::array<double, kNumLevels> proportions{346, 2208, 8469, 1170};
  double noise = 0.6;
  std::uint64_t seed = 0;
  // Fraction of records that carry speech fields.
  double speech_fraction = 0.0;
  int speech_dim = kDefaultSpeechDim;
};

// Largest-remainder rounding of proportions to counts summing to n.
std::array<std::size_t, kNumLevels> proportional_counts(
    int n, const std::array<double, kNumLevels>& proportions);

// Latent-band generator of imbalanced ordinal data. Deterministic in seed.
Dataset synth_dataset(const SynthOptions& opt);

// Band of a latent engagement value in [-1, 1].
Level latent_band(double u);

// Per-class shuffled split with the given train/val fractions; the
// remainder goes to test.
struct SplitDatasets {
  Dataset train;
  Dataset val;
  Dataset test;
};
SplitDatasets stratified_split(const Dataset& ds, double train_fraction,
                               double val_fraction, std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);
Dataset speech_subset(const Dataset& ds);

// Draws each batch position by picking a class uniformly, then an index of
// that class uniformly (with replacement).
class ClassBalancedSampler {
 public:
  ClassBalancedSampler(const std::vector<Level>& labels, int batch_size,
                       std::uint64_t seed);

  std::vector<std::size_t> next_batch();
  int batch_size() const { return batch_size_; }

  std::string state() const { return rng_.serialize(); }
  void restore(const std::string& s) { rng_.deserialize(s); }

 private:
  std::array<std::vector<std::size_t>, kNumLevels> by_class_;
  int batch_size_;
  Rng rng_;
};

}  // namespace mocorank
