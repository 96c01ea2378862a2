#include "mocorank/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mocorank {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error("unknown split '" + s + "'");
}

std::vector<Level> Dataset::labels() const {
  std::vector<Level> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

std::array<std::size_t, kNumLevels> Dataset::class_counts() const {
  std::array<std::size_t, kNumLevels> counts{};
  for (const auto& r : records) ++counts[code(r.label)];
  return counts;
}

std::size_t Dataset::speech_count() const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(),
      [](const SampleRecord& r) { return r.has_speech(); }));
}

void validate_record(const SampleRecord& r, int high_level_dim, int global_dim,
                     int speech_dim) {
  const auto& f = r.frames.values;
  if (f.rows == 0 || f.cols == 0) throw Error("frames: empty input");
  if (static_cast<int>(f.rows) != high_level_dim) {
    throw Error("frames: expected " + std::to_string(high_level_dim) +
                " channels, got " + std::to_string(f.rows));
  }
  if (!all_finite(f.data)) throw Error("frames: non-finite value");
  if (static_cast<int>(r.global_feature.size()) != global_dim) {
    throw Error("global_feature: expected length " +
                std::to_string(global_dim) + ", got " +
                std::to_string(r.global_feature.size()));
  }
  if (!all_finite(r.global_feature)) {
    throw Error("global_feature: non-finite value");
  }
  if (r.speech_embedding.has_value() != r.audio_meta.has_value()) {
    throw Error("modality fields must co-occur");
  }
  if (r.speech_embedding) {
    if (static_cast<int>(r.speech_embedding->size()) != speech_dim) {
      throw Error("speech_embedding: expected length " +
                  std::to_string(speech_dim) + ", got " +
                  std::to_string(r.speech_embedding->size()));
    }
    if (!all_finite(*r.speech_embedding)) {
      throw Error("speech_embedding: non-finite value");
    }
    const Vector& m = *r.audio_meta;
    if (m.size() != kAudioMetaDim) {
      throw Error("audio_meta: expected 7 values");
    }
    if (!all_finite(m)) throw Error("audio_meta: non-finite value");
    if (m[0] < 0) throw Error("audio_meta: speech length L must be >= 0");
    for (int i = 1; i <= 4; ++i) {
      if (m[i] < 0 || m[i] > 1) {
        throw Error("audio_meta: volume/pitch fractions must lie in [0,1]");
      }
    }
    if (m[5] < 0 || m[6] < 0) {
      throw Error("audio_meta: standard deviations must be >= 0");
    }
  }
}

void validate_dataset(const Dataset& ds) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    try {
      validate_record(r, ds.high_level_dim, ds.global_dim, ds.speech_dim);
    } catch (const Error& e) {
      throw Error("record " + std::to_string(i) + " ('" + r.id +
                  "'): " + e.what());
    }
    if (!ids.insert(r.id).second) throw Error("duplicate record id '" + r.id + "'");
  }
}

FrameSequence repeat_pad(const FrameSequence& frames, int min_frames,
                         bool strict) {
  const std::size_t f = frames.frames();
  if (f == 0 || frames.channels() == 0) throw Error("empty input");
  const auto target = static_cast<std::size_t>(std::max(min_frames, 0));
  std::size_t copies = 1;
  if (strict) {
    if (f <= target) copies = target / f + 1;
  } else if (f < target) {
    copies = (target + f - 1) / f;
  }
  if (copies == 1) return frames;

  FrameSequence out;
  out.frame_rate = frames.frame_rate;
  out.values = Matrix(frames.channels(), f * copies);
  for (std::size_t ch = 0; ch < frames.channels(); ++ch) {
    auto src = frames.values.row(ch);
    auto dst = out.values.row(ch);
    for (std::size_t c = 0; c < copies; ++c) {
      std::copy(src.begin(), src.end(), dst.begin() + c * f);
    }
  }
  return out;
}

ChunkedFeatures chunk_summarize(const FrameSequence& frames, int chunks) {
  if (chunks <= 0) throw Error("chunk count must be positive");
  const std::size_t f = frames.frames();
  const std::size_t d = frames.channels();
  const auto t_count = static_cast<std::size_t>(chunks);
  if (f == 0 || d == 0) throw Error("empty input");
  if (t_count > f) throw Error("too few frames");

  ChunkedFeatures out;
  out.values = Matrix(3 * d, t_count);
  const std::size_t base = f / t_count;
  const std::size_t extra = f % t_count;
  std::size_t begin = 0;
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::size_t len = base + (t < extra ? 1 : 0);
    for (std::size_t ch = 0; ch < d; ++ch) {
      auto row = frames.values.row(ch).subspan(begin, len);
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      double mean = 0.0;
      for (double x : row) mean += x;
      mean /= static_cast<double>(len);
      double ss = 0.0;
      for (double x : row) ss += (x - mean) * (x - mean);
      out.values(ch, t) = *lo;
      out.values(d + ch, t) = *hi;
      out.values(2 * d + ch, t) = ss / static_cast<double>(len);
    }
    begin += len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines I/O

namespace {

Vector number_array(const json& j, const char* field) {
  if (!j.is_array()) throw Error(std::string("field '") + field + "': expected array");
  Vector out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw Error(std::string("field '") + field + "': expected numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

const json& require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw Error(std::string("missing field '") + field + "'");
  }
  return *it;
}

SampleRecord record_from_json(const json& obj, const Dataset& header) {
  if (!obj.is_object()) throw Error("expected a JSON object");
  SampleRecord r;
  const json& id = require(obj, "id");
  if (!id.is_string()) throw Error("field 'id': expected string");
  r.id = id.get<std::string>();

  const json& frames = require(obj, "frames");
  if (!frames.is_array() || frames.empty()) {
    throw Error("field 'frames': expected non-empty array of frames");
  }
  const std::size_t f = frames.size();
  const auto d = static_cast<std::size_t>(header.high_level_dim);
  r.frames.values = Matrix(d, f);
  for (std::size_t t = 0; t < f; ++t) {
    Vector frame = number_array(frames[t], "frames");
    if (frame.size() != d) {
      throw Error("field 'frames': frame " + std::to_string(t) + " has " +
                  std::to_string(frame.size()) + " channels, header says D=" +
                  std::to_string(d));
    }
    for (std::size_t ch = 0; ch < d; ++ch) r.frames.values(ch, t) = frame[ch];
  }

  r.global_feature = number_array(require(obj, "global_feature"), "global_feature");
  if (static_cast<int>(r.global_feature.size()) != header.global_dim) {
    throw Error("field 'global_feature': length " +
                std::to_string(r.global_feature.size()) + ", header says d=" +
                std::to_string(header.global_dim));
  }

  if (auto it = obj.find("speech_embedding"); it != obj.end() && !it->is_null()) {
    r.speech_embedding = number_array(*it, "speech_embedding");
  }
  if (auto it = obj.find("audio_meta"); it != obj.end() && !it->is_null()) {
    r.audio_meta = number_array(*it, "audio_meta");
  }

  const json& label = require(obj, "label");
  if (!label.is_number_integer()) throw Error("field 'label': expected integer 0-3");
  const auto lc = label.get<long long>();
  if (lc < 0 || lc >= kNumLevels) throw Error("field 'label': expected integer 0-3");
  r.label = static_cast<Level>(lc);

  if (auto it = obj.find("latent"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) throw Error("field 'latent': expected number");
    r.latent = it->get<double>();
  }
  validate_record(r, header.high_level_dim, header.global_dim, header.speech_dim);
  return r;
}

json record_to_json(const SampleRecord& r) {
  json obj;
  obj["id"] = r.id;
  json frames = json::array();
  for (std::size_t t = 0; t < r.frames.frames(); ++t) {
    json frame = json::array();
    for (std::size_t ch = 0; ch < r.frames.channels(); ++ch) {
      frame.push_back(r.frames.values(ch, t));
    }
    frames.push_back(std::move(frame));
  }
  obj["frames"] = std::move(frames);
  obj["global_feature"] = r.global_feature;
  if (r.speech_embedding) obj["speech_embedding"] = *r.speech_embedding;
  if (r.audio_meta) obj["audio_meta"] = *r.audio_meta;
  obj["label"] = code(r.label);
  if (r.latent) obj["latent"] = *r.latent;
  return obj;
}

}  // namespace

Dataset parse_records(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Dataset ds;
  bool have_header = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(source + ":" + std::to_string(line_no) +
                  ": malformed JSON: " + e.what());
    }
    try {
      if (!have_header) {
        const json& schema = require(obj, "schema");
        if (!schema.is_string() || schema.get<std::string>() != kDatasetSchema) {
          throw Error(std::string("field 'schema': expected \"") +
                      kDatasetSchema + "\"");
        }
        const json& dd = require(obj, "D");
        const json& gd = require(obj, "d");
        if (!dd.is_number_integer() || dd.get<int>() < 1) {
          throw Error("field 'D': expected positive integer");
        }
        if (!gd.is_number_integer() || gd.get<int>() < 1) {
          throw Error("field 'd': expected positive integer");
        }
        ds.high_level_dim = dd.get<int>();
        ds.global_dim = gd.get<int>();
        if (auto it = obj.find("speech_dim"); it != obj.end()) {
          if (!it->is_number_integer() || it->get<int>() < 1) {
            throw Error("field 'speech_dim': expected positive integer");
          }
          ds.speech_dim = it->get<int>();
        }
        if (auto it = obj.find("split"); it != obj.end()) {
          ds.split = parse_split(it->get<std::string>());
        }
        have_header = true;
        continue;
      }
      SampleRecord r = record_from_json(obj, ds);
      if (!ids.insert(r.id).second) {
        throw Error("field 'id': duplicate id '" + r.id + "'");
      }
      ds.records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(source + ": missing schema header line");
  return ds;
}

Dataset load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_records(buf.str(), path);
}

std::string serialize_records(const Dataset& ds) {
  std::string out;
  json header;
  header["schema"] = kDatasetSchema;
  header["D"] = ds.high_level_dim;
  header["d"] = ds.global_dim;
  header["speech_dim"] = ds.speech_dim;
  header["split"] = split_name(ds.split);
  out += header.dump();
  out += '\n';
  for (const auto& r : ds.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_records(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file '" + path + "'");
  out << serialize_records(ds);
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Synthetic data

std::array<std::size_t, kNumLevels> proportional_counts(
    int n, const std::array<double, kNumLevels>& proportions) {
  double total = 0.0;
  for (double p : proportions) {
    if (p < 0 || !std::isfinite(p)) throw Error("proportions must be non-negative");
    total += p;
  }
  if (total <= 0) throw Error("proportions must sum to a positive value");
  if (n < 0) throw Error("record count must be non-negative");

  std::array<std::size_t, kNumLevels> counts{};
  std::array<double, kNumLevels> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < kNumLevels; ++c) {
    const double exact = n * proportions[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += counts[c];
  }
  std::array<int, kNumLevels> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < static_cast<std::size_t>(n); ++k) {
    ++counts[order[k % kNumLevels]];
    ++assigned;
  }
  return counts;
}

Level latent_band(double u) {
  if (u < -0.5) return Level::HD;
  if (u < 0.0) return Level::DE;
  if (u < 0.5) return Level::EG;
  return Level::HE;
}

Dataset synth_dataset(const SynthOptions& opt) {
  const bool all_positive = std::all_of(opt.proportions.begin(),
                                        opt.proportions.end(),
                                        [](double p) { return p > 0; });
  if (all_positive && opt.n < kNumLevels) {
    throw Error("need at least one record per class when all proportions positive");
  }
  if (opt.high_level_dim < 1 || opt.global_dim < 1 || opt.frames < 1) {
    throw Error("synthetic dimensions must be positive");
  }
  if (opt.noise < 0) throw Error("noise must be non-negative");
  const auto counts = proportional_counts(opt.n, opt.proportions);

  const auto d_hl = static_cast<std::size_t>(opt.high_level_dim);
  const auto d_g = static_cast<std::size_t>(opt.global_dim);
  const auto d_sp = static_cast<std::size_t>(opt.speech_dim);

  // Fixed linear maps from the latent to each feature family.
  Rng maps(mix_seed(opt.seed, 1));
  Vector hl_gain(d_hl), hl_offset(d_hl), g_gain(d_g), g_offset(d_g);
  for (std::size_t i = 0; i < d_hl; ++i) {
    hl_gain[i] = maps.normal();
    hl_offset[i] = 0.5 * maps.normal();
  }
  for (std::size_t j = 0; j < d_g; ++j) {
    g_gain[j] = maps.normal();
    g_offset[j] = 0.5 * maps.normal();
  }
  Vector sp_gain(d_sp);
  for (auto& g : sp_gain) g = maps.normal();

  Rng rng(mix_seed(opt.seed, 2));
  std::vector<double> latents;
  latents.reserve(static_cast<std::size_t>(opt.n));
  constexpr std::array<double, kNumLevels + 1> edges{-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int c = 0; c < kNumLevels; ++c) {
    for (std::size_t k = 0; k < counts[c]; ++k) {
      double u = rng.uniform(edges[c], edges[c + 1]);
      latents.push_back(u);
    }
  }
  rng.shuffle(latents);

  Dataset ds;
  ds.high_level_dim = opt.high_level_dim;
  ds.global_dim = opt.global_dim;
  ds.speech_dim = opt.speech_dim;
  ds.records.reserve(latents.size());
  const auto n_frames = static_cast<std::size_t>(opt.frames);
  for (std::size_t k = 0; k < latents.size(); ++k) {
    const double u = latents[k];
    SampleRecord r;
    r.id = "syn-" + std::to_string(k);
    r.label = latent_band(u);
    r.latent = u;
    r.frames.values = Matrix(d_hl, n_frames);
    for (std::size_t ch = 0; ch < d_hl; ++ch) {
      for (std::size_t t = 0; t < n_frames; ++t) {
        r.frames.values(ch, t) =
            hl_gain[ch] * u + hl_offset[ch] + opt.noise * rng.normal();
      }
    }
    r.global_feature.resize(d_g);
    for (std::size_t j = 0; j < d_g; ++j) {
      r.global_feature[j] = g_gain[j] * u + g_offset[j] + opt.noise * rng.normal();
    }
    if (opt.speech_fraction > 0 && rng.uniform() < opt.speech_fraction) {
      Vector sp(d_sp);
      for (std::size_t j = 0; j < d_sp; ++j) {
        sp[j] = sp_gain[j] * u + opt.noise * rng.normal();
      }
      const auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
      Vector meta(kAudioMetaDim);
      meta[0] = std::round(std::max(0.0, 8.0 + 6.0 * u + 2.0 * rng.normal()));
      meta[1] = clamp01(0.5 + 0.3 * u + 0.1 * opt.noise * rng.normal());
      meta[2] = clamp01(0.5 - 0.3 * u + 0.1 * opt.noise * rng.normal());
      meta[3] = clamp01(0.5 + 0.2 * u + 0.1 * opt.noise * rng.normal());
      meta[4] = clamp01(0.5 - 0.2 * u + 0.1 * opt.noise * rng.normal());
      meta[5] = std::abs(0.3 + 0.1 * u + 0.05 * opt.noise * rng.normal());
      meta[6] = std::abs(0.3 + 0.1 * u + 0.05 * opt.noise * rng.normal());
      r.speech_embedding = std::move(sp);
      r.audio_meta = std::move(meta);
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splits and samplers

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.split = ds.split;
  out.high_level_dim = ds.high_level_dim;
  out.global_dim = ds.global_dim;
  out.speech_dim = ds.speech_dim;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(ds.records.at(i));
  return out;
}

Dataset speech_subset(const Dataset& ds) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].has_speech()) idx.push_back(i);
  }
  return subset(ds, idx);
}

SplitDatasets stratified_split(const Dataset& ds, double train_fraction,
                               double val_fraction, std::uint64_t seed) {
  if (train_fraction < 0 || val_fraction < 0 ||
      train_fraction + val_fraction > 1.0 + 1e-12) {
    throw Error("invalid split fractions");
  }
  Rng rng(mix_seed(seed, 3));
  std::vector<std::size_t> train, val, test;
  for (int c = 0; c < kNumLevels; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (code(ds.records[i].label) == c) members.push_back(i);
    }
    rng.shuffle(members);
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
    const auto n_val = std::min(
        members.size() - n_train,
        static_cast<std::size_t>(std::llround(n * val_fraction)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k < n_train) {
        train.push_back(members[k]);
      } else if (k < n_train + n_val) {
        val.push_back(members[k]);
      } else {
        test.push_back(members[k]);
      }
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());
  SplitDatasets out{subset(ds, train), subset(ds, val), subset(ds, test)};
  out.train.split = Split::train;
  out.val.split = Split::val;
  out.test.split = Split::test;
  return out;
}

ClassBalancedSampler::ClassBalancedSampler(const std::vector<Level>& labels,
                                           int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(mix_seed(seed, 4)) {
  if (batch_size < 1) throw Error("batch size must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class_[code(labels[i])].push_back(i);
  }
  for (const auto& members : by_class_) {
    if (members.empty()) throw Error("cannot balance absent class");
  }
}

std::vector<std::size_t> ClassBalancedSampler::next_batch() {
  std::vector<std::size_t> batch;
  batch.reserve(static_cast<std::size_t>(batch_size_));
  for (int k = 0; k < batch_size_; ++k) {
    const auto& members = by_class_[rng_.index(kNumLevels)];
    batch.push_back(members[rng_.index(members.size())]);
  }
  return batch;
}

}  // namespace mocorank
