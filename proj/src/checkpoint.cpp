#include "mocorank/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mocorank/config.hpp"

namespace mocorank {
namespace {

constexpr char kMagic[8] = {'M', 'R', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 8;

std::uint64_t fnv1a(const char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void boolean(bool v) { u8(v ? 1 : 0); }
  void str(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  void vec(const Vector& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void tag(const char (&t)[5]) { out_.append(t, 4); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, std::size_t base) : s_(s), base_(base) {}

  void need(std::size_t n, const char* what) {
    if (pos_ + n > s_.size()) {
      throw Error("checkpoint truncated at offset " + std::to_string(base_ + pos_) +
                  " while reading " + what);
    }
  }
  std::uint8_t u8(const char* what = "byte") {
    need(1, what);
    return static_cast<std::uint8_t>(s_[pos_++]);
  }
  std::uint32_t u32(const char* what = "u32") {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(s_[pos_++])} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what = "u64") {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(s_[pos_++])} << (8 * i);
    return v;
  }
  std::int64_t i64(const char* what = "i64") { return static_cast<std::int64_t>(u64(what)); }
  double f64(const char* what = "f64") { return std::bit_cast<double>(u64(what)); }
  bool boolean(const char* what = "flag") {
    const auto b = u8(what);
    if (b > 1) throw Error("checkpoint: bad flag byte at offset " + std::to_string(base_ + pos_ - 1));
    return b == 1;
  }
  std::size_t count(std::size_t elem, const char* what) {
    const auto n = u64(what);
    if (elem > 0 && n > (s_.size() - pos_) / elem) {
      throw Error("checkpoint truncated at offset " + std::to_string(base_ + pos_) +
                  " while reading " + what);
    }
    return static_cast<std::size_t>(n);
  }
  std::string str(const char* what = "string") {
    const auto n = count(1, what);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  Vector vec(const char* what = "vector") {
    const auto n = count(8, what);
    Vector v(n);
    for (auto& x : v) x = f64(what);
    return v;
  }
  void tag(const char (&t)[5]) {
    need(4, t);
    if (std::memcmp(s_.data() + pos_, t, 4) != 0) {
      throw Error("checkpoint: expected section '" + std::string(t) + "' at offset " +
                  std::to_string(base_ + pos_));
    }
    pos_ += 4;
  }
  bool done() const { return pos_ == s_.size(); }
  std::size_t offset() const { return base_ + pos_; }

 private:
  const std::string& s_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

void write_metrics(Writer& w, const MetricsReport& m) {
  for (const auto& row : m.confusion) {
    for (auto c : row) w.u64(c);
  }
}

MetricsReport read_metrics(Reader& r) {
  Confusion c{};
  for (auto& row : c) {
    for (auto& x : row) x = static_cast<std::size_t>(r.u64("confusion"));
  }
  return accuracy_metrics(c);
}

void write_entry(Writer& w, const ScorePoolEntry& e) {
  w.u8(static_cast<std::uint8_t>(code(e.label)));
  w.f64(e.score);
  w.vec(e.embedding);
  w.i64(e.iteration);
}

ScorePoolEntry read_entry(Reader& r) {
  ScorePoolEntry e;
  const int lab = r.u8("pool label");
  if (lab >= kNumLevels) throw Error("checkpoint: bad pool label at offset " + std::to_string(r.offset()));
  e.label = level_from_code(lab);
  e.score = r.f64("pool score");
  e.embedding = r.vec("pool embedding");
  e.iteration = r.i64("pool iteration");
  return e;
}

ModelParams read_params(Reader& r, const ModelConfig& mc, const char* what) {
  ModelParams p(mc);
  const Vector flat = r.vec(what);
  if (flat.size() != p.size()) {
    throw Error(std::string("checkpoint: ") + what + " has " + std::to_string(flat.size()) +
                " values, model expects " + std::to_string(p.size()));
  }
  p.unflatten(flat);
  return p;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const TrainState& st = ckpt.state;
  Writer w;
  w.tag("CONF");
  w.str(config_to_text(ckpt.config));
  w.tag("MODL");
  w.str(model_config_to_text(ckpt.model));
  w.tag("PARM");
  w.vec(st.params.flatten());

  w.tag("ENCD");
  w.boolean(st.encoder.has_value());
  if (st.encoder) {
    w.f64(st.encoder->momentum);
    w.vec(st.encoder->params.flatten());
  }
  w.tag("POOL");
  w.boolean(st.pool.has_value());
  if (st.pool) {
    w.u64(st.pool->capacity());
    w.u64(st.pool->size());
    for (const auto& e : st.pool->entries()) write_entry(w, e);
  }
  w.tag("CENT");
  w.boolean(st.centers.has_value());
  if (st.centers) {
    w.f64(st.centers->alpha);
    for (const auto& c : st.centers->centers) w.vec(c);
  }
  w.tag("OPTM");
  w.vec(st.optimizer.m);
  w.vec(st.optimizer.v);
  w.i64(st.optimizer.step);

  w.tag("PROG");
  w.u32(static_cast<std::uint32_t>(st.stage));
  w.i64(st.step);
  w.i64(st.epoch);
  w.i64(st.batch_in_epoch);
  w.u64(st.epoch_order.size());
  for (auto i : st.epoch_order) w.u64(i);
  w.str(st.rng.serialize());
  w.str(st.sampler_state);
  w.f64(st.epoch_loss_sum);

  w.tag("ELOG");
  w.u64(st.log.size());
  for (const auto& e : st.log) {
    w.u32(static_cast<std::uint32_t>(e.stage));
    w.i64(e.epoch);
    w.i64(e.step);
    w.f64(e.lr);
    w.f64(e.train_loss);
    w.boolean(e.val.has_value());
    if (e.val) write_metrics(w, *e.val);
  }

  const std::string& payload = w.bytes();
  Writer h;
  h.bytes().append(kMagic, 8);
  h.u32(kCheckpointVersion);
  h.u64(payload.size());
  h.u64(fnv1a(payload.data(), payload.size()));
  return h.bytes() + payload;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kHeaderSize) {
    throw Error("checkpoint truncated at offset " + std::to_string(bytes.size()) +
                " while reading header");
  }
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw Error("not a checkpoint file (bad magic)");
  const std::string header = bytes.substr(8, kHeaderSize - 8);
  Reader hr(header, 8);
  const auto version = hr.u32("version");
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = hr.u64("payload length");
  const auto checksum = hr.u64("checksum");
  if (bytes.size() - kHeaderSize < length) {
    throw Error("checkpoint truncated at offset " + std::to_string(bytes.size()) + ": payload needs " +
                std::to_string(length) + " bytes, found " +
                std::to_string(bytes.size() - kHeaderSize));
  }
  if (bytes.size() - kHeaderSize > length) throw Error("checkpoint has trailing bytes");
  const std::string payload = bytes.substr(kHeaderSize);
  if (fnv1a(payload.data(), payload.size()) != checksum) throw Error("checkpoint checksum mismatch");

  Reader r(payload, kHeaderSize);
  Checkpoint ck;
  r.tag("CONF");
  ck.config = config_from_text(r.str("config"));
  r.tag("MODL");
  ck.model = model_config_from_text(r.str("model config"));
  TrainState& st = ck.state;
  r.tag("PARM");
  st.params = read_params(r, ck.model, "parameters");

  r.tag("ENCD");
  if (r.boolean()) {
    MomentumEncoder enc;
    enc.momentum = r.f64("momentum");
    enc.params = read_params(r, ck.model, "encoder parameters");
    st.encoder = std::move(enc);
  }
  r.tag("POOL");
  if (r.boolean()) {
    const auto cap = r.u64("pool capacity");
    const auto n = r.u64("pool size");
    if (n > cap) throw Error("checkpoint: pool size exceeds capacity");
    ScorePool pool(static_cast<std::size_t>(cap));
    std::vector<ScorePoolEntry> entries;
    for (std::uint64_t i = 0; i < n; ++i) entries.push_back(read_entry(r));
    pool.push(std::move(entries));
    st.pool = std::move(pool);
  }
  r.tag("CENT");
  if (r.boolean()) {
    ClassCenters c;
    c.alpha = r.f64("center alpha");
    for (auto& v : c.centers) v = r.vec("center");
    st.centers = std::move(c);
  }
  r.tag("OPTM");
  st.optimizer.m = r.vec("adam m");
  st.optimizer.v = r.vec("adam v");
  st.optimizer.step = r.i64("adam step");

  r.tag("PROG");
  st.stage = static_cast<int>(r.u32("stage"));
  st.step = r.i64("step");
  st.epoch = static_cast<int>(r.i64("epoch"));
  st.batch_in_epoch = r.i64("batch index");
  const auto order = r.count(8, "epoch order");
  st.epoch_order.resize(order);
  for (auto& i : st.epoch_order) i = static_cast<std::size_t>(r.u64("epoch order"));
  st.rng.deserialize(r.str("rng state"));
  st.sampler_state = r.str("sampler state");
  st.epoch_loss_sum = r.f64("loss sum");

  r.tag("ELOG");
  const auto nlog = r.count(1, "epoch log");
  for (std::size_t i = 0; i < nlog; ++i) {
    EpochLog e;
    e.stage = static_cast<int>(r.u32("log stage"));
    e.epoch = static_cast<int>(r.i64("log epoch"));
    e.step = r.i64("log step");
    e.lr = r.f64("log lr");
    e.train_loss = r.f64("log loss");
    if (r.boolean()) e.val = read_metrics(r);
    st.log.push_back(std::move(e));
  }
  if (!r.done()) throw Error("checkpoint: unexpected data at offset " + std::to_string(r.offset()));
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write checkpoint: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace mocorank
