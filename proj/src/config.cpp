#include "mocorank/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mocorank {

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::mocorank: return "mocorank";
    case LossKind::mocorank_center: return "mocorank+center";
    case LossKind::mse: return "mse";
    case LossKind::ce: return "ce";
    case LossKind::cb_focal: return "cb_focal";
    case LossKind::ce_center: return "ce+center";
  }
  return "?";
}

LossKind parse_loss(std::string_view s) {
  if (s == "mocorank") return LossKind::mocorank;
  if (s == "mocorank+center") return LossKind::mocorank_center;
  if (s == "mse") return LossKind::mse;
  if (s == "ce") return LossKind::ce;
  if (s == "cb_focal") return LossKind::cb_focal;
  if (s == "ce+center") return LossKind::ce_center;
  throw Error("unknown loss '" + std::string(s) + "'");
}

bool uses_pool(LossKind k) { return k == LossKind::mocorank || k == LossKind::mocorank_center; }
bool uses_center(LossKind k) { return k == LossKind::mocorank_center || k == LossKind::ce_center; }
bool uses_logits(LossKind k) {
  return k == LossKind::ce || k == LossKind::cb_focal || k == LossKind::ce_center;
}

const char* sampler_name(SamplerKind s) {
  return s == SamplerKind::sequential ? "sequential" : "class_balanced";
}

SamplerKind parse_sampler(std::string_view s) {
  if (s == "sequential") return SamplerKind::sequential;
  if (s == "class_balanced") return SamplerKind::class_balanced;
  throw Error("unknown sampler '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("config: epochs must be >= 1");
  if (stage2_epochs < 1) throw Error("config: stage2_epochs must be >= 1");
  if (batch_size < 1) throw Error("config: batch_size must be >= 1");
  if (pool_size < 1) throw Error("config: pool_size must be >= 1");
  if (batch_size > pool_size) {
    throw Error("config: batch_size |B|=" + std::to_string(batch_size) +
                " exceeds pool_size |P|=" + std::to_string(pool_size));
  }
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) {
    throw Error("config: learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (weight_decay < 0) throw Error("config: weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw Error("config: momentum must lie in [0, 1]");
  if (!(focal_beta >= 0.0 && focal_beta < 1.0)) throw Error("config: focal_beta must lie in [0, 1)");
  if (center_weight < 0 || center_alpha < 0) throw Error("config: center constants must be >= 0");
}

namespace {

std::string normalize_key(std::string_view key) {
  std::string k(key);
  for (auto& c : k) {
    if (c == '-') c = '_';
  }
  return k;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error("config: invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: invalid boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

}  // namespace

void TrainConfig::set(std::string_view raw_key, std::string_view raw_value) {
  const std::string key = normalize_key(raw_key);
  const std::string v = trim(raw_value);
  if (key == "loss") loss = parse_loss(v);
  else if (key == "batch_size") batch_size = parse_number<int>(key, v);
  else if (key == "pool_size") pool_size = parse_number<int>(key, v);
  else if (key == "epochs") epochs = parse_number<int>(key, v);
  else if (key == "stage2_epochs") stage2_epochs = parse_number<int>(key, v);
  else if (key == "lr_start") lr_start = parse_number<double>(key, v);
  else if (key == "lr_end") lr_end = parse_number<double>(key, v);
  else if (key == "weight_decay") weight_decay = parse_number<double>(key, v);
  else if (key == "momentum") momentum = parse_number<double>(key, v);
  else if (key == "sampler") sampler = parse_sampler(v);
  else if (key == "use_audio") use_audio = parse_bool(key, v);
  else if (key == "ablation") ablation = parse_fusion(v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "width") width = parse_number<int>(key, v);
  else if (key == "mlp_hidden") mlp_hidden = parse_number<int>(key, v);
  else if (key == "chunks") chunks = parse_number<int>(key, v);
  else if (key == "kernel") kernel = parse_number<int>(key, v);
  else if (key == "tcn_dropout") tcn_dropout = parse_number<double>(key, v);
  else if (key == "mlp1_dropout") mlp1_dropout = parse_number<double>(key, v);
  else if (key == "min_frames") min_frames = parse_number<int>(key, v);
  else if (key == "strict_250") strict_250 = parse_bool(key, v);
  else if (key == "center_weight") center_weight = parse_number<double>(key, v);
  else if (key == "center_alpha") center_alpha = parse_number<double>(key, v);
  else if (key == "focal_beta") focal_beta = parse_number<double>(key, v);
  else if (key == "focal_gamma") focal_gamma = parse_number<double>(key, v);
  else if (key == "detach_margin") detach_margin = parse_bool(key, v);
  else if (key == "score_before_step") score_before_step = parse_bool(key, v);
  else if (key == "train_path") train_path = v;
  else if (key == "val_path") val_path = v;
  else if (key == "test_path") test_path = v;
  else if (key == "init_from") init_from = v;
  else throw Error("config: unknown key '" + std::string(raw_key) + "'");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"loss", loss_name(loss)},
      {"batch_size", std::to_string(batch_size)},
      {"pool_size", std::to_string(pool_size)},
      {"epochs", std::to_string(epochs)},
      {"stage2_epochs", std::to_string(stage2_epochs)},
      {"lr_start", fmt(lr_start)},
      {"lr_end", fmt(lr_end)},
      {"weight_decay", fmt(weight_decay)},
      {"momentum", fmt(momentum)},
      {"sampler", sampler_name(sampler)},
      {"use_audio", fmt(use_audio)},
      {"ablation", fusion_name(ablation)},
      {"seed", std::to_string(seed)},
      {"width", std::to_string(width)},
      {"mlp_hidden", std::to_string(mlp_hidden)},
      {"chunks", std::to_string(chunks)},
      {"kernel", std::to_string(kernel)},
      {"tcn_dropout", fmt(tcn_dropout)},
      {"mlp1_dropout", fmt(mlp1_dropout)},
      {"min_frames", std::to_string(min_frames)},
      {"strict_250", fmt(strict_250)},
      {"center_weight", fmt(center_weight)},
      {"center_alpha", fmt(center_alpha)},
      {"focal_beta", fmt(focal_beta)},
      {"focal_gamma", fmt(focal_gamma)},
      {"detach_margin", fmt(detach_margin)},
      {"score_before_step", fmt(score_before_step)},
      {"train_path", train_path},
      {"val_path", val_path},
      {"test_path", test_path},
      {"init_from", init_from},
  };
}

ModelConfig TrainConfig::model_config(int high_level_dim, int global_dim, bool audio,
                                      int speech_dim) const {
  ModelConfig m;
  m.high_level_dim = high_level_dim;
  m.global_dim = global_dim;
  m.chunks = chunks;
  m.width = width;
  m.mlp_hidden = mlp_hidden;
  m.kernel = kernel;
  m.tcn_dropout = tcn_dropout;
  m.mlp1_dropout = mlp1_dropout;
  m.fusion = ablation;
  m.head = head();
  m.audio = audio;
  m.speech_dim = speech_dim;
  m.validate();
  return m;
}

TrainConfig desk_preset() { return TrainConfig{}; }

TrainConfig paper_preset() {
  TrainConfig c;
  c.batch_size = 256;
  c.pool_size = 2048;
  c.epochs = 1200;
  c.stage2_epochs = 1200;
  c.width = 64;
  c.mlp_hidden = 64;
  return c;
}

TrainConfig preset(std::string_view name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  throw Error("unknown preset '" + std::string(name) + "'");
}

std::string config_to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "config_version = " << kConfigVersion << '\n';
  for (const auto& [k, v] : cfg.to_map()) os << k << " = " << v << '\n';
  return os.str();
}

TrainConfig config_from_text(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_version = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = normalize_key(trim(std::string_view(t).substr(0, eq)));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (!have_version) {
      if (key != "config_version") {
        throw Error("config line " + std::to_string(line_no) +
                    ": first entry must be config_version");
      }
      if (value != std::to_string(kConfigVersion)) {
        throw Error("unsupported config_version " + value);
      }
      have_version = true;
      continue;
    }
    try {
      base.set(key, value);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_version) throw Error("config: missing config_version");
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_text(buf.str(), std::move(base));
}

std::string model_config_to_text(const ModelConfig& m) {
  std::ostringstream os;
  os << "high_level_dim = " << m.high_level_dim << '\n'
     << "global_dim = " << m.global_dim << '\n'
     << "chunks = " << m.chunks << '\n'
     << "width = " << m.width << '\n'
     << "mlp_hidden = " << m.mlp_hidden << '\n'
     << "kernel = " << m.kernel << '\n'
     << "dilations =";
  for (int d : m.dilations) os << ' ' << d;
  os << '\n'
     << "tcn_dropout = " << fmt(m.tcn_dropout) << '\n'
     << "mlp1_dropout = " << fmt(m.mlp1_dropout) << '\n'
     << "fusion = " << fusion_name(m.fusion) << '\n'
     << "head = " << head_name(m.head) << '\n'
     << "audio = " << fmt(m.audio) << '\n'
     << "speech_dim = " << m.speech_dim << '\n';
  return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string v = trim(std::string_view(line).substr(eq + 1));
    if (key == "high_level_dim") m.high_level_dim = parse_number<int>(key, v);
    else if (key == "global_dim") m.global_dim = parse_number<int>(key, v);
    else if (key == "chunks") m.chunks = parse_number<int>(key, v);
    else if (key == "width") m.width = parse_number<int>(key, v);
    else if (key == "mlp_hidden") m.mlp_hidden = parse_number<int>(key, v);
    else if (key == "kernel") m.kernel = parse_number<int>(key, v);
    else if (key == "dilations") {
      m.dilations.clear();
      std::istringstream ds(v);
      int d;
      while (ds >> d) m.dilations.push_back(d);
    } else if (key == "tcn_dropout") m.tcn_dropout = parse_number<double>(key, v);
    else if (key == "mlp1_dropout") m.mlp1_dropout = parse_number<double>(key, v);
    else if (key == "fusion") m.fusion = parse_fusion(v);
    else if (key == "head") m.head = parse_head(v);
    else if (key == "audio") m.audio = parse_bool(key, v);
    else if (key == "speech_dim") m.speech_dim = parse_number<int>(key, v);
    else throw Error("model config: unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

}  // namespace mocorank
