#include "mocorank/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mocorank/log.hpp"
#include "mocorank/trainer.hpp"

namespace mocorank {

BenchVariant bench_variant(const std::string& name) {
  using O = std::vector<std::pair<std::string, std::string>>;
  static const std::map<std::string, O> table = {
      {"mocorank", {{"loss", "mocorank"}}},
      {"mocorank+center", {{"loss", "mocorank+center"}}},
      {"mocorank_detach", {{"loss", "mocorank"}, {"detach_margin", "true"}}},
      {"mse", {{"loss", "mse"}}},
      {"class_sampler_mse", {{"loss", "mse"}, {"sampler", "class_balanced"}}},
      {"ce", {{"loss", "ce"}}},
      {"class_sampler_ce", {{"loss", "ce"}, {"sampler", "class_balanced"}}},
      {"cb_focal", {{"loss", "cb_focal"}}},
      {"ce+center", {{"loss", "ce+center"}}},
      {"openface_only", {{"loss", "mocorank"}, {"ablation", "openface_only"}}},
      {"attention_only", {{"loss", "mocorank"}, {"ablation", "attention_only"}}},
      {"concat_only", {{"loss", "mocorank"}, {"ablation", "concat_only"}}},
      {"concat_attention", {{"loss", "mocorank"}, {"ablation", "concat+attention"}}},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw Error("unknown bench variant '" + name + "'");
  return {name, it->second};
}

BenchVariant parse_bench_variant(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return bench_variant(spec);
  BenchVariant v{spec.substr(0, colon), {}};
  std::stringstream ss(spec.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error("bad variant override '" + item + "' (expected key=value)");
    }
    v.overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  if (v.name.empty()) throw Error("variant needs a name");
  return v;
}

double sign_test_p(std::size_t wins, std::size_t n) {
  if (wins > n) throw Error("sign_test_p: wins exceed trials");
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    // C(n, k) / 2^n via lgamma to stay finite for large n
    p += std::exp(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                  std::lgamma(static_cast<double>(n - k) + 1) - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, p);
}

std::vector<BenchRun> run_bench(const BenchOptions& opt,
                                const std::function<void(const BenchRun&)>& on_run) {
  if (opt.variants.empty()) throw Error("bench: no variants");
  if (opt.seeds.empty()) throw Error("bench: no seeds");
  std::vector<BenchRun> runs;
  for (const auto seed : opt.seeds) {
    SynthOptions so = opt.synth;
    so.seed = mix_seed(seed, 1);
    const Dataset ds = synth_dataset(so);
    const SplitDatasets split = stratified_split(ds, 0.7, 0.1, mix_seed(seed, 2));
    for (const auto& v : opt.variants) {
      TrainConfig cfg = opt.base;
      for (const auto& [k, val] : v.overrides) cfg.set(k, val);
      cfg.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const TrainOutcome out = train(cfg, split.train, nullptr);
      const auto test = prepare_dataset(split.test, prepare_options(cfg));
      BenchRun r;
      r.variant = v.name;
      r.seed = seed;
      r.test = evaluate(out.checkpoint.state.params, test, cfg.use_audio);
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log::info("bench ", v.name, " seed ", seed, " acc ", r.test.acc, " avg_acc ", r.test.avg_acc);
      if (on_run) on_run(r);
      runs.push_back(std::move(r));
    }
  }
  return runs;
}

Comparison compare(const std::vector<BenchRun>& runs, const std::string& treatment,
                   const std::string& reference) {
  Comparison c;
  c.treatment = treatment;
  c.reference = reference;
  std::size_t pairs = 0;
  for (const auto& t : runs) {
    if (t.variant != treatment) continue;
    const auto r = std::find_if(runs.begin(), runs.end(), [&](const BenchRun& x) {
      return x.variant == reference && x.seed == t.seed;
    });
    if (r == runs.end()) continue;
    const double d = t.test.avg_acc - r->test.avg_acc;
    c.mean_delta_avg_acc += d;
    c.mean_delta_acc += t.test.acc - r->test.acc;
    if (d > 0) ++c.wins;
    else if (d < 0) ++c.losses;
    else ++c.ties;
    ++pairs;
  }
  if (pairs == 0) throw Error("compare: no paired seeds for " + treatment + " vs " + reference);
  c.mean_delta_avg_acc /= static_cast<double>(pairs);
  c.mean_delta_acc /= static_cast<double>(pairs);
  c.p_value = sign_test_p(c.wins, c.wins + c.losses);
  return c;
}

BenchSummary summarize_bench(std::vector<BenchRun> runs, const std::string& reference) {
  BenchSummary s;
  std::vector<std::string> names;
  for (const auto& r : runs) {
    if (std::find(names.begin(), names.end(), r.variant) == names.end()) names.push_back(r.variant);
  }
  for (const auto& n : names) {
    VariantSummary v;
    v.variant = n;
    std::vector<double> avg;
    for (const auto& r : runs) {
      if (r.variant != n) continue;
      v.mean_acc += r.test.acc;
      avg.push_back(r.test.avg_acc);
    }
    v.runs = avg.size();
    v.mean_acc /= static_cast<double>(v.runs);
    v.mean_avg_acc = std::accumulate(avg.begin(), avg.end(), 0.0) / static_cast<double>(v.runs);
    if (v.runs > 1) {
      double ss = 0.0;
      for (double a : avg) ss += (a - v.mean_avg_acc) * (a - v.mean_avg_acc);
      v.sd_avg_acc = std::sqrt(ss / static_cast<double>(v.runs - 1));
    }
    s.variants.push_back(v);
  }
  if (!reference.empty()) {
    if (std::find(names.begin(), names.end(), reference) == names.end()) {
      throw Error("bench reference '" + reference + "' is not among the variants");
    }
    for (const auto& n : names) {
      if (n != reference) s.comparisons.push_back(compare(runs, n, reference));
    }
  }
  s.runs = std::move(runs);
  return s;
}

std::string bench_csv(const std::vector<BenchRun>& runs) {
  std::ostringstream os;
  os.precision(10);
  os << "variant,seed,acc,avg_acc,recall_HD,recall_DE,recall_EG,recall_HE,seconds\n";
  for (const auto& r : runs) {
    os << r.variant << ',' << r.seed << ',' << r.test.acc << ',' << r.test.avg_acc;
    for (double x : r.test.recall) os << ',' << x;
    os << ',' << r.seconds << '\n';
  }
  return os.str();
}

std::string bench_json(const BenchSummary& s, const BenchOptions& opt) {
  nlohmann::json j;
  j["synthetic"] = {{"n", opt.synth.n}, {"noise", opt.synth.noise},
                    {"proportions", opt.synth.proportions}};
  j["seeds"] = opt.seeds;
  j["base_config"] = opt.base.to_map();
  for (const auto& v : s.variants) {
    j["variants"].push_back({{"variant", v.variant},
                             {"runs", v.runs},
                             {"mean_acc", v.mean_acc},
                             {"mean_avg_acc", v.mean_avg_acc},
                             {"sd_avg_acc", v.sd_avg_acc}});
  }
  j["comparisons"] = nlohmann::json::array();
  for (const auto& c : s.comparisons) {
    j["comparisons"].push_back({{"treatment", c.treatment},
                                {"reference", c.reference},
                                {"mean_delta_avg_acc", c.mean_delta_avg_acc},
                                {"mean_delta_acc", c.mean_delta_acc},
                                {"wins", c.wins},
                                {"losses", c.losses},
                                {"ties", c.ties},
                                {"sign_test_p", c.p_value}});
  }
  return j.dump(2);
}

}  // namespace mocorank
