#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mocorank/bench.hpp"
#include "mocorank/checkpoint.hpp"
#include "mocorank/gradcheck.hpp"
#include "mocorank/log.hpp"
#include "mocorank/trainer.hpp"

namespace fs = std::filesystem;
using namespace mocorank;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

// Config sources in increasing priority: preset, --config file, flags.
struct ConfigFlags {
  std::string preset_name = "desk";
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset_name, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--config", config_path, "key = value config file");
    for (const auto& [key, value] : desk_preset().to_map()) {
      if (value == "true" || value == "false") {
        switches[key] = false;
        app->add_flag(flag_name(key), switches[key]);
      } else {
        values[key];
        app->add_option(flag_name(key), values[key]);
      }
    }
  }

  TrainConfig build(const CLI::App* app) const {
    TrainConfig cfg = preset(preset_name);
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    for (const auto& [key, value] : values) {
      if (app->count(flag_name(key)) > 0) cfg.set(key, value);
    }
    for (const auto& [key, on] : switches) {
      if (app->count(flag_name(key)) > 0) cfg.set(key, on ? "true" : "false");
    }
    cfg.validate();
    return cfg;
  }
};

void write_reports(const fs::path& dir, const Checkpoint& ckpt, const std::vector<EpochLog>& log,
                   const std::optional<MetricsReport>& test) {
  fs::create_directories(dir);
  save_checkpoint(ckpt, (dir / "checkpoint.bin").string());
  write_file(dir / "config.txt", config_to_text(ckpt.config));
  write_file(dir / "epochs.csv", epoch_log_csv(log));
  if (test) {
    write_file(dir / "metrics.json", metrics_json(*test) + "\n");
    write_file(dir / "recall.csv", recall_csv(*test));
    std::cout << "test acc " << test->acc << " avg_acc " << test->avg_acc << "\n";
  }
  std::cout << "wrote " << dir.string() << "\n";
}

std::optional<MetricsReport> test_metrics(const Checkpoint& ckpt) {
  if (ckpt.config.test_path.empty()) return std::nullopt;
  return evaluate(ckpt, load_records(ckpt.config.test_path), EvalSubset::all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MocoRank engagement scoring: training, evaluation and benchmarks"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic imbalanced dataset");
  SynthOptions so;
  std::string synth_out, synth_split_dir;
  synth->add_option("--n", so.n);
  synth->add_option("--D", so.high_level_dim, "high-level features per frame");
  synth->add_option("--d", so.global_dim, "global feature size");
  synth->add_option("--frames", so.frames);
  synth->add_option("--noise", so.noise);
  synth->add_option("--seed", so.seed);
  synth->add_option("--speech-fraction", so.speech_fraction);
  synth->add_option("--speech-dim", so.speech_dim);
  synth->add_option("--proportions", so.proportions)->expected(4);
  synth->add_option("--out", synth_out, "whole dataset file");
  synth->add_option("--split-dir", synth_split_dir, "write stratified train/val/test files here");

  // train
  auto* train_cmd = app.add_subcommand("train", "single-stage training");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd);
  std::string train_out = "run";
  train_cmd->add_option("--out-dir", train_out);

  // train-two-stage
  auto* two_cmd = app.add_subcommand("train-two-stage", "visual stage, then frozen-visual audio stage");
  ConfigFlags two_flags;
  two_flags.attach(two_cmd);
  std::string two_out = "run";
  two_cmd->add_option("--out-dir", two_out);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_subset = "all", eval_metrics, eval_recall;
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--subset", eval_subset)->check(CLI::IsMember({"all", "speech_only"}));
  eval_cmd->add_option("--metrics-out", eval_metrics, "metrics JSON path");
  eval_cmd->add_option("--recall-out", eval_recall, "per-class recall CSV path");

  // grad-check
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of every loss");
  std::uint64_t gc_seed = 7;
  double gc_tol = 1e-4;
  std::string gc_out;
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--tolerance", gc_tol);
  gc_cmd->add_option("--out", gc_out, "JSON report path");

  // bench-losses
  auto* bench_cmd = app.add_subcommand("bench-losses", "loss comparison over seeds");
  ConfigFlags bench_flags;
  bench_flags.attach(bench_cmd);
  std::vector<std::string> bench_variants{"mocorank", "class_sampler_mse"};
  std::string bench_reference = "class_sampler_mse";
  std::vector<std::uint64_t> bench_seeds{1, 2, 3, 4, 5};
  BenchOptions bench_opt;
  std::string bench_csv_path = "bench.csv", bench_json_path = "bench.json";
  bench_cmd->add_option("--variants", bench_variants, "name or name:key=value,...")->delimiter(' ');
  bench_cmd->add_option("--reference", bench_reference);
  bench_cmd->add_option("--seeds", bench_seeds);
  bench_cmd->add_option("--n", bench_opt.synth.n);
  bench_cmd->add_option("--noise", bench_opt.synth.noise);
  bench_cmd->add_option("--csv", bench_csv_path);
  bench_cmd->add_option("--json", bench_json_path);

  // icc
  auto* icc_cmd = app.add_subcommand("icc", "ICC(2,1) of a subjects x raters matrix");
  std::string icc_path;
  icc_cmd->add_option("ratings", icc_path, "whitespace or comma separated, one subject per line")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      if (synth_out.empty() && synth_split_dir.empty()) {
        throw Error("synth: give --out and/or --split-dir");
      }
      const Dataset ds = synth_dataset(so);
      if (!synth_out.empty()) save_records(ds, synth_out);
      if (!synth_split_dir.empty()) {
        const fs::path dir(synth_split_dir);
        fs::create_directories(dir);
        const auto sp = stratified_split(ds, 0.7, 0.1, mix_seed(so.seed, 2));
        save_records(sp.train, (dir / "train.jsonl").string());
        save_records(sp.val, (dir / "val.jsonl").string());
        save_records(sp.test, (dir / "test.jsonl").string());
      }
      const auto counts = ds.class_counts();
      std::cout << "records " << ds.size() << " (HD " << counts[0] << ", DE " << counts[1] << ", EG "
                << counts[2] << ", HE " << counts[3] << ")\n";
    } else if (train_cmd->parsed()) {
      const TrainConfig cfg = train_flags.build(train_cmd);
      const TrainOutcome out = train(cfg);
      write_reports(train_out, out.checkpoint, out.log, test_metrics(out.checkpoint));
    } else if (two_cmd->parsed()) {
      const TrainConfig cfg = two_flags.build(two_cmd);
      const TwoStageOutcome out = train_two_stage(cfg);
      std::optional<MetricsReport> test;
      if (!cfg.test_path.empty()) {
        const Dataset ds = load_records(cfg.test_path);
        if (ds.speech_count() > 0) test = evaluate(out.checkpoint, ds, EvalSubset::speech_only);
        else log::warn("test split has no speech records; skipping test metrics");
      }
      write_reports(two_out, out.checkpoint, out.log, test);
    } else if (eval_cmd->parsed()) {
      const Checkpoint ck = load_checkpoint(eval_ckpt);
      const auto subset = eval_subset == "speech_only" ? EvalSubset::speech_only : EvalSubset::all;
      const MetricsReport m = evaluate(ck, load_records(eval_data), subset);
      const std::string json = metrics_json(m) + "\n";
      if (eval_metrics.empty()) std::cout << json;
      else write_file(eval_metrics, json);
      if (!eval_recall.empty()) write_file(eval_recall, recall_csv(m));
    } else if (gc_cmd->parsed()) {
      const auto reports = grad_check_suite(gc_seed, gc_tol);
      bool ok = true;
      for (const auto& r : reports) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << loss_name(r.loss) << (r.audio ? " (audio)" : "")
                  << " params=" << r.params << " checked=" << r.checked << " skipped=" << r.skipped
                  << " max_rel_err=" << r.max_rel_err << "\n";
        ok = ok && r.passed;
      }
      if (!gc_out.empty()) write_file(gc_out, grad_check_json(reports) + "\n");
      return ok ? 0 : 1;
    } else if (bench_cmd->parsed()) {
      bench_opt.base = bench_flags.build(bench_cmd);
      bench_opt.seeds = bench_seeds;
      for (const auto& v : bench_variants) bench_opt.variants.push_back(parse_bench_variant(v));
      bench_opt.reference = bench_reference;
      const auto runs = run_bench(bench_opt, [](const BenchRun& r) {
        std::cout << r.variant << " seed " << r.seed << " acc " << r.test.acc << " avg_acc "
                  << r.test.avg_acc << " (" << r.seconds << " s)\n";
      });
      const auto summary = summarize_bench(runs, bench_reference);
      write_file(bench_csv_path, bench_csv(summary.runs));
      write_file(bench_json_path, bench_json(summary, bench_opt) + "\n");
      for (const auto& c : summary.comparisons) {
        std::cout << c.treatment << " vs " << c.reference << ": mean delta avg_acc "
                  << c.mean_delta_avg_acc << ", wins " << c.wins << "/" << c.wins + c.losses + c.ties
                  << ", sign test p " << c.p_value << "\n";
      }
    } else if (icc_cmd->parsed()) {
      std::cout << icc_2_1(load_ratings(icc_path)) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
