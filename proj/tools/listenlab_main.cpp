// Command-line front end: data generation, training, evaluation, ablations,
// gradient verification, and attention-mask export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "listenlab/checkpoint.hpp"
#include "listenlab/gradcheck.hpp"
#include "listenlab/synth.hpp"
#include "listenlab/train.hpp"

namespace fs = std::filesystem;
using namespace listenlab;

namespace {

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  KvConfig kv = KvConfig::from_file(config_path);
  SynthConfig cfg = SynthConfig::from_kv(kv);
  kv.finish();
  SynthStats stats = synth_generate(cfg, out_dir);
  std::cout << "wrote " << (fs::path(out_dir) / "manifest.jsonl").string() << "\n"
            << "clips: real=" << stats.n_real << " jitter=" << stats.n_jitter
            << " decorr=" << stats.n_decorr << "\n"
            << "stats: " << stats.to_json().dump() << "\n";
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& config_path,
              const std::string& out_dir) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    KvConfig kv = KvConfig::from_file(config_path);
    cfg = TrainConfig::from_kv(kv);
    kv.finish();
  }
  TrainResult result = train_model(manifest, cfg, out_dir);
  const EpochLog& last = result.log.back();
  std::cout << "checkpoint: " << result.checkpoint_dir << "\n"
            << "log: " << result.log_path << "\n";
  std::printf("final train_loss=%.6f train_acc=%.6f\n", last.train_loss, last.train_acc);
  if (result.best_epoch >= 0)
    std::printf("best epoch=%lld val_auc=%.6f\n", static_cast<long long>(result.best_epoch),
                result.best_val_auc);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const std::string& split,
             const std::string& report_path) {
  EvalReport report = evaluate_checkpoint(ckpt, manifest, split);
  std::ofstream out(report_path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + report_path);
  out << report.to_json().dump(2) << "\n";
  if (!out) throw IoError("report write failed: " + report_path);
  std::printf("auc=%.6f acc=%.6f n=%lld\n", report.auc, report.acc,
              static_cast<long long>(report.n_samples));
  return 0;
}

int cmd_ablate(const std::string& manifest, const std::string& rows_path,
               const std::string& out_dir) {
  KvConfig kv = KvConfig::from_file(rows_path);
  std::string rows_spec = kv.get_str("rows", "");
  if (rows_spec.empty())
    throw ValidationError("rows file must set rows = variant:fusion[, variant:fusion ...]");
  int64_t n_seeds = kv.get_i64("n_seeds", 5);
  TrainConfig base = TrainConfig::from_kv(kv);
  kv.finish();

  std::vector<std::pair<std::string, std::string>> rows;
  std::string item;
  std::istringstream ss(rows_spec);
  while (std::getline(ss, item, ',')) {
    size_t a = item.find_first_not_of(" \t");
    size_t b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    item = item.substr(a, b - a + 1);
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ValidationError("ablation row must be variant:fusion, got: " + item);
    rows.emplace_back(item.substr(0, colon), item.substr(colon + 1));
  }

  auto table = run_ablation(manifest, base, rows, n_seeds, out_dir);
  std::printf("%-10s %-12s %-18s %-18s\n", "variant", "fusion", "test_auc", "test_acc");
  for (const auto& row : table)
    std::printf("%-10s %-12s %.4f +/- %.4f   %.4f +/- %.4f\n", row.variant.c_str(),
                row.fusion.c_str(), row.mean_auc, row.sd_auc, row.mean_acc, row.sd_acc);
  std::cout << "tables: " << (fs::path(out_dir) / "ablation.csv").string() << ", "
            << (fs::path(out_dir) / "ablation.txt").string() << "\n";
  return 0;
}

template <typename T>
int run_grad_check(double tol) {
  GradCheckResult result = grad_check_model<T>();
  std::printf("input seed %llu, relu preactivation margin %.3e\n",
              static_cast<unsigned long long>(result.input_seed), result.relu_margin);
  for (const auto& [name, err] : result.report.max_rel_err)
    std::printf("  %-14s max rel err %.3e\n", name.c_str(), err);
  bool ok = result.report.pass(tol);
  std::printf("worst %.3e (%s) tolerance %.0e: %s\n", result.report.worst,
              result.report.worst_param.c_str(), tol, ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

int cmd_export_mask(const std::string& ckpt, const std::string& clip_id,
                    const std::string& out_dir) {
  std::string manifest = checkpoint_source_manifest(ckpt);
  if (manifest.empty())
    throw ValidationError("checkpoint records no source manifest; cannot resolve clip id");
  export_masks(ckpt, manifest, clip_id, out_dir);
  std::cout << "wrote per-frame masks for " << clip_id << " under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion-aware, audio-guided listening-deepfake detector"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest, ckpt, split, report_path, clip_id, rows_path;
  bool use_f64 = false;

  auto* gen = app.add_subcommand("gen-data", "generate a seeded synthetic dataset");
  gen->add_option("--config", config_path, "key=value generator config")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a detector");
  train->add_option("--manifest", manifest, "dataset manifest")->required();
  train->add_option("--config", config_path, "key=value training config")->required();
  train->add_option("--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  eval->add_option("--manifest", manifest, "dataset manifest")->required();
  eval->add_option("--split", split, "split name")->required();
  eval->add_option("--report", report_path, "output report JSON path")->required();

  auto* ablate = app.add_subcommand("ablate", "run a (variant, fusion) ablation table");
  ablate->add_option("--manifest", manifest, "dataset manifest")->required();
  ablate->add_option("--rows", rows_path, "rows file (key=value; see README)")->required();
  ablate->add_option("--out", out_dir, "output directory")->required();

  auto* gc = app.add_subcommand("grad-check", "verify analytic gradients by finite differences");
  gc->add_flag("--f64", use_f64, "verify in 64-bit (tolerance 1e-6 instead of 1e-3)");

  auto* em = app.add_subcommand("export-mask", "write per-frame spatial attention masks as PGM");
  em->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  em->add_option("--clip", clip_id, "clip id from the training manifest")->required();
  em->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
    if (train->parsed()) return cmd_train(manifest, config_path, out_dir);
    if (eval->parsed()) return cmd_eval(ckpt, manifest, split, report_path);
    if (ablate->parsed()) return cmd_ablate(manifest, rows_path, out_dir);
    if (gc->parsed()) return use_f64 ? run_grad_check<double>(1e-6) : run_grad_check<float>(1e-3);
    if (em->parsed()) return cmd_export_mask(ckpt, clip_id, out_dir);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
