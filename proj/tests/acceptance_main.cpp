// Acceptance gate: one criterion per invocation (argv[1] in 1..8), printing a
// single "CRITERION <n>: PASS|FAIL" verdict plus supporting measurements.
// Exit code 0 on pass, 1 on fail, 2 on usage error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "listenlab/checkpoint.hpp"
#include "listenlab/gradcheck.hpp"
#include "listenlab/mam.hpp"
#include "listenlab/manifest.hpp"
#include "listenlab/metrics.hpp"
#include "listenlab/model.hpp"
#include "listenlab/rng.hpp"
#include "listenlab/segment.hpp"
#include "listenlab/synth.hpp"
#include "listenlab/train.hpp"

using namespace listenlab;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& tag) {
    root = fs::temp_directory_path() / ("listenlab_accept_" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string dir(const std::string& name) {
    fs::create_directories(root / name);
    return (root / name).string();
  }
  std::string file(const std::string& name) { return (root / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int verdict(int n, bool pass) {
  std::printf("CRITERION %d: %s\n", n, pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity of the micro detector in both precisions.

int criterion1() {
  GradCheckResult r64 = grad_check_model<double>();
  std::printf("  64-bit worst relative error %.3e (%s)\n", r64.report.worst,
              r64.report.worst_param.c_str());
  GradCheckResult r32 = grad_check_model<float>();
  std::printf("  32-bit worst relative error %.3e (%s)\n", r32.report.worst,
              r32.report.worst_param.c_str());
  return verdict(1, r64.report.pass(1e-6) && r32.report.pass(1e-3));
}

// ---------------------------------------------------------------------------
// 2. Exact metric / normalization / segmentation oracles.

double auc_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

int criterion2() {
  bool ok = true;

  // AUC vs the O(n^2) pairwise oracle, exactly, on 1000 seeded instances.
  CounterRng rng(20260823);
  int auc_fail = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    int n = 2 + static_cast<int>(rng.next_below(31));
    std::vector<double> s(static_cast<size_t>(n));
    std::vector<int> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<size_t>(i)] = static_cast<double>(rng.next_below(16)) / 16.0;
      y[static_cast<size_t>(i)] = static_cast<int>(rng.next_below(2));
    }
    y[0] = 0;
    y[static_cast<size_t>(n - 1)] = 1;
    if (compute_auc(s, y) != auc_bruteforce(s, y)) ++auc_fail;
  }
  std::printf("  auc oracle mismatches: %d / 1000\n", auc_fail);
  ok = ok && auc_fail == 0;

  // Softmax rows normalize to 1 within 1e-6, including extreme inputs.
  CounterRng srng(7, 0x50f7);
  double worst_norm = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    Tensor<float> x({4, 8});
    double scale = (rep % 4 == 3) ? 1e4 : 10.0;
    for (auto& v : x.data()) v = static_cast<float>(srng.uniform(-scale, scale));
    Tensor<float> p = softmax(Var<float>(x), 1).value();
    for (int64_t r = 0; r < 4; ++r) {
      double sum = 0;
      for (int64_t c = 0; c < 8; ++c) sum += p.at({r, c});
      worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    }
  }
  std::printf("  softmax worst |row sum - 1| = %.3e\n", worst_norm);
  ok = ok && worst_norm <= 1e-6;

  // Segmentation totality over 10,000 random durations.
  CounterRng drng(99, 0x5e6);
  int seg_fail = 0;
  for (int i = 0; i < 10000; ++i) {
    double d = drng.uniform(1e-3, 600.0);
    auto segs = segment_clips(d);
    bool good = !segs.empty() && segs.front().first == 0.0 && segs.back().second == d;
    for (size_t k = 0; good && k + 1 < segs.size(); ++k)
      good = segs[k].second == segs[k + 1].first;
    for (size_t k = 0; good && k < segs.size(); ++k) {
      double len = segs[k].second - segs[k].first;
      if (segs.size() == 1 && d < 5.0)
        good = len == d;
      else
        good = len >= 5.0 - 1e-9 && len < 10.0;
    }
    if (!good) ++seg_fail;
  }
  std::printf("  segmentation property failures: %d / 10000\n", seg_fail);
  ok = ok && seg_fail == 0;
  return verdict(2, ok);
}

// ---------------------------------------------------------------------------
// 3. Static-scene null and the elementwise-commutativity diagnostic.

int criterion3() {
  const int64_t C = 8, H = 6, W = 6, T = 4;
  CounterRng rng(33, 0xacc3);
  MamParams<float> p;
  p.init(C, 4, 4, 4, CounterRng(17));

  Tensor<float> frame({1, 1, C, H, W});
  for (auto& v : frame.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  Tensor<float> vid({1, T, C, H, W});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t i = 0; i < frame.numel(); ++i) vid[t * frame.numel() + i] = frame[i];
  Var<float> v(vid);

  struct Row {
    AttentionVariant variant;
    int k;
  };
  bool ok = true;
  for (Row row : {Row{AttentionVariant::kSca, 2}, Row{AttentionVariant::kCsa, 2},
                  Row{AttentionVariant::kCparS, 1}, Row{AttentionVariant::kSpaOnly, 1},
                  Row{AttentionVariant::kChaOnly, 1}, Row{AttentionVariant::kNone, 0}}) {
    Var<float> out = apply_mam(v, row.variant, p);
    float scale = std::pow(0.5f, static_cast<float>(row.k));
    int64_t bad = 0;
    for (int64_t i = 0; i < out.numel(); ++i)
      if (out.value()[i] != scale * vid[i]) ++bad;
    std::printf("  %s: %lld / %lld elements differ from 0.5^%d * input\n",
                variant_name(row.variant).c_str(), static_cast<long long>(bad),
                static_cast<long long>(out.numel()), row.k);
    ok = ok && bad == 0;
  }

  // With raw (pre-mask) descriptors the two orderings commute bit-exactly.
  CounterRng vr(34, 0xacc4);
  Tensor<float> dyn({1, T, C, H, W});
  for (auto& x : dyn.data()) x = static_cast<float>(vr.uniform(-1.0, 1.0));
  Var<float> dv(dyn);
  Tensor<float> sca = apply_mam(dv, AttentionVariant::kSca, p, /*raw_descriptors=*/true).value();
  Tensor<float> csa = apply_mam(dv, AttentionVariant::kCsa, p, /*raw_descriptors=*/true).value();
  int64_t bad = 0;
  for (int64_t i = 0; i < sca.numel(); ++i)
    if (sca[i] != csa[i]) ++bad;
  std::printf("  raw-descriptor orderings: %lld / %lld elements differ\n",
              static_cast<long long>(bad), static_cast<long long>(sca.numel()));
  ok = ok && bad == 0;
  return verdict(3, ok);
}

// ---------------------------------------------------------------------------
// 4. Trainability of the flagship configuration on the 64-clip set.

int criterion4() {
  Scratch scratch("c4");
  SynthConfig gen;  // defaults: 64/16/16 clips, 16 frames of 32x32, seed 1
  synth_generate(gen, scratch.dir("data"));

  TrainConfig cfg;  // defaults: SCA + agm
  cfg.lr = 1e-3;
  cfg.epochs = 200;
  TrainResult res = train_model(scratch.file("data/manifest.jsonl"), cfg, scratch.dir("run"));

  int64_t hit = -1;
  for (const EpochLog& e : res.log)
    if (e.epoch > 0 && e.train_acc >= 0.95 && e.train_loss <= 0.15) {
      hit = e.epoch;
      break;
    }
  const EpochLog& last = res.log.back();
  std::printf("  final epoch %lld: train loss %.6f, train acc %.6f\n",
              static_cast<long long>(last.epoch), last.train_loss, last.train_acc);
  if (hit >= 0)
    std::printf("  targets (loss <= 0.15, acc >= 0.95) first met at epoch %lld\n",
                static_cast<long long>(hit));
  else
    std::printf("  targets (loss <= 0.15, acc >= 0.95) not met within %lld epochs\n",
                static_cast<long long>(cfg.epochs));
  return verdict(4, hit >= 0);
}

// ---------------------------------------------------------------------------
// 5 & 6. Directional ablation structure on method-dominated splits.

SynthConfig ablation_gen(double jitter_fraction, uint64_t seed) {
  SynthConfig gen;
  gen.train_clips = 128;
  gen.val_clips = 64;
  gen.test_clips = 64;
  gen.frames = 16;
  gen.frame_size = 16;
  gen.audio_tokens = 12;
  gen.audio_dim_raw = 8;
  gen.jitter_fraction = jitter_fraction;
  gen.seed = seed;
  return gen;
}

TrainConfig ablation_train() {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 80;
  cfg.channels = 8;
  cfg.spa_hidden = 4;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.ffn_hidden = 32;
  cfg.audio_dim = 16;
  return cfg;
}

// Per-seed test AUC of each (variant, fusion) row, all rows sharing the seed
// set base_seed..base_seed+4.
std::vector<std::vector<double>> seeded_aucs(
    const std::string& manifest, const std::vector<std::pair<std::string, std::string>>& rows,
    Scratch& scratch) {
  TrainConfig base = ablation_train();
  auto table = run_ablation(manifest, base, rows, 5, scratch.dir("runs"));
  std::vector<std::vector<double>> aucs;
  for (const auto& row : table) aucs.push_back(row.aucs);
  return aucs;
}

int criterion5() {
  Scratch scratch("c5");
  synth_generate(ablation_gen(/*jitter_fraction=*/1.0, /*seed=*/501), scratch.dir("data"));
  auto aucs = seeded_aucs(scratch.file("data/manifest.jsonl"),
                          {{"SCA", "visual_only"}, {"none", "visual_only"}}, scratch);
  int wins = 0;
  for (int s = 0; s < 5; ++s) {
    bool win = aucs[0][static_cast<size_t>(s)] > aucs[1][static_cast<size_t>(s)];
    std::printf("  seed %d: motion-attention AUC %.4f vs baseline AUC %.4f (%s)\n", s,
                aucs[0][static_cast<size_t>(s)], aucs[1][static_cast<size_t>(s)],
                win ? "win" : "loss");
    wins += win;
  }
  std::printf("  motion attention beats baseline in %d / 5 seeds (need >= 4)\n", wins);
  return verdict(5, wins >= 4);
}

int criterion6() {
  Scratch scratch("c6");
  synth_generate(ablation_gen(/*jitter_fraction=*/0.0, /*seed=*/601), scratch.dir("data"));
  auto aucs = seeded_aucs(
      scratch.file("data/manifest.jsonl"),
      {{"SCA", "agm"}, {"SCA", "concat"}, {"SCA", "visual_only"}}, scratch);
  int wins = 0;
  for (int s = 0; s < 5; ++s) {
    double a = aucs[0][static_cast<size_t>(s)], c = aucs[1][static_cast<size_t>(s)],
           v = aucs[2][static_cast<size_t>(s)];
    bool win = a > c && c >= v;
    std::printf("  seed %d: cross-attention %.4f vs concat %.4f vs visual-only %.4f (%s)\n", s,
                a, c, v, win ? "win" : "loss");
    wins += win;
  }
  std::printf("  ordering holds in %d / 5 seeds (need >= 4)\n", wins);
  return verdict(6, wins >= 4);
}

// ---------------------------------------------------------------------------
// 7. Full-pipeline byte determinism.

int criterion7() {
  Scratch scratch("c7");
  SynthConfig gen;
  gen.train_clips = 16;
  gen.val_clips = 4;
  gen.test_clips = 4;
  gen.frames = 8;
  gen.frame_size = 16;
  gen.audio_tokens = 12;
  gen.audio_dim_raw = 4;
  gen.seed = 77;

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 1e-3;
  cfg.channels = 8;
  cfg.spa_hidden = 4;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.ffn_hidden = 32;
  cfg.audio_dim = 16;
  cfg.batch_size = 4;

  std::string report[2];
  std::string manifest[2], log[2];
  for (int run = 0; run < 2; ++run) {
    std::string tag = run == 0 ? "a" : "b";
    synth_generate(gen, scratch.dir(tag + "/data"));
    manifest[run] = slurp(scratch.file(tag + "/data/manifest.jsonl"));
    TrainResult res =
        train_model(scratch.file(tag + "/data/manifest.jsonl"), cfg, scratch.dir(tag + "/run"));
    log[run] = slurp(res.log_path);
    EvalReport rep = evaluate_checkpoint(res.checkpoint_dir,
                                         scratch.file(tag + "/data/manifest.jsonl"), "test");
    report[run] = rep.to_json().dump(2);
  }
  bool m = manifest[0] == manifest[1] && !manifest[0].empty();
  bool l = log[0] == log[1] && !log[0].empty();
  bool r = report[0] == report[1] && !report[0].empty();
  std::printf("  manifests byte-identical: %s\n", m ? "yes" : "NO");
  std::printf("  training logs byte-identical: %s\n", l ? "yes" : "NO");
  std::printf("  eval reports byte-identical: %s\n", r ? "yes" : "NO");
  return verdict(7, m && l && r);
}

// ---------------------------------------------------------------------------
// 8. Cold-start exactness.

int criterion8() {
  Scratch scratch("c8");
  SynthConfig gen;
  gen.train_clips = 12;
  gen.val_clips = 4;
  gen.test_clips = 4;
  gen.frames = 8;
  gen.frame_size = 16;
  gen.audio_tokens = 12;
  gen.audio_dim_raw = 4;
  gen.seed = 88;
  synth_generate(gen, scratch.dir("data"));
  std::string manifest = scratch.file("data/manifest.jsonl");

  // Untrained parameters: every prediction is exactly one half.
  auto clips = load_clips(manifest, "train");
  ModelConfig mc;
  mc.frame_h = 16;
  mc.frame_w = 16;
  mc.channels = 8;
  mc.spa_hidden = 4;
  mc.d_model = 16;
  mc.heads = 4;
  mc.ffn_hidden = 32;
  mc.audio_dim_raw = 4;
  mc.audio_dim = 16;
  ModelParams<float> params;
  params.init(mc);
  std::vector<double> scores = score_clips(params, clips, 4);
  int64_t off = 0;
  for (double y : scores)
    if (y != 0.5) ++off;
  std::printf("  predictions != 0.5 on untrained model: %lld / %zu\n",
              static_cast<long long>(off), scores.size());

  EvalReport rep = evaluate_params(params, clips);
  std::printf("  all-ties AUC = %.6f (want 0.5 exactly)\n", rep.auc);

  // Initial logged loss of a training run is ln 2 within 1e-6.
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.channels = 8;
  cfg.spa_hidden = 4;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.ffn_hidden = 32;
  cfg.audio_dim = 16;
  cfg.batch_size = 4;
  TrainResult res = train_model(manifest, cfg, scratch.dir("run"));
  double init_loss = res.log.front().train_loss;
  std::printf("  initial training loss = %.9f (ln 2 = %.9f)\n", init_loss, std::log(2.0));

  bool ok = off == 0 && rep.auc == 0.5 && std::abs(init_loss - std::log(2.0)) <= 1e-6;
  return verdict(8, ok);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1-8>\n", argv[0]);
    return 2;
  }
  int n = std::atoi(argv[1]);
  try {
    switch (n) {
      case 1: return criterion1();
      case 2: return criterion2();
      case 3: return criterion3();
      case 4: return criterion4();
      case 5: return criterion5();
      case 6: return criterion6();
      case 7: return criterion7();
      case 8: return criterion8();
      default:
        std::fprintf(stderr, "usage: %s <criterion 1-8>\n", argv[0]);
        return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "  unexpected error: %s\n", e.what());
    return verdict(n, false);
  }
}
