#include "listenlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "listenlab/checkpoint.hpp"
#include "listenlab/metrics.hpp"
#include "listenlab/optim.hpp"
#include "listenlab/pgm.hpp"
#include "listenlab/rng.hpp"
#include "listenlab/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace listenlab {

TrainConfig TrainConfig::from_kv(KvConfig& kv) {
  TrainConfig c;
  c.lr = kv.get_f64("lr", c.lr);
  c.batch_size = kv.get_i64("batch_size", c.batch_size);
  c.epochs = kv.get_i64("epochs", c.epochs);
  c.beta1 = kv.get_f64("beta1", c.beta1);
  c.beta2 = kv.get_f64("beta2", c.beta2);
  c.eps = kv.get_f64("eps", c.eps);
  c.variant = kv.get_str("variant", c.variant);
  c.fusion = kv.get_str("fusion", c.fusion);
  c.seed = kv.get_u64("seed", c.seed);
  c.channels = kv.get_i64("channels", c.channels);
  c.reduce_ratio = kv.get_i64("reduce_ratio", c.reduce_ratio);
  c.bottleneck_ratio = kv.get_i64("bottleneck_ratio", c.bottleneck_ratio);
  c.spa_hidden = kv.get_i64("spa_hidden", c.spa_hidden);
  c.d_model = kv.get_i64("d_model", c.d_model);
  c.heads = kv.get_i64("heads", c.heads);
  c.ffn_hidden = kv.get_i64("ffn_hidden", c.ffn_hidden);
  c.audio_dim = kv.get_i64("audio_dim", c.audio_dim);
  c.positional_encoding = kv.get_bool("positional_encoding", c.positional_encoding);
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("train config: lr must be positive");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("train config: epochs must be >= 0");
  parse_variant(variant);
  parse_fusion(fusion);
}

std::vector<LoadedClip> load_clips(const std::string& manifest_path, const std::string& split) {
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<LoadedClip> out;
  for (const auto& rec : load_manifest(manifest_path)) {
    if (rec.split != split) continue;
    LoadedClip clip;
    clip.id = rec.id;
    clip.method = rec.method;
    clip.label = rec.label;
    try {
      clip.video = load_tensor<float>((base / rec.video_path).string());
      clip.audio = load_tensor<float>((base / rec.audio_path).string());
    } catch (const IoError& e) {
      throw IoError("clip " + rec.id + ": " + e.what());
    }
    if (clip.video.ndim() != 4 || clip.video.extent(1) != 3)
      throw ValidationError("clip " + rec.id + ": video must be (T,3,H,W), got " +
                            shape_str(clip.video.shape()));
    if (clip.audio.ndim() != 2)
      throw ValidationError("clip " + rec.id + ": audio must be (T_a,d), got " +
                            shape_str(clip.audio.shape()));
    out.push_back(std::move(clip));
  }
  return out;
}

namespace {

ModelConfig make_model_config(const TrainConfig& tc, const LoadedClip& sample) {
  ModelConfig mc;
  mc.frame_h = sample.video.extent(2);
  mc.frame_w = sample.video.extent(3);
  mc.audio_dim_raw = sample.audio.extent(1);
  mc.channels = tc.channels;
  mc.reduce_ratio = tc.reduce_ratio;
  mc.bottleneck_ratio = tc.bottleneck_ratio;
  mc.spa_hidden = tc.spa_hidden;
  mc.d_model = tc.d_model;
  mc.heads = tc.heads;
  mc.ffn_hidden = tc.ffn_hidden;
  mc.audio_dim = tc.audio_dim;
  mc.positional_encoding = tc.positional_encoding;
  mc.variant = parse_variant(tc.variant);
  mc.fusion = parse_fusion(tc.fusion);
  mc.seed = tc.seed;
  return mc;
}

// Stack a batch of clips into (B,T,3,H,W) and (B,T_a,d) inputs.
void make_batch(const std::vector<LoadedClip>& clips, const std::vector<size_t>& idx,
                size_t begin, size_t end, Tensor<float>* video, Tensor<float>* audio,
                std::vector<int>* labels) {
  const Tensor<float>& v0 = clips[idx[begin]].video;
  const Tensor<float>& a0 = clips[idx[begin]].audio;
  int64_t b = static_cast<int64_t>(end - begin);
  Shape vs = v0.shape(), as = a0.shape();
  *video = Tensor<float>::zeros({b, vs[0], vs[1], vs[2], vs[3]});
  *audio = Tensor<float>::zeros({b, as[0], as[1]});
  labels->clear();
  for (size_t i = begin; i < end; ++i) {
    const LoadedClip& c = clips[idx[i]];
    if (c.video.shape() != vs || c.audio.shape() != as)
      throw ValidationError("clip " + c.id + ": media extents differ within the dataset");
    int64_t off = static_cast<int64_t>(i - begin);
    std::copy(c.video.data().begin(), c.video.data().end(),
              video->data().begin() + off * c.video.numel());
    std::copy(c.audio.data().begin(), c.audio.data().end(),
              audio->data().begin() + off * c.audio.numel());
    labels->push_back(c.label);
  }
}

std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

Tensor<float> copy_tensor(const Tensor<float>& t) { return t; }

}  // namespace

std::vector<double> score_clips(ModelParams<float>& params, const std::vector<LoadedClip>& clips,
                                int64_t batch_size) {
  NoGradGuard guard;
  std::vector<size_t> idx(clips.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<double> scores;
  for (size_t begin = 0; begin < clips.size(); begin += static_cast<size_t>(batch_size)) {
    size_t end = std::min(clips.size(), begin + static_cast<size_t>(batch_size));
    Tensor<float> vb, ab;
    std::vector<int> labels;
    make_batch(clips, idx, begin, end, &vb, &ab, &labels);
    Var<float> logits = model_forward(Var<float>(std::move(vb)), Var<float>(std::move(ab)), params);
    for (double s : forgery_probabilities(logits.value())) scores.push_back(s);
  }
  return scores;
}

std::pair<double, double> dataset_loss_acc(ModelParams<float>& params,
                                           const std::vector<LoadedClip>& clips,
                                           int64_t batch_size) {
  NoGradGuard guard;
  std::vector<size_t> idx(clips.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (size_t begin = 0; begin < clips.size(); begin += static_cast<size_t>(batch_size)) {
    size_t end = std::min(clips.size(), begin + static_cast<size_t>(batch_size));
    Tensor<float> vb, ab;
    std::vector<int> labels;
    make_batch(clips, idx, begin, end, &vb, &ab, &labels);
    Var<float> logits = model_forward(Var<float>(std::move(vb)), Var<float>(std::move(ab)), params);
    Var<float> loss = model_loss(logits, labels);
    loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(end - begin);
    std::vector<double> probs = forgery_probabilities(logits.value());
    for (size_t i = 0; i < labels.size(); ++i)
      correct += ((probs[i] >= 0.5 ? 1 : 0) == labels[i]);
  }
  return {loss_sum / static_cast<double>(clips.size()),
          static_cast<double>(correct) / static_cast<double>(clips.size())};
}

TrainResult train_model(const std::string& manifest_path, const TrainConfig& cfg,
                        const std::string& out_dir) {
  cfg.validate();
  std::vector<LoadedClip> train_clips = load_clips(manifest_path, "train");
  if (train_clips.empty()) throw ValidationError("train split is empty");
  bool has_real = false, has_fake = false;
  for (const auto& c : train_clips) (c.label ? has_fake : has_real) = true;
  if (!has_real || !has_fake)
    throw ValidationError("train split must contain both classes (real and fake clips)");
  std::vector<LoadedClip> val_clips = load_clips(manifest_path, "val");
  bool has_val = !val_clips.empty();

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir + ": " + ec.message());

  ModelParams<float> params;
  params.init(make_model_config(cfg, train_clips.front()));
  ParamList<float> plist = params.named_params();
  Adam<float> opt(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  CounterRng shuffle_rng = CounterRng(cfg.seed).split("shuffle");

  TrainResult result;
  std::vector<std::string> log_lines;
  auto eval_val = [&](EpochLog* entry) {
    if (!has_val) return;
    std::vector<double> scores = score_clips(params, val_clips, cfg.batch_size);
    std::vector<int> labels;
    for (const auto& c : val_clips) labels.push_back(c.label);
    entry->has_val = true;
    entry->val_auc = compute_auc(scores, labels);
    entry->val_acc = compute_acc(scores, labels);
  };
  auto log_entry = [&](const EpochLog& e) {
    std::string line = (e.epoch == 0 ? std::string("initial") : "epoch=" + std::to_string(e.epoch));
    line += " train_loss=" + fmt6(e.train_loss) + " train_acc=" + fmt6(e.train_acc);
    if (e.has_val) line += " val_auc=" + fmt6(e.val_auc) + " val_acc=" + fmt6(e.val_acc);
    log_lines.push_back(line);
    result.log.push_back(e);
  };

  EpochLog initial;
  initial.epoch = 0;
  std::tie(initial.train_loss, initial.train_acc) =
      dataset_loss_acc(params, train_clips, cfg.batch_size);
  eval_val(&initial);
  log_entry(initial);

  double best_auc = -1.0;
  int64_t best_epoch = -1;
  std::vector<Tensor<float>> best_values;
  auto snapshot = [&]() {
    best_values.clear();
    for (auto& [name, p] : plist) best_values.push_back(copy_tensor(p.value()));
  };
  if (has_val && initial.val_auc > best_auc) {
    best_auc = initial.val_auc;
    best_epoch = 0;
    snapshot();
  }

  std::vector<size_t> order(train_clips.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    CounterRng epoch_rng = shuffle_rng.split(static_cast<uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epoch_rng.next_below(i)]);

    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      Tensor<float> vb, ab;
      std::vector<int> labels;
      make_batch(train_clips, order, begin, end, &vb, &ab, &labels);
      Var<float> logits =
          model_forward(Var<float>(std::move(vb)), Var<float>(std::move(ab)), params);
      Var<float> loss = model_loss(logits, labels);
      for (auto& [name, p] : plist) p.zero_grad();
      backward(loss);
      opt.step(plist);
    }

    EpochLog entry;
    entry.epoch = epoch;
    std::tie(entry.train_loss, entry.train_acc) =
        dataset_loss_acc(params, train_clips, cfg.batch_size);
    eval_val(&entry);
    log_entry(entry);
    if (has_val && entry.val_auc > best_auc) {
      best_auc = entry.val_auc;
      best_epoch = epoch;
      snapshot();
    }
  }

  if (has_val) {
    for (size_t i = 0; i < plist.size(); ++i) plist[i].second.mutable_value() = best_values[i];
    result.best_epoch = best_epoch;
    result.best_val_auc = best_auc;
  }

  result.checkpoint_dir = (fs::path(out_dir) / "checkpoint").string();
  save_checkpoint(result.checkpoint_dir, params, fs::absolute(manifest_path).string());

  result.log_path = (fs::path(out_dir) / "train_log.txt").string();
  std::ofstream log_out(result.log_path, std::ios::binary);
  if (!log_out) throw IoError("cannot write training log: " + result.log_path);
  for (const auto& line : log_lines) log_out << line << "\n";
  if (has_val) log_out << "best epoch=" << best_epoch << " val_auc=" << fmt6(best_auc) << "\n";
  if (!log_out) throw IoError("training log write failed: " + result.log_path);
  return result;
}

json EvalReport::to_json() const {
  return json{{"auc", auc},
              {"acc", acc},
              {"n_samples", n_samples},
              {"per_method", per_method},
              {"seed", seed},
              {"config", config_echo}};
}

EvalReport evaluate_params(ModelParams<float>& params, const std::vector<LoadedClip>& clips) {
  if (clips.empty()) throw ValidationError("evaluate: split is empty");
  std::vector<double> scores = score_clips(params, clips, 8);
  std::vector<int> labels;
  for (const auto& c : clips) labels.push_back(c.label);

  EvalReport report;
  report.n_samples = static_cast<int64_t>(clips.size());
  report.auc = compute_auc(scores, labels);
  report.acc = compute_acc(scores, labels);
  report.seed = params.cfg.seed;
  report.config_echo = model_config_to_json(params.cfg);

  // Per-method: accuracy within the method; for fake methods also the AUC of
  // that method's clips against all real clips.
  std::vector<std::string> methods;
  for (const auto& c : clips)
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
      methods.push_back(c.method);
  std::sort(methods.begin(), methods.end());
  json per_method = json::object();
  for (const auto& m : methods) {
    std::vector<double> ms, vs_real;
    std::vector<int> ml, vs_real_labels;
    for (size_t i = 0; i < clips.size(); ++i) {
      if (clips[i].method == m) {
        ms.push_back(scores[i]);
        ml.push_back(labels[i]);
      }
      if (clips[i].method == m || clips[i].method == "real") {
        vs_real.push_back(scores[i]);
        vs_real_labels.push_back(labels[i]);
      }
    }
    json entry = {{"n", ms.size()}, {"acc", compute_acc(ms, ml)}};
    if (m != "real") {
      bool any_real = vs_real.size() > ms.size();
      if (any_real) entry["auc_vs_real"] = compute_auc(vs_real, vs_real_labels);
    }
    per_method[m] = entry;
  }
  report.per_method = per_method;
  return report;
}

EvalReport evaluate_checkpoint(const std::string& ckpt_dir, const std::string& manifest_path,
                               const std::string& split) {
  ModelParams<float> params = load_checkpoint(ckpt_dir);
  std::vector<LoadedClip> clips = load_clips(manifest_path, split);
  if (clips.empty()) throw ValidationError("evaluate: no clips in split \"" + split + "\"");
  return evaluate_params(params, clips);
}

namespace {

void summarize(AblationRow* row) {
  auto mean_sd = [](const std::vector<double>& xs, double* mean, double* sd) {
    double s = 0.0;
    for (double x : xs) s += x;
    *mean = s / static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - *mean) * (x - *mean);
    *sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
  };
  mean_sd(row->aucs, &row->mean_auc, &row->sd_auc);
  mean_sd(row->accs, &row->mean_acc, &row->sd_acc);
}

}  // namespace

std::vector<AblationRow> run_ablation(const std::string& manifest_path, const TrainConfig& base,
                                      const std::vector<std::pair<std::string, std::string>>& rows,
                                      int64_t n_seeds, const std::string& out_dir) {
  if (rows.empty()) throw ValidationError("ablation: no rows given");
  if (n_seeds < 1) throw ValidationError("ablation: n_seeds must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir + ": " + ec.message());

  std::vector<AblationRow> table;
  for (size_t r = 0; r < rows.size(); ++r) {
    AblationRow row;
    row.variant = rows[r].first;
    row.fusion = rows[r].second;
    parse_variant(row.variant);
    parse_fusion(row.fusion);
    for (int64_t s = 0; s < n_seeds; ++s) {
      TrainConfig cfg = base;
      cfg.variant = row.variant;
      cfg.fusion = row.fusion;
      cfg.seed = base.seed + static_cast<uint64_t>(s);
      std::string run_dir =
          (fs::path(out_dir) / ("row" + std::to_string(r) + "_seed" + std::to_string(cfg.seed)))
              .string();
      TrainResult tr = train_model(manifest_path, cfg, run_dir);
      EvalReport rep = evaluate_checkpoint(tr.checkpoint_dir, manifest_path, "test");
      row.seeds.push_back(cfg.seed);
      row.aucs.push_back(rep.auc);
      row.accs.push_back(rep.acc);
    }
    summarize(&row);
    table.push_back(std::move(row));
  }

  std::ofstream csv(fs::path(out_dir) / "ablation.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write ablation.csv in: " + out_dir);
  csv << "variant,fusion,seed,test_auc,test_acc\n";
  for (const auto& row : table)
    for (size_t i = 0; i < row.seeds.size(); ++i)
      csv << row.variant << "," << row.fusion << "," << row.seeds[i] << "," << fmt6(row.aucs[i])
          << "," << fmt6(row.accs[i]) << "\n";

  std::ofstream txt(fs::path(out_dir) / "ablation.txt", std::ios::binary);
  if (!txt) throw IoError("cannot write ablation.txt in: " + out_dir);
  txt << "variant fusion mean_auc sd_auc mean_acc sd_acc\n";
  for (const auto& row : table)
    txt << row.variant << " " << row.fusion << " " << fmt6(row.mean_auc) << " " << fmt6(row.sd_auc)
        << " " << fmt6(row.mean_acc) << " " << fmt6(row.sd_acc) << "\n";
  return table;
}

Tensor<float> spatial_mask_frames(ModelParams<float>& params, const LoadedClip& clip) {
  NoGradGuard guard;
  AttentionVariant variant = params.cfg.variant;
  if (variant == AttentionVariant::kChaOnly || variant == AttentionVariant::kNone)
    throw ValidationError("variant " + variant_name(variant) + " has no spatial mask to export");

  Shape vs = clip.video.shape();
  Tensor<float> batched = clip.video;
  Var<float> x(Tensor<float>(Shape{1, vs[0], vs[1], vs[2], vs[3]}, std::move(batched.data())));
  Var<float> v = visual_encode(x, params);
  Var<float> m = temporal_difference(channel_reduce(v, params.mam));
  Var<float> mask;
  if (variant == AttentionVariant::kCsa) {
    Var<float> wc = channel_mask(m, params.mam);
    mask = spatial_mask(mul(m, wc), params.mam);
  } else {
    mask = spatial_mask(m, params.mam);  // SCA, CparS (spatial branch), SPA_only
  }
  const Shape& ms = mask.shape();  // (1,T,1,H',W')
  return Tensor<float>(Shape{ms[1], ms[3], ms[4]}, mask.value().data());
}

void export_masks(const std::string& ckpt_dir, const std::string& manifest_path,
                  const std::string& clip_id, const std::string& out_dir) {
  ModelParams<float> params = load_checkpoint(ckpt_dir);
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<ClipManifestRecord> records = load_manifest(manifest_path);
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const ClipManifestRecord& r) { return r.id == clip_id; });
  if (it == records.end()) throw ValidationError("clip id not found in manifest: " + clip_id);

  LoadedClip clip;
  clip.id = it->id;
  clip.method = it->method;
  clip.label = it->label;
  clip.video = load_tensor<float>((base / it->video_path).string());
  clip.audio = load_tensor<float>((base / it->audio_path).string());

  Tensor<float> masks = spatial_mask_frames(params, clip);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir + ": " + ec.message());
  int64_t t_len = masks.extent(0), h = masks.extent(1), w = masks.extent(2);
  for (int64_t t = 0; t < t_len; ++t) {
    Tensor<float> frame(Shape{h, w});
    std::copy(masks.data().begin() + t * h * w, masks.data().begin() + (t + 1) * h * w,
              frame.data().begin());
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_f%02d.pgm", static_cast<int>(t));
    write_pgm((fs::path(out_dir) / (clip_id + suffix)).string(), frame);
  }
}

}  // namespace listenlab
