#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "listenlab/config.hpp"
#include "listenlab/manifest.hpp"
#include "listenlab/model.hpp"

namespace listenlab {

// Training hyperparameters plus the model hyperparameters the CLI exposes.
// Frame extents and the raw audio dim are inferred from the data.
struct TrainConfig {
  double lr = 1e-4;
  int64_t batch_size = 8;
  int64_t epochs = 200;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::string variant = "SCA";
  std::string fusion = "agm";
  uint64_t seed = 1;

  int64_t channels = 16;
  int64_t reduce_ratio = 4;
  int64_t bottleneck_ratio = 4;
  int64_t spa_hidden = 8;
  int64_t d_model = 64;
  int64_t heads = 4;
  int64_t ffn_hidden = 256;
  int64_t audio_dim = 32;
  bool positional_encoding = true;

  static TrainConfig from_kv(KvConfig& kv);
  void validate() const;
};

// A clip with its media loaded into memory.
struct LoadedClip {
  std::string id;
  std::string method;
  int label = 0;
  Tensor<float> video;  // (T, 3, H, W)
  Tensor<float> audio;  // (T_a, d_a_raw)
};

// Loads every record of one split, resolving media paths relative to the
// manifest's directory. Missing media raise IoError naming the clip id.
std::vector<LoadedClip> load_clips(const std::string& manifest_path, const std::string& split);

struct EpochLog {
  int64_t epoch = 0;  // 0 = pre-training state
  double train_loss = 0.0, train_acc = 0.0;
  bool has_val = false;
  double val_auc = 0.0, val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;  // entry 0 is the initial (untrained) state
  int64_t best_epoch = -1;    // -1 when there is no val split
  double best_val_auc = 0.0;
  std::string checkpoint_dir;
  std::string log_path;
};

// Epoch loop with seeded shuffling and per-step Adam on the cross-entropy
// objective. Metrics in the log are end-of-epoch passes at fixed parameters.
// Saves the best-val-AUC parameters (ties to the earliest epoch) under
// out_dir/checkpoint, or the final parameters when no val split exists, and
// writes out_dir/train_log.txt. Deterministic given the seed.
TrainResult train_model(const std::string& manifest_path, const TrainConfig& cfg,
                        const std::string& out_dir);

struct EvalReport {
  double auc = 0.0, acc = 0.0;
  int64_t n_samples = 0;
  nlohmann::json per_method;
  uint64_t seed = 0;
  nlohmann::json config_echo;

  nlohmann::json to_json() const;
};

// Forgery probabilities for a set of clips at fixed parameters (no tape).
std::vector<double> score_clips(ModelParams<float>& params, const std::vector<LoadedClip>& clips,
                                int64_t batch_size);

// Mean cross-entropy and accuracy of a clip set at fixed parameters.
std::pair<double, double> dataset_loss_acc(ModelParams<float>& params,
                                           const std::vector<LoadedClip>& clips,
                                           int64_t batch_size);

EvalReport evaluate_params(ModelParams<float>& params, const std::vector<LoadedClip>& clips);
EvalReport evaluate_checkpoint(const std::string& ckpt_dir, const std::string& manifest_path,
                               const std::string& split);

struct AblationRow {
  std::string variant, fusion;
  std::vector<uint64_t> seeds;
  std::vector<double> aucs, accs;  // test metrics, one per seed
  double mean_auc = 0.0, sd_auc = 0.0, mean_acc = 0.0, sd_acc = 0.0;
};

// Trains and test-evaluates every (variant, fusion) row over the same seed
// set; writes ablation.csv and ablation.txt under out_dir.
std::vector<AblationRow> run_ablation(const std::string& manifest_path, const TrainConfig& base,
                                      const std::vector<std::pair<std::string, std::string>>& rows,
                                      int64_t n_seeds, const std::string& out_dir);

// Writes the per-frame spatial attention mask of one clip as P5 PGM files
// <out_dir>/<clip_id>_f<NN>.pgm (one per frame). Only variants with a
// spatial mask are supported.
void export_masks(const std::string& ckpt_dir, const std::string& manifest_path,
                  const std::string& clip_id, const std::string& out_dir);

// The same masks as a (T, H', W') tensor, for tests.
Tensor<float> spatial_mask_frames(ModelParams<float>& params, const LoadedClip& clip);

}  // namespace listenlab
