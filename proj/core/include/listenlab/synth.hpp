#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "listenlab/config.hpp"
#include "listenlab/tensor.hpp"

namespace listenlab {

// Knobs of the synthetic listener-clip generator.
struct SynthConfig {
  int64_t train_clips = 64;
  int64_t val_clips = 16;
  int64_t test_clips = 16;
  int64_t frames = 16;        // T, video frames per clip
  int64_t frame_size = 32;    // square frames
  int64_t audio_tokens = 24;  // T_a
  int64_t audio_dim_raw = 8;  // feature dim per audio token
  double event_rate = 2.0;    // expected salience events per clip
  int64_t reaction_latency = 2;  // frames between event and genuine reaction
  double jitter_fraction = 0.5;  // of fakes; remainder are decorrelated fakes
  uint64_t seed = 1;

  static SynthConfig from_kv(KvConfig& kv);
  void validate() const;
};

// One generated clip plus the ground-truth event/reaction timing used to
// build it (timing is exposed for the separability statistics and tests;
// it is never written to the manifest).
struct ClipMedia {
  Tensor<float> video;  // (T, 3, H, W)
  Tensor<float> audio;  // (T_a, d_a_raw)
  std::vector<int> event_frames;     // frame-mapped salience event times
  std::vector<int> reaction_frames;  // reaction start frames actually used
};

// Generates a single clip for a given id and method ("real", "jitter",
// "decorr"). The per-clip stream is keyed by (master seed, id), so the same
// id regenerates bit-exactly in isolation, and the real/jitter pair for one
// id shares its scene, audio, events, and reaction magnitudes.
ClipMedia synth_clip(const SynthConfig& cfg, const std::string& id, const std::string& method);

// Sum over t of the squared frame difference — the motion-energy statistic
// the generator's separability precondition is stated in.
double temporal_difference_energy(const Tensor<float>& video);

// Per-method separability statistics computed at generation time.
struct SynthStats {
  int64_t n_real = 0, n_jitter = 0, n_decorr = 0;
  double td_energy_real = 0.0, td_energy_jitter = 0.0, td_energy_decorr = 0.0;  // means
  double lag_mean_real = 0.0, lag_sd_real = 0.0;      // reaction minus event frame
  double lag_mean_decorr = 0.0, lag_sd_decorr = 0.0;
  bool jitter_energy_exceeds_real = false;
  bool decorr_energy_matches_real = false;  // means within a factor of 2
  bool decorr_lag_spread_exceeds_real = false;

  nlohmann::json to_json() const;
};

// Writes media/<id>_{video,audio}.mtns and manifest.jsonl under out_dir.
// Labels alternate within each split (balance within 1); fakes alternate
// between jitter and decorr at the configured fraction. Deterministic:
// the same config yields byte-identical output.
SynthStats synth_generate(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace listenlab
