#include "listenlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "listenlab/common.hpp"
#include "listenlab/manifest.hpp"
#include "listenlab/rng.hpp"
#include "listenlab/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace listenlab {

SynthConfig SynthConfig::from_kv(KvConfig& kv) {
  SynthConfig c;
  c.train_clips = kv.get_i64("train_clips", c.train_clips);
  c.val_clips = kv.get_i64("val_clips", c.val_clips);
  c.test_clips = kv.get_i64("test_clips", c.test_clips);
  c.frames = kv.get_i64("frames", c.frames);
  c.frame_size = kv.get_i64("frame_size", c.frame_size);
  c.audio_tokens = kv.get_i64("audio_tokens", c.audio_tokens);
  c.audio_dim_raw = kv.get_i64("audio_dim_raw", c.audio_dim_raw);
  c.event_rate = kv.get_f64("event_rate", c.event_rate);
  c.reaction_latency = kv.get_i64("reaction_latency", c.reaction_latency);
  c.jitter_fraction = kv.get_f64("jitter_fraction", c.jitter_fraction);
  c.seed = kv.get_u64("seed", c.seed);
  c.validate();
  return c;
}

void SynthConfig::validate() const {
  if (train_clips < 1 || val_clips < 1 || test_clips < 1)
    throw ValidationError("synth config: all clip counts must be >= 1");
  if (frames < 2) throw ValidationError("synth config: frames must be >= 2");
  if (frame_size < 8) throw ValidationError("synth config: frame_size must be >= 8");
  if (audio_tokens < 4) throw ValidationError("synth config: audio_tokens must be >= 4");
  if (audio_dim_raw < 1) throw ValidationError("synth config: audio_dim_raw must be >= 1");
  if (!(event_rate > 0.0)) throw ValidationError("synth config: event_rate must be positive");
  if (reaction_latency < 0) throw ValidationError("synth config: reaction_latency must be >= 0");
  if (jitter_fraction < 0.0 || jitter_fraction > 1.0)
    throw ValidationError("synth config: jitter_fraction must be in [0,1]");
}

namespace {

// Smooth reaction displacement profile: rise over 4 frames, settle over 4.
// Per-frame steps are magnitude/4; the jitter variant concentrates the whole
// magnitude into a single frame instead.
constexpr int kProfileLen = 8;
constexpr double kSmoothProfile[kProfileLen] = {0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0};

struct Reaction {
  int start = 0;      // first affected frame
  bool is_nod = true; // else smile (brightness)
  double magnitude = 0.0;
};

double profile_value(const Reaction& r, int frame, bool jitter) {
  int off = frame - r.start;
  if (off < 0 || off >= kProfileLen) return 0.0;
  if (jitter) return off == 3 ? r.magnitude : 0.0;
  return r.magnitude * kSmoothProfile[off];
}

}  // namespace

ClipMedia synth_clip(const SynthConfig& cfg, const std::string& id, const std::string& method) {
  if (method != "real" && method != "jitter" && method != "decorr")
    throw ValidationError("synth_clip: unknown method: " + method);
  const int64_t T = cfg.frames, H = cfg.frame_size, W = cfg.frame_size;
  const int64_t Ta = cfg.audio_tokens, Da = cfg.audio_dim_raw;

  CounterRng clip_rng = CounterRng(cfg.seed).split(id);

  // Scene: fixed background texture and a head blob, shared by all methods.
  CounterRng scene = clip_rng.split("scene");
  double cy = static_cast<double>(H) / 2.0 + scene.uniform(-2.0, 2.0);
  double cx = static_cast<double>(W) / 2.0 + scene.uniform(-2.0, 2.0);
  double sigma = scene.uniform(5.0, 7.0);
  double blob_amp = scene.uniform(0.5, 0.7);
  Tensor<float> bg = Tensor<float>::zeros({H, W});
  for (int64_t i = 0; i < H * W; ++i)
    bg[i] = static_cast<float>(0.15 + scene.uniform(-0.05, 0.05));

  // Audio: smooth token noise plus salience events. Event count is at least
  // one so every fake clip carries its artifact.
  CounterRng audio_rng = clip_rng.split("audio");
  int n_events = std::max(1, audio_rng.poisson(cfg.event_rate));
  std::vector<int> event_tokens(static_cast<size_t>(n_events));
  std::vector<double> event_amps(static_cast<size_t>(n_events));
  for (int e = 0; e < n_events; ++e) {
    event_tokens[static_cast<size_t>(e)] =
        static_cast<int>(audio_rng.next_below(static_cast<uint64_t>(Ta - 2)));
    event_amps[static_cast<size_t>(e)] = audio_rng.uniform(0.8, 1.2);
  }
  Tensor<float> audio = Tensor<float>::zeros({Ta, Da});
  for (int64_t k = 0; k < Da; ++k) {
    double x = 0.0;
    for (int64_t t = 0; t < Ta; ++t) {
      x = 0.85 * x + 0.08 * audio_rng.normal();
      audio[t * Da + k] = static_cast<float>(x);
    }
  }
  const double kBump[3] = {0.5, 1.0, 0.5};
  for (int e = 0; e < n_events; ++e) {
    int t0 = event_tokens[static_cast<size_t>(e)];
    for (int dt = 0; dt < 3; ++dt)
      for (int64_t k = 0; k < (Da + 1) / 2; ++k)
        audio[(t0 + dt) * Da + k] += static_cast<float>(
            event_amps[static_cast<size_t>(e)] * kBump[dt] / static_cast<double>(1 + k));
  }

  // Reactions: kind and magnitude are drawn per event from the shared clip
  // stream, so a real clip and its jitter twin react identically in
  // everything but temporal shape, and a decorr clip in everything but
  // timing.
  CounterRng reaction_rng = clip_rng.split("reaction");
  CounterRng decorr_rng = clip_rng.split("decorr");
  std::vector<int> event_frames(static_cast<size_t>(n_events));
  std::vector<Reaction> reactions(static_cast<size_t>(n_events));
  std::vector<int> reaction_starts(static_cast<size_t>(n_events));
  for (int e = 0; e < n_events; ++e) {
    int fe = static_cast<int>(
        std::min<int64_t>(T - 1, event_tokens[static_cast<size_t>(e)] * T / Ta));
    event_frames[static_cast<size_t>(e)] = fe;
    Reaction r;
    r.is_nod = reaction_rng.next_double() < 0.5;
    r.magnitude = r.is_nod ? reaction_rng.uniform(1.5, 3.0) : reaction_rng.uniform(0.15, 0.3);
    // Clamp starts so the profile's peak (offset 3) always lands inside the
    // clip; an off-screen peak would let a real clip out-move its jitter twin.
    int max_start = static_cast<int>(std::max<int64_t>(0, T - 4));
    int decorr_start = static_cast<int>(
        decorr_rng.next_below(static_cast<uint64_t>(max_start + 1)));
    r.start = method == "decorr"
                  ? decorr_start
                  : std::min(fe + static_cast<int>(cfg.reaction_latency), max_start);
    reactions[static_cast<size_t>(e)] = r;
    reaction_starts[static_cast<size_t>(e)] = r.start;
  }
  const bool jitter = method == "jitter";

  // Render. Nods translate the blob vertically; smiles brighten the lower
  // face region with a smooth vertical weight.
  const double chan_scale[3] = {1.0, 0.88, 0.75};
  Tensor<float> video = Tensor<float>::zeros({T, 3, H, W});
  for (int64_t t = 0; t < T; ++t) {
    double dy = 0.0, brightness = 0.0;
    for (const Reaction& r : reactions) {
      double v = profile_value(r, static_cast<int>(t), jitter);
      if (r.is_nod)
        dy += v;
      else
        brightness += v;
    }
    for (int64_t y = 0; y < H; ++y) {
      double lower_w = std::clamp((static_cast<double>(y) - cy) / (static_cast<double>(H) / 2.0),
                                  0.0, 1.0);
      for (int64_t x = 0; x < W; ++x) {
        double ry = static_cast<double>(y) - cy - dy;
        double rx = static_cast<double>(x) - cx;
        double blob = blob_amp * std::exp(-(ry * ry + rx * rx) / (2.0 * sigma * sigma));
        double base = bg[y * W + x] + blob + brightness * lower_w;
        for (int64_t c = 0; c < 3; ++c)
          video[((t * 3 + c) * H + y) * W + x] = static_cast<float>(chan_scale[c] * base);
      }
    }
  }

  ClipMedia out;
  out.video = std::move(video);
  out.audio = std::move(audio);
  out.event_frames = std::move(event_frames);
  out.reaction_frames = std::move(reaction_starts);
  return out;
}

double temporal_difference_energy(const Tensor<float>& video) {
  if (video.ndim() < 1 || video.extent(0) < 2)
    throw ValidationError("temporal_difference_energy: need at least 2 frames");
  int64_t T = video.extent(0);
  int64_t per_frame = video.numel() / T;
  double energy = 0.0;
  for (int64_t t = 0; t + 1 < T; ++t)
    for (int64_t i = 0; i < per_frame; ++i) {
      double d = static_cast<double>(video[(t + 1) * per_frame + i]) -
                 static_cast<double>(video[t * per_frame + i]);
      energy += d * d;
    }
  return energy;
}

json SynthStats::to_json() const {
  return json{{"n_real", n_real},
              {"n_jitter", n_jitter},
              {"n_decorr", n_decorr},
              {"td_energy_real", td_energy_real},
              {"td_energy_jitter", td_energy_jitter},
              {"td_energy_decorr", td_energy_decorr},
              {"lag_mean_real", lag_mean_real},
              {"lag_sd_real", lag_sd_real},
              {"lag_mean_decorr", lag_mean_decorr},
              {"lag_sd_decorr", lag_sd_decorr},
              {"jitter_energy_exceeds_real", jitter_energy_exceeds_real},
              {"decorr_energy_matches_real", decorr_energy_matches_real},
              {"decorr_lag_spread_exceeds_real", decorr_lag_spread_exceeds_real}};
}

namespace {

struct LagAccum {
  double sum = 0.0, sum_sq = 0.0;
  int64_t n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double sd() const {
    if (n < 2) return 0.0;
    double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - m * m));
  }
};

std::string pad4(int64_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

SynthStats synth_generate(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "media", ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir + ": " + ec.message());

  SynthStats stats;
  double energy_sum[3] = {0, 0, 0};  // real, jitter, decorr
  LagAccum lag_real, lag_decorr;
  std::vector<ClipManifestRecord> records;

  const struct {
    const char* split;
    int64_t count;
  } splits[] = {{"train", cfg.train_clips}, {"val", cfg.val_clips}, {"test", cfg.test_clips}};

  for (const auto& sp : splits) {
    int64_t fake_ordinal = 0;
    for (int64_t i = 0; i < sp.count; ++i) {
      std::string id = std::string(sp.split) + "_" + pad4(i);
      int label = static_cast<int>(i % 2);
      std::string method = "real";
      if (label == 1) {
        // Deterministic interleave hitting jitter_fraction exactly.
        auto quota = [&](int64_t j) {
          return static_cast<int64_t>(std::floor(static_cast<double>(j) * cfg.jitter_fraction));
        };
        method = quota(fake_ordinal + 1) > quota(fake_ordinal) ? "jitter" : "decorr";
        ++fake_ordinal;
      }

      ClipMedia media = synth_clip(cfg, id, method);
      double energy = temporal_difference_energy(media.video);
      if (method == "real") {
        ++stats.n_real;
        energy_sum[0] += energy;
      } else if (method == "jitter") {
        ++stats.n_jitter;
        energy_sum[1] += energy;
      } else {
        ++stats.n_decorr;
        energy_sum[2] += energy;
      }
      LagAccum* lag = method == "real" ? &lag_real : (method == "decorr" ? &lag_decorr : nullptr);
      if (lag)
        for (size_t e = 0; e < media.event_frames.size(); ++e)
          lag->add(static_cast<double>(media.reaction_frames[e] - media.event_frames[e]));

      std::string vid_rel = "media/" + id + "_video.mtns";
      std::string aud_rel = "media/" + id + "_audio.mtns";
      save_tensor((fs::path(out_dir) / vid_rel).string(), media.video);
      save_tensor((fs::path(out_dir) / aud_rel).string(), media.audio);

      ClipManifestRecord rec;
      rec.id = id;
      rec.video_path = vid_rel;
      rec.audio_path = aud_rel;
      rec.label = label;
      rec.method = method;
      rec.duration_s = static_cast<double>(cfg.frames) / 8.0;  // 8 notional fps
      rec.split = sp.split;
      records.push_back(std::move(rec));
    }
  }

  stats.td_energy_real = stats.n_real ? energy_sum[0] / stats.n_real : 0.0;
  stats.td_energy_jitter = stats.n_jitter ? energy_sum[1] / stats.n_jitter : 0.0;
  stats.td_energy_decorr = stats.n_decorr ? energy_sum[2] / stats.n_decorr : 0.0;
  stats.lag_mean_real = lag_real.mean();
  stats.lag_sd_real = lag_real.sd();
  stats.lag_mean_decorr = lag_decorr.mean();
  stats.lag_sd_decorr = lag_decorr.sd();
  stats.jitter_energy_exceeds_real = stats.td_energy_jitter > stats.td_energy_real;
  stats.decorr_energy_matches_real =
      stats.td_energy_real > 0.0 && stats.td_energy_decorr > 0.5 * stats.td_energy_real &&
      stats.td_energy_decorr < 2.0 * stats.td_energy_real;
  stats.decorr_lag_spread_exceeds_real = stats.lag_sd_decorr > stats.lag_sd_real + 0.5;

  ManifestHeader header;
  header.version = 1;
  header.seed = cfg.seed;
  header.stats = stats.to_json();
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), header, records);
  return stats;
}

}  // namespace listenlab
