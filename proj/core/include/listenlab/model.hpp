#pragma once

#include <string>
#include <vector>

#include "listenlab/agm.hpp"
#include "listenlab/mam.hpp"
#include "listenlab/ops.hpp"

namespace listenlab {

enum class FusionMode { kAgm, kConcat, kVisualOnly };

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "agm") return FusionMode::kAgm;
  if (s == "concat") return FusionMode::kConcat;
  if (s == "visual_only") return FusionMode::kVisualOnly;
  throw ValidationError("unknown fusion mode: " + s);
}

inline std::string fusion_name(FusionMode f) {
  switch (f) {
    case FusionMode::kAgm: return "agm";
    case FusionMode::kConcat: return "concat";
    case FusionMode::kVisualOnly: return "visual_only";
  }
  return "agm";
}

// Every hyperparameter of the detector, with desk-scale defaults.
struct ModelConfig {
  int64_t in_channels = 3;
  int64_t frame_h = 32;
  int64_t frame_w = 32;
  int64_t channels = 16;        // visual feature channels C
  int64_t reduce_ratio = 4;
  int64_t bottleneck_ratio = 4;
  int64_t spa_hidden = 8;
  int64_t d_model = 64;
  int64_t heads = 4;
  int64_t ffn_hidden = 256;
  int64_t audio_dim_raw = 8;
  int64_t audio_dim = 32;
  bool positional_encoding = true;
  AttentionVariant variant = AttentionVariant::kSca;
  FusionMode fusion = FusionMode::kAgm;
  uint64_t seed = 1;

  int64_t classifier_input_dim() const {
    switch (fusion) {
      case FusionMode::kAgm: return d_model;
      case FusionMode::kConcat: return d_model + audio_dim;
      case FusionMode::kVisualOnly: return d_model;
    }
    return d_model;
  }
};

// The detector: compact trainable encoders, the motion attention block, the
// audio-guided fusion block, and a linear two-logit classification head.
template <typename T>
struct ModelParams {
  ModelConfig cfg;

  Var<T> enc_w1, enc_b1;  // (C, 3, 3, 3), (C); stride-2
  Var<T> enc_w2, enc_b2;  // (C, C, 3, 3), (C); stride-2
  Var<T> aud_w, aud_b;    // (d_a_raw, d_a), (d_a)
  MamParams<T> mam;
  AgmParams<T> agm;
  Var<T> cls_w, cls_b;    // (classifier_input_dim, 2), (2); zero-initialized

  void init(const ModelConfig& c) {
    cfg = c;
    CounterRng rng(c.seed);
    int64_t ch = c.channels;
    enc_w1 = Var<T>(xavier_uniform<T>({ch, c.in_channels, 3, 3}, c.in_channels * 9, ch * 9,
                                      rng.split("enc_w1")),
                    true);
    enc_b1 = Var<T>(Tensor<T>::zeros({ch}), true);
    enc_w2 = Var<T>(xavier_uniform<T>({ch, ch, 3, 3}, ch * 9, ch * 9, rng.split("enc_w2")), true);
    enc_b2 = Var<T>(Tensor<T>::zeros({ch}), true);
    aud_w = Var<T>(xavier_uniform<T>({c.audio_dim_raw, c.audio_dim}, c.audio_dim_raw, c.audio_dim,
                                     rng.split("aud_w")),
                   true);
    aud_b = Var<T>(Tensor<T>::zeros({c.audio_dim}), true);
    mam.init(ch, c.reduce_ratio, c.bottleneck_ratio, c.spa_hidden, rng.split("mam"));
    agm.init(ch, c.audio_dim, c.d_model, c.heads, c.ffn_hidden, c.positional_encoding,
             rng.split("agm"));
    // Zero classifier: untrained models predict exactly 0.5.
    cls_w = Var<T>(Tensor<T>::zeros({c.classifier_input_dim(), 2}), true);
    cls_b = Var<T>(Tensor<T>::zeros({2}), true);
  }

  ParamList<T> named_params() {
    ParamList<T> out;
    out.emplace_back("enc_w1", enc_w1);
    out.emplace_back("enc_b1", enc_b1);
    out.emplace_back("enc_w2", enc_w2);
    out.emplace_back("enc_b2", enc_b2);
    out.emplace_back("aud_w", aud_w);
    out.emplace_back("aud_b", aud_b);
    mam.collect("mam.", &out);
    agm.collect("agm.", &out);
    out.emplace_back("cls_w", cls_w);
    out.emplace_back("cls_b", cls_b);
    return out;
  }
};

// Two stride-2 convolutions with relu: (N,T,3,H,W) -> (N,T,C,H/4,W/4).
template <typename T>
Var<T> visual_encode(const Var<T>& x, const ModelParams<T>& p) {
  const Shape& s = x.shape();
  if (s.size() != 5)
    throw ValidationError("visual_encode: expected (N,T,C,H,W), got " + shape_str(s));
  if (s[2] != p.cfg.in_channels || s[3] != p.cfg.frame_h || s[4] != p.cfg.frame_w)
    throw ValidationError("visual_encode: frame extents " + shape_str(s) +
                          " do not match the configured " + std::to_string(p.cfg.in_channels) +
                          "x" + std::to_string(p.cfg.frame_h) + "x" + std::to_string(p.cfg.frame_w));
  Var<T> h = reshape(x, {s[0] * s[1], s[2], s[3], s[4]});
  h = conv2d(h, p.enc_w1, Padding::kSame, 2);
  h = relu(add(h, reshape(p.enc_b1, {1, p.cfg.channels, 1, 1})));
  h = conv2d(h, p.enc_w2, Padding::kSame, 2);
  h = relu(add(h, reshape(p.enc_b2, {1, p.cfg.channels, 1, 1})));
  const Shape& hs = h.shape();
  return reshape(h, {s[0], s[1], hs[1], hs[2], hs[3]});
}

// Linear projection of pre-framed audio features to d_a tokens.
template <typename T>
Var<T> audio_encode(const Var<T>& x, const ModelParams<T>& p) {
  if (x.value().ndim() != 3)
    throw ValidationError("audio_encode: expected (N,T_a,d), got " + shape_str(x.shape()));
  return linear(x, p.aud_w, p.aud_b);
}

// Full forward pass to two class logits (fake-class index = 1).
template <typename T>
Var<T> model_forward(const Var<T>& x_video, const Var<T>& x_audio, ModelParams<T>& p) {
  Var<T> v = visual_encode(x_video, p);
  Var<T> v2 = apply_mam(v, p.cfg.variant, p.mam);
  Var<T> features;
  switch (p.cfg.fusion) {
    case FusionMode::kAgm: {
      Var<T> a = audio_encode(x_audio, p);
      Var<T> fused = agm_block(v2, a, p.agm);  // (N,T_a,d)
      features = reduce_mean(fused, {1});
      break;
    }
    case FusionMode::kConcat: {
      Var<T> a = audio_encode(x_audio, p);
      Var<T> tv = reduce_mean(tokenize_visual(v2, p.agm), {1});  // (N,d)
      Var<T> ta = reduce_mean(a, {1});                           // (N,d_a)
      features = concat_last(tv, ta);
      break;
    }
    case FusionMode::kVisualOnly: {
      features = reduce_mean(tokenize_visual(v2, p.agm), {1});
      break;
    }
  }
  return linear(features, p.cls_w, p.cls_b);  // (N,2)
}

// Forgery probability per clip from logits.
template <typename T>
std::vector<double> forgery_probabilities(const Tensor<T>& logits) {
  std::vector<double> out(static_cast<size_t>(logits.extent(0)));
  for (int64_t i = 0; i < logits.extent(0); ++i) {
    double z0 = logits[i * 2], z1 = logits[i * 2 + 1];
    double mx = std::max(z0, z1);
    double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
    out[static_cast<size_t>(i)] = e1 / (e0 + e1);
  }
  return out;
}

template <typename T>
Var<T> model_loss(const Var<T>& logits, const std::vector<int>& labels) {
  for (int y : labels)
    if (y != 0 && y != 1) throw ValidationError("label must be 0 or 1, got " + std::to_string(y));
  return cross_entropy_with_logits(logits, labels);
}

}  // namespace listenlab
