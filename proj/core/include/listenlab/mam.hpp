#pragma once

#include <string>
#include <utility>
#include <vector>

#include "listenlab/ops.hpp"
#include "listenlab/rng.hpp"

namespace listenlab {

// Arrangement of the spatial and channel masks derived from frame-difference
// features: sequential (either order), parallel summed-logit, single-mask, or
// disabled.
enum class AttentionVariant { kSca, kCsa, kCparS, kSpaOnly, kChaOnly, kNone };

inline AttentionVariant parse_variant(const std::string& s) {
  if (s == "SCA" || s == "sca") return AttentionVariant::kSca;
  if (s == "CSA" || s == "csa") return AttentionVariant::kCsa;
  if (s == "CparS" || s == "cpars" || s == "C//S") return AttentionVariant::kCparS;
  if (s == "SPA_only" || s == "spa_only") return AttentionVariant::kSpaOnly;
  if (s == "CHA_only" || s == "cha_only") return AttentionVariant::kChaOnly;
  if (s == "none") return AttentionVariant::kNone;
  throw ValidationError("unknown attention variant: " + s);
}

inline std::string variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::kSca: return "SCA";
    case AttentionVariant::kCsa: return "CSA";
    case AttentionVariant::kCparS: return "CparS";
    case AttentionVariant::kSpaOnly: return "SPA_only";
    case AttentionVariant::kChaOnly: return "CHA_only";
    case AttentionVariant::kNone: return "none";
  }
  return "none";
}

template <typename T>
Tensor<T> xavier_uniform(Shape shape, int64_t fan_in, int64_t fan_out, CounterRng rng,
                         double gain = 1.0) {
  double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

template <typename T>
using ParamList = std::vector<std::pair<std::string, Var<T>>>;

// Parameters of the motion attention block: 1x1 channel compression, the
// two-layer spatial conv stack, the bottleneck channel gate, and the 1x1
// expansion used only by the parallel variant.
template <typename T>
struct MamParams {
  int64_t channels = 16;        // C of the incoming visual features
  int64_t reduce_ratio = 4;     // r: 1x1 compression C -> C/r
  int64_t bottleneck_ratio = 4; // r_b of the channel gate
  int64_t spa_hidden = 8;

  Var<T> reduce_w;              // (C/r, C, 1, 1)
  Var<T> spa_w1, spa_b1;        // (hidden, 1, 3, 3), (hidden)
  Var<T> spa_w2, spa_b2;        // (1, hidden, 3, 3), (1)
  Var<T> cha_w0, cha_b0;        // (C', hb), (hb)
  Var<T> cha_w1, cha_b1;        // (hb, C'), (C')
  Var<T> expand_w, expand_b;    // (C, C', 1, 1), (C) -- CparS only

  int64_t reduced_channels() const { return channels / reduce_ratio; }
  int64_t gate_hidden() const { return std::max<int64_t>(1, reduced_channels() / bottleneck_ratio); }

  void init(int64_t c, int64_t r, int64_t rb, int64_t hidden, CounterRng rng) {
    if (c % r != 0)
      throw ValidationError("channel reduction: C=" + std::to_string(c) +
                            " not divisible by r=" + std::to_string(r));
    channels = c;
    reduce_ratio = r;
    bottleneck_ratio = rb;
    spa_hidden = hidden;
    int64_t cr = reduced_channels();
    int64_t hb = gate_hidden();
    reduce_w = Var<T>(xavier_uniform<T>({cr, c, 1, 1}, c, cr, rng.split("mam.reduce_w")), true);
    spa_w1 = Var<T>(xavier_uniform<T>({hidden, 1, 3, 3}, 9, hidden * 9, rng.split("mam.spa_w1")), true);
    spa_b1 = Var<T>(Tensor<T>::zeros({hidden}), true);
    spa_w2 = Var<T>(xavier_uniform<T>({1, hidden, 3, 3}, hidden * 9, 9, rng.split("mam.spa_w2")), true);
    spa_b2 = Var<T>(Tensor<T>::zeros({1}), true);
    cha_w0 = Var<T>(xavier_uniform<T>({cr, hb}, cr, hb, rng.split("mam.cha_w0")), true);
    cha_b0 = Var<T>(Tensor<T>::zeros({hb}), true);
    cha_w1 = Var<T>(xavier_uniform<T>({hb, cr}, hb, cr, rng.split("mam.cha_w1")), true);
    cha_b1 = Var<T>(Tensor<T>::zeros({cr}), true);
    expand_w = Var<T>(xavier_uniform<T>({c, cr, 1, 1}, cr, c, rng.split("mam.expand_w")), true);
    expand_b = Var<T>(Tensor<T>::zeros({c}), true);
  }

  void collect(const std::string& prefix, ParamList<T>* out) {
    out->emplace_back(prefix + "reduce_w", reduce_w);
    out->emplace_back(prefix + "spa_w1", spa_w1);
    out->emplace_back(prefix + "spa_b1", spa_b1);
    out->emplace_back(prefix + "spa_w2", spa_w2);
    out->emplace_back(prefix + "spa_b2", spa_b2);
    out->emplace_back(prefix + "cha_w0", cha_w0);
    out->emplace_back(prefix + "cha_b0", cha_b0);
    out->emplace_back(prefix + "cha_w1", cha_w1);
    out->emplace_back(prefix + "cha_b1", cha_b1);
    out->emplace_back(prefix + "expand_w", expand_w);
    out->emplace_back(prefix + "expand_b", expand_b);
  }
};

namespace detail {

// Run a per-frame conv over (N, T, C, H, W) by folding time into the batch.
template <typename T>
Var<T> framewise_conv(const Var<T>& v, const Var<T>& w, const Var<T>& b, Padding pad) {
  const Shape& s = v.shape();
  Var<T> x = reshape(v, {s[0] * s[1], s[2], s[3], s[4]});
  Var<T> y = conv2d(x, w, pad);
  y = add(y, reshape(b, {1, b.numel(), 1, 1}));
  const Shape& ys = y.shape();
  return reshape(y, {s[0], s[1], ys[1], ys[2], ys[3]});
}

}  // namespace detail

// 1x1 compression of the channel axis by the reduction ratio, per frame.
template <typename T>
Var<T> channel_reduce(const Var<T>& v, const MamParams<T>& p) {
  const Shape& s = v.shape();
  if (s.size() != 5)
    throw ValidationError("channel_reduce: expected (N,T,C,H,W), got " + shape_str(s));
  if (s[2] != p.channels || p.channels % p.reduce_ratio != 0)
    throw ValidationError("channel_reduce: C=" + std::to_string(s[2]) +
                          " incompatible with reduction ratio " + std::to_string(p.reduce_ratio));
  Var<T> x = reshape(v, {s[0] * s[1], s[2], s[3], s[4]});
  Var<T> y = conv2d(x, p.reduce_w, Padding::kValid);
  return reshape(y, {s[0], s[1], p.reduced_channels(), s[3], s[4]});
}

// Adjacent-frame difference, zero-padded at the final slot.
template <typename T>
Var<T> temporal_difference(const Var<T>& vr) {
  if (vr.value().ndim() != 5)
    throw ValidationError("temporal_difference: expected (N,T,C,H,W), got " +
                          shape_str(vr.shape()));
  return temporal_diff_pad(vr);
}

// Channel-mean descriptor followed by the conv stack; pre-sigmoid logits,
// shape (N, T, 1, H, W).
template <typename T>
Var<T> spatial_logits(const Var<T>& m, const MamParams<T>& p) {
  const Shape& s = m.shape();
  Var<T> desc = reduce_mean(m, {2});                       // (N,T,H,W)
  desc = reshape(desc, {s[0] * s[1], 1, s[3], s[4]});
  Var<T> h = conv2d(desc, p.spa_w1, Padding::kSame);
  h = relu(add(h, reshape(p.spa_b1, {1, p.spa_hidden, 1, 1})));
  Var<T> logits = conv2d(h, p.spa_w2, Padding::kSame);
  logits = add(logits, reshape(p.spa_b2, {1, 1, 1, 1}));
  return reshape(logits, {s[0], s[1], 1, s[3], s[4]});
}

template <typename T>
Var<T> spatial_mask(const Var<T>& m, const MamParams<T>& p) {
  return sigmoid(spatial_logits(m, p));
}

// Spatial-mean descriptor through the bottleneck gate; pre-sigmoid logits,
// shape (N, T, C', 1, 1).
template <typename T>
Var<T> channel_logits(const Var<T>& m, const MamParams<T>& p) {
  const Shape& s = m.shape();
  Var<T> z = reduce_mean(m, {3, 4});                       // (N,T,C')
  z = reshape(z, {s[0] * s[1], s[2]});
  Var<T> h = relu(linear(z, p.cha_w0, p.cha_b0));
  Var<T> logits = linear(h, p.cha_w1, p.cha_b1);
  return reshape(logits, {s[0], s[1], s[2], 1, 1});
}

template <typename T>
Var<T> channel_mask(const Var<T>& m, const MamParams<T>& p) {
  return sigmoid(channel_logits(m, p));
}

// Expand a reduced-channel gate (N,T,C',1,1) to the full channel count by
// repeating each gate over its r-sized channel group.
template <typename T>
Var<T> expand_gate(const Var<T>& gate, const MamParams<T>& p) {
  return repeat_axis(gate, 2, p.reduce_ratio);
}

// Apply the motion attention block to visual features (N,T,C,H,W).
//
// Sequential variants recompute the second mask's descriptor from the
// first-stage-modulated motion features, which is what makes the order
// observable. With raw_descriptors = true (diagnostic only) both masks come
// from the raw difference features and are combined into a single mask before
// application, so SCA and CSA coincide exactly.
template <typename T>
Var<T> apply_mam(const Var<T>& v, AttentionVariant variant, const MamParams<T>& p,
                 bool raw_descriptors = false) {
  if (variant == AttentionVariant::kNone) return v;
  Var<T> vr = channel_reduce(v, p);
  Var<T> m = temporal_difference(vr);

  switch (variant) {
    case AttentionVariant::kSca: {
      Var<T> ws = spatial_mask(m, p);
      if (raw_descriptors) {
        Var<T> wc = expand_gate(channel_mask(m, p), p);
        return mul(v, mul(ws, wc));
      }
      Var<T> v1 = mul(v, ws);
      Var<T> m2 = mul(m, ws);
      Var<T> wc = expand_gate(channel_mask(m2, p), p);
      return mul(v1, wc);
    }
    case AttentionVariant::kCsa: {
      Var<T> wc = channel_mask(m, p);
      if (raw_descriptors) {
        Var<T> ws = spatial_mask(m, p);
        return mul(v, mul(expand_gate(wc, p), ws));
      }
      Var<T> v1 = mul(v, expand_gate(wc, p));
      Var<T> m2 = mul(m, wc);
      Var<T> ws = spatial_mask(m2, p);
      return mul(v1, ws);
    }
    case AttentionVariant::kCparS: {
      Var<T> joint = add(spatial_logits(m, p), channel_logits(m, p));  // (N,T,C',H,W)
      const Shape& js = joint.shape();
      Var<T> x = reshape(joint, {js[0] * js[1], js[2], js[3], js[4]});
      Var<T> expanded = conv2d(x, p.expand_w, Padding::kValid);
      expanded = add(expanded, reshape(p.expand_b, {1, p.channels, 1, 1}));
      Var<T> mask = sigmoid(reshape(expanded, {js[0], js[1], p.channels, js[3], js[4]}));
      return mul(v, mask);
    }
    case AttentionVariant::kSpaOnly:
      return mul(v, spatial_mask(m, p));
    case AttentionVariant::kChaOnly:
      return mul(v, expand_gate(channel_mask(m, p), p));
    case AttentionVariant::kNone:
      break;
  }
  return v;
}

}  // namespace listenlab
