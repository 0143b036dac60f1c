#pragma once

#include <string>

#include "listenlab/mam.hpp"
#include "listenlab/ops.hpp"

namespace listenlab {

// Audio-guided fusion: temporal self-attention over per-frame visual tokens,
// then asymmetric cross-attention with speaker-audio queries, then a
// feed-forward layer. Residual connections and layer normalization follow
// each attention and feed-forward stage.
template <typename T>
struct AgmParams {
  int64_t d_model = 64;
  int64_t heads = 4;
  int64_t ffn_hidden = 256;
  int64_t visual_channels = 16;  // C of the masked visual features
  int64_t audio_dim = 32;        // d_a of the audio tokens
  bool positional_encoding = true;

  Var<T> tok_w, tok_b;                    // (C, d), (d)
  Var<T> sa_wq, sa_wk, sa_wv, sa_wo;      // (d, d) each, bias-free
  Var<T> sa_ln_g, sa_ln_b;
  Var<T> ca_wq;                           // (d_a, d)
  Var<T> ca_wk, ca_wv;                    // (d, d)
  Var<T> ca_ln_g, ca_ln_b;
  Var<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;  // (d, f), (f), (f, d), (d)
  Var<T> ffn_ln_g, ffn_ln_b;

  void init(int64_t c, int64_t da, int64_t d, int64_t n_heads, int64_t f_hidden, bool pe,
            CounterRng rng) {
    if (d % n_heads != 0)
      throw ValidationError("self-attention: width " + std::to_string(d) +
                            " not divisible by head count " + std::to_string(n_heads));
    visual_channels = c;
    audio_dim = da;
    d_model = d;
    heads = n_heads;
    ffn_hidden = f_hidden;
    positional_encoding = pe;
    auto w = [&](const char* name, int64_t rows, int64_t cols) {
      return Var<T>(xavier_uniform<T>({rows, cols}, rows, cols, rng.split(name)), true);
    };
    tok_w = w("agm.tok_w", c, d);
    tok_b = Var<T>(Tensor<T>::zeros({d}), true);
    sa_wq = w("agm.sa_wq", d, d);
    sa_wk = w("agm.sa_wk", d, d);
    sa_wv = w("agm.sa_wv", d, d);
    sa_wo = w("agm.sa_wo", d, d);
    sa_ln_g = Var<T>(Tensor<T>::full({d}, T(1)), true);
    sa_ln_b = Var<T>(Tensor<T>::zeros({d}), true);
    ca_wq = w("agm.ca_wq", da, d);
    ca_wk = w("agm.ca_wk", d, d);
    ca_wv = w("agm.ca_wv", d, d);
    ca_ln_g = Var<T>(Tensor<T>::full({d}, T(1)), true);
    ca_ln_b = Var<T>(Tensor<T>::zeros({d}), true);
    ffn_w1 = w("agm.ffn_w1", d, f_hidden);
    ffn_b1 = Var<T>(Tensor<T>::zeros({f_hidden}), true);
    ffn_w2 = w("agm.ffn_w2", f_hidden, d);
    ffn_b2 = Var<T>(Tensor<T>::zeros({d}), true);
    ffn_ln_g = Var<T>(Tensor<T>::full({d}, T(1)), true);
    ffn_ln_b = Var<T>(Tensor<T>::zeros({d}), true);
  }

  void collect(const std::string& prefix, ParamList<T>* out) {
    out->emplace_back(prefix + "tok_w", tok_w);
    out->emplace_back(prefix + "tok_b", tok_b);
    out->emplace_back(prefix + "sa_wq", sa_wq);
    out->emplace_back(prefix + "sa_wk", sa_wk);
    out->emplace_back(prefix + "sa_wv", sa_wv);
    out->emplace_back(prefix + "sa_wo", sa_wo);
    out->emplace_back(prefix + "sa_ln_g", sa_ln_g);
    out->emplace_back(prefix + "sa_ln_b", sa_ln_b);
    out->emplace_back(prefix + "ca_wq", ca_wq);
    out->emplace_back(prefix + "ca_wk", ca_wk);
    out->emplace_back(prefix + "ca_wv", ca_wv);
    out->emplace_back(prefix + "ca_ln_g", ca_ln_g);
    out->emplace_back(prefix + "ca_ln_b", ca_ln_b);
    out->emplace_back(prefix + "ffn_w1", ffn_w1);
    out->emplace_back(prefix + "ffn_b1", ffn_b1);
    out->emplace_back(prefix + "ffn_w2", ffn_w2);
    out->emplace_back(prefix + "ffn_b2", ffn_b2);
    out->emplace_back(prefix + "ffn_ln_g", ffn_ln_g);
    out->emplace_back(prefix + "ffn_ln_b", ffn_ln_b);
  }
};

// Sinusoidal positional encoding, (1, T, d).
template <typename T>
Tensor<T> sinusoidal_pe(int64_t t_len, int64_t d) {
  Tensor<T> pe({1, t_len, d});
  for (int64_t t = 0; t < t_len; ++t)
    for (int64_t i = 0; i < d; ++i) {
      double freq = std::pow(10000.0, -2.0 * static_cast<double>(i / 2) / static_cast<double>(d));
      double angle = static_cast<double>(t) * freq;
      pe[t * d + i] = static_cast<T>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

// Spatial mean-pool per frame, learned projection to the model width, and
// optional positional encoding: (N,T,C,H,W) -> (N,T,d).
template <typename T>
Var<T> tokenize_visual(const Var<T>& v, const AgmParams<T>& p) {
  const Shape& s = v.shape();
  if (s.size() != 5)
    throw ValidationError("tokenize_visual: expected (N,T,C,H,W), got " + shape_str(s));
  Var<T> pooled = reduce_mean(v, {3, 4});  // (N,T,C)
  Var<T> tokens = linear(pooled, p.tok_w, p.tok_b);
  if (p.positional_encoding)
    tokens = add(tokens, Var<T>(sinusoidal_pe<T>(s[1], p.d_model)));
  return tokens;
}

// Standard multi-head self-attention with residual and layer norm.
template <typename T>
Var<T> temporal_self_attention(const Var<T>& x, const AgmParams<T>& p) {
  const Shape& s = x.shape();
  int64_t n = s[0], t = s[1], d = s[2];
  int64_t h = p.heads, dh = d / p.heads;
  Var<T> q = matmul(x, p.sa_wq);
  Var<T> k = matmul(x, p.sa_wk);
  Var<T> v = matmul(x, p.sa_wv);
  auto split = [&](const Var<T>& m) {
    return permute(reshape(m, {n, t, h, dh}), {0, 2, 1, 3});  // (N,h,T,dh)
  };
  Var<T> qh = split(q), kh = split(k), vh = split(v);
  Var<T> scores = scale(matmul(qh, permute(kh, {0, 1, 3, 2})), 1.0 / std::sqrt(static_cast<double>(dh)));
  Var<T> attn = softmax(scores, 3);
  Var<T> ctx = matmul(attn, vh);                              // (N,h,T,dh)
  ctx = reshape(permute(ctx, {0, 2, 1, 3}), {n, t, d});
  Var<T> out = matmul(ctx, p.sa_wo);
  return layer_norm(add(x, out), p.sa_ln_g, p.sa_ln_b);
}

// Audio-as-query cross-attention: Softmax((A Wq)(V Wk)^T / sqrt(d)) (V Wv).
// One output row per audio token; no residual here (the block adds it).
template <typename T>
Var<T> cross_modal_interact(const Var<T>& visual, const Var<T>& audio, const AgmParams<T>& p) {
  const Shape& vs = visual.shape();
  const Shape& as = audio.shape();
  if (vs.size() != 3 || as.size() != 3)
    throw ValidationError("cross_modal_interact: expected (N,T,d_v) and (N,T_a,d_a)");
  if (vs[0] != as[0])
    throw ValidationError("cross_modal_interact: batch extents differ, visual " + shape_str(vs) +
                          " vs audio " + shape_str(as));
  if (as[2] != p.ca_wq.shape()[0])
    throw ValidationError(
        "cross_modal_interact: audio feature dim " + std::to_string(as[2]) +
        " does not match the query projection; visual and audio roles are not interchangeable");
  Var<T> q = matmul(audio, p.ca_wq);   // (N,T_a,d)
  Var<T> k = matmul(visual, p.ca_wk);  // (N,T,d)
  Var<T> v = matmul(visual, p.ca_wv);
  Var<T> scores =
      scale(matmul(q, permute(k, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(p.d_model)));
  Var<T> attn = softmax(scores, 2);    // rows over visual tokens sum to 1
  return matmul(attn, v);              // (N,T_a,d)
}

// Full block: tokenize -> self-attention -> cross-attention (+ residual on
// the projected audio query stream + LN) -> feed-forward (+ residual + LN).
template <typename T>
Var<T> agm_block(const Var<T>& v_masked, const Var<T>& audio, const AgmParams<T>& p) {
  Var<T> tokens = tokenize_visual(v_masked, p);
  Var<T> refined = temporal_self_attention(tokens, p);
  Var<T> q = matmul(audio, p.ca_wq);
  Var<T> cross = cross_modal_interact(refined, audio, p);
  Var<T> z = layer_norm(add(cross, q), p.ca_ln_g, p.ca_ln_b);
  Var<T> hidden = relu(linear(z, p.ffn_w1, p.ffn_b1));
  Var<T> f = linear(hidden, p.ffn_w2, p.ffn_b2);
  return layer_norm(add(z, f), p.ffn_ln_g, p.ffn_ln_b);
}

}  // namespace listenlab
