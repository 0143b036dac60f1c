#pragma once

#include <string>
#include <vector>

#include "listenlab/finite_diff.hpp"
#include "listenlab/model.hpp"

namespace listenlab {

// Analytic-vs-central-difference verification of every parameter of a micro
// detector (N=1, T=4, 8x8 frames, C=8, d=16).
//
// The analytic gradient is computed in the scalar type under test; the
// finite-difference oracle is always evaluated in extended (long double)
// precision at the same (T-representable) point. Differencing a loss
// computed in the tested precision would measure that precision's rounding
// noise, not the derivative: an f32 forward quantizes the loss at ~1e-7
// relative (FD noise ~5e-5 per element at h=1e-3), and even an f64 forward
// leaves ~1e-13 of noise, which swamps the smallest true gradients (~1e-8)
// in this model. The extended-precision oracle measures the derivative of
// the same mathematical function with a negligible noise floor.
//
// The evaluation point is conditioned so relu preactivations sit away from
// zero, where a differenced kink is meaningless; relu_margin records the
// achieved distance.
struct GradCheckResult {
  GradCheckReport report;
  double relu_margin = 0.0;
  uint64_t input_seed = 0;
};

namespace detail {

template <typename T>
struct GradCheckSetup {
  ModelParams<T> params;
  Var<T> video, audio;
  std::vector<int> labels;
};

inline ModelConfig gradcheck_config() {
  ModelConfig cfg;
  cfg.frame_h = 8;
  cfg.frame_w = 8;
  cfg.channels = 8;
  cfg.reduce_ratio = 4;
  cfg.bottleneck_ratio = 4;
  cfg.spa_hidden = 4;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.ffn_hidden = 32;
  cfg.audio_dim_raw = 4;
  cfg.audio_dim = 8;
  cfg.variant = AttentionVariant::kSca;
  cfg.fusion = FusionMode::kAgm;
  cfg.seed = 7;
  return cfg;
}

template <typename T>
GradCheckSetup<T> make_gradcheck_setup(uint64_t input_seed) {
  GradCheckSetup<T> s;
  s.params.init(gradcheck_config());

  CounterRng rng(input_seed, 0xfd);
  // The classifier must be nonzero for gradients to reach the rest of the
  // network; small scale keeps the loss well-conditioned.
  for (auto& v : s.params.cls_w.mutable_value().data())
    v = static_cast<T>(rng.uniform(-0.3, 0.3));
  // Every relu input is conditioned so its preactivations sit safely on the
  // positive side: shrink the weights feeding the relu so the data term is
  // bounded below the (positive) bias.
  auto shrink = [](Var<T>& w, double factor) {
    for (auto& v : w.mutable_value().data()) v = static_cast<T>(static_cast<double>(v) * factor);
  };
  auto lift = [&rng](Var<T>& b, double lo, double hi) {
    for (auto& v : b.mutable_value().data()) v = static_cast<T>(rng.uniform(lo, hi));
  };
  shrink(s.params.enc_w1, 0.1);
  lift(s.params.enc_b1, 0.5, 0.7);
  shrink(s.params.enc_w2, 0.05);
  lift(s.params.enc_b2, 0.5, 0.7);
  shrink(s.params.mam.reduce_w, 0.5);
  shrink(s.params.mam.spa_w1, 0.5);
  lift(s.params.mam.spa_b1, 0.3, 0.5);
  shrink(s.params.mam.spa_w2, 0.5);
  shrink(s.params.mam.cha_w0, 0.5);
  lift(s.params.mam.cha_b0, 0.3, 0.5);
  shrink(s.params.mam.cha_w1, 0.5);
  shrink(s.params.agm.ffn_w1, 0.1);
  lift(s.params.agm.ffn_b1, 0.3, 0.5);
  // Soften attention logits: softmax curvature dominates the O(h^2)
  // truncation error of the central difference otherwise.
  shrink(s.params.agm.sa_wq, 0.1);
  shrink(s.params.agm.sa_wk, 0.1);
  shrink(s.params.agm.ca_wq, 0.1);
  shrink(s.params.agm.ca_wk, 0.1);

  Tensor<T> video({1, 4, 3, 8, 8});
  for (auto& v : video.data()) v = static_cast<T>(rng.uniform(0.0, 0.5));
  Tensor<T> audio({1, 6, 4});
  for (auto& v : audio.data()) v = static_cast<T>(rng.normal(0.0, 0.5));
  s.video = Var<T>(std::move(video));
  s.audio = Var<T>(std::move(audio));
  s.labels = {1};
  return s;
}

// The extended-precision shadow of a T-typed setup: identical values (exact,
// since T embeds in long double), used as the finite-difference oracle.
template <typename T>
GradCheckSetup<long double> to_extended(const GradCheckSetup<T>& s) {
  GradCheckSetup<long double> d;
  d.params.init(gradcheck_config());
  ParamList<long double> dst = d.params.named_params();
  ParamList<T> src = const_cast<GradCheckSetup<T>&>(s).params.named_params();
  for (size_t i = 0; i < dst.size(); ++i)
    dst[i].second.mutable_value() = src[i].second.value().template cast<long double>();
  d.video = Var<long double>(s.video.value().template cast<long double>());
  d.audio = Var<long double>(s.audio.value().template cast<long double>());
  d.labels = s.labels;
  return d;
}

template <typename T>
long double eval_loss(GradCheckSetup<T>& s) {
  NoGradGuard guard;
  Var<T> logits = model_forward(s.video, s.audio, s.params);
  Var<T> loss = model_loss(logits, s.labels);
  return static_cast<long double>(loss.value()[0]);
}

}  // namespace detail

template <typename T>
GradCheckResult grad_check_model(double h = 1e-3, uint64_t first_seed = 1,
                                 double min_relu_margin = 5e-3) {
  // Seed search: find an evaluation point whose relu preactivations all stay
  // clear of zero by more than the finite-difference step can move them.
  uint64_t seed = first_seed;
  double margin = 0.0;
  for (int attempt = 0; attempt < 64; ++attempt, ++seed) {
    auto probe = detail::make_gradcheck_setup<T>(seed);
    ReluProbe::enabled() = true;
    ReluProbe::reset();
    (void)detail::eval_loss(probe);
    margin = ReluProbe::min_abs();
    ReluProbe::enabled() = false;
    if (margin >= min_relu_margin) break;
  }

  auto s = detail::make_gradcheck_setup<T>(seed);
  auto oracle = detail::to_extended(s);

  // Analytic gradients in the tested type.
  Var<T> logits = model_forward(s.video, s.audio, s.params);
  Var<T> loss = model_loss(logits, s.labels);
  ParamList<T> plist = s.params.named_params();
  for (auto& [name, p] : plist) p.zero_grad();
  backward(loss);

  GradCheckResult result;
  result.input_seed = seed;
  result.relu_margin = margin;
  // Per-parameter-tensor relative error: the largest element difference
  // normalized by the gradient's largest element. Per-element normalization
  // would divide the O(h^2) truncation error by incidental near-zero
  // gradient entries and report noise instead of gradient quality.
  ParamList<long double> olist = oracle.params.named_params();
  auto f = [&]() { return detail::eval_loss(oracle); };
  for (size_t pi = 0; pi < plist.size(); ++pi) {
    Tensor<double> numeric =
        finite_diff_grad<long double>(f, olist[pi].second.mutable_value(), h);
    const Tensor<T>& analytic = plist[pi].second.grad();
    double a_inf = 0.0, n_inf = 0.0, d_inf = 0.0;
    for (int64_t i = 0; i < numeric.numel(); ++i) {
      double a = static_cast<double>(analytic[i]);
      a_inf = std::max(a_inf, std::abs(a));
      n_inf = std::max(n_inf, std::abs(numeric[i]));
      d_inf = std::max(d_inf, std::abs(a - numeric[i]));
    }
    result.report.record(plist[pi].first, d_inf / std::max({a_inf, n_inf, 1e-12}));
  }
  return result;
}

}  // namespace listenlab
