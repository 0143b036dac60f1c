// Audio-guided fusion block: visual tokenization, temporal self-attention,
// asymmetric cross-attention, and the assembled block.

#include <doctest.h>

#include <cmath>

#include "listenlab/agm.hpp"
#include "listenlab/rng.hpp"
#include "test_util.hpp"

using namespace listenlab;

namespace {

AgmParams<float> make_params(int64_t c = 8, int64_t da = 4, int64_t d = 16, int64_t heads = 4,
                             int64_t ffn = 32, bool pe = true, uint64_t seed = 9) {
  AgmParams<float> p;
  p.init(c, da, d, heads, ffn, pe, CounterRng(seed));
  return p;
}

Var<float> randv(Shape s, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  CounterRng rng(seed, 0xa6);
  Tensor<float> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return Var<float>(std::move(t));
}

}  // namespace

TEST_CASE("tokenize_visual pools, projects, and respects the PE switch") {
  AgmParams<float> p = make_params(8, 4, 16, 4, 32, /*pe=*/false);

  // Constant spatial plane per frame: token equals the projected plane value.
  Tensor<float> v({1, 2, 8, 3, 3});
  CounterRng rng(5, 0x70);
  std::vector<float> plane(2 * 8);
  for (auto& x : plane) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (int64_t t = 0; t < 2; ++t)
    for (int64_t c = 0; c < 8; ++c)
      for (int64_t i = 0; i < 9; ++i) v[((t * 8 + c) * 9) + i] = plane[t * 8 + c];
  Var<float> tokens = tokenize_visual(Var<float>(v), p);
  REQUIRE(tokens.shape() == Shape{1, 2, 16});
  for (int64_t t = 0; t < 2; ++t)
    for (int64_t j = 0; j < 16; ++j) {
      double acc = p.tok_b.value()[j];
      for (int64_t c = 0; c < 8; ++c)
        acc += static_cast<double>(plane[t * 8 + c]) * p.tok_w.value()[c * 16 + j];
      CHECK(tokens.value().at({0, t, j}) == doctest::Approx(acc).epsilon(1e-4));
    }

  // Zero input, zero bias: zero tokens without PE, exactly PE with it.
  Var<float> zero(Tensor<float>({1, 3, 8, 3, 3}, 0.f));
  Var<float> zt = tokenize_visual(zero, p);
  for (int64_t i = 0; i < zt.numel(); ++i) CHECK(zt.value()[i] == 0.f);

  AgmParams<float> ppe = make_params(8, 4, 16, 4, 32, /*pe=*/true);
  Var<float> zpe = tokenize_visual(zero, ppe);
  Tensor<float> pe = sinusoidal_pe<float>(3, 16);
  for (int64_t t = 0; t < 3; ++t)
    for (int64_t j = 0; j < 16; ++j)
      CHECK(zpe.value().at({0, t, j}) == pe.at({0, t, j}));
}

TEST_CASE("self-attention with one token reduces to the value-output path") {
  AgmParams<float> p = make_params();
  Var<float> x = randv({1, 1, 16}, 7);
  Var<float> y = temporal_self_attention(x, p);
  // Attention over a single key is exactly 1, so the context is x Wv and the
  // block is LN(x + (x Wv) Wo).
  Var<float> expect = layer_norm(add(x, matmul(matmul(x, p.sa_wv), p.sa_wo)), p.sa_ln_g,
                                 p.sa_ln_b);
  REQUIRE(y.shape() == expect.shape());
  for (int64_t i = 0; i < y.numel(); ++i)
    CHECK(y.value()[i] == doctest::Approx(expect.value()[i]).epsilon(1e-6));
}

TEST_CASE("self-attention without positional encoding is permutation-equivariant") {
  AgmParams<float> p = make_params(8, 4, 16, 4, 32, /*pe=*/false);
  Var<float> x = randv({1, 4, 16}, 11);
  Var<float> y = temporal_self_attention(x, p);

  const std::vector<int64_t> perm = {2, 0, 3, 1};
  Tensor<float> xp({1, 4, 16});
  for (int64_t t = 0; t < 4; ++t)
    for (int64_t j = 0; j < 16; ++j) xp.at({0, t, j}) = x.value().at({0, perm[t], j});
  Var<float> yp = temporal_self_attention(Var<float>(xp), p);
  for (int64_t t = 0; t < 4; ++t)
    for (int64_t j = 0; j < 16; ++j)
      CHECK(yp.value().at({0, t, j}) ==
            doctest::Approx(y.value().at({0, perm[t], j})).epsilon(1e-5));
}

TEST_CASE("cross-attention degenerate and uniform cases") {
  AgmParams<float> p = make_params();

  // Single audio and visual token: output is exactly the visual value
  // projection (softmax over one key is 1).
  Var<float> v1 = randv({1, 1, 16}, 13);
  Var<float> a1 = randv({1, 1, 4}, 14);
  Var<float> out1 = cross_modal_interact(v1, a1, p);
  Var<float> vproj = matmul(v1, p.ca_wv);
  for (int64_t i = 0; i < out1.numel(); ++i) CHECK(out1.value()[i] == vproj.value()[i]);

  // Zero query weights: uniform attention; each row is the mean over visual
  // value projections.
  AgmParams<float> q = make_params();
  for (auto& w : q.ca_wq.mutable_value().data()) w = 0.f;
  Var<float> v5 = randv({1, 5, 16}, 15);
  Var<float> a3 = randv({1, 3, 4}, 16);
  Var<float> outu = cross_modal_interact(v5, a3, q);
  Var<float> vp = matmul(v5, q.ca_wv);
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t j = 0; j < 16; ++j) {
      double mean = 0;
      for (int64_t t = 0; t < 5; ++t) mean += vp.value().at({0, t, j});
      mean /= 5.0;
      CHECK(outu.value().at({0, r, j}) == doctest::Approx(mean).epsilon(1e-5));
    }

  // Zero value weights: cross-attention output is exactly zero, so the block
  // output depends only on the audio query stream.
  AgmParams<float> z = make_params();
  for (auto& w : z.ca_wv.mutable_value().data()) w = 0.f;
  Var<float> outz = cross_modal_interact(v5, a3, z);
  for (int64_t i = 0; i < outz.numel(); ++i) CHECK(outz.value()[i] == 0.f);
}

TEST_CASE("cross-attention rows sum to one (identical-value probe)") {
  // If every visual token is identical, each output row equals the shared
  // value projection exactly when and only when the attention row sums to 1.
  AgmParams<float> p = make_params();
  Tensor<float> shared({1, 1, 16});
  CounterRng rng(17, 0x55);
  for (auto& v : shared.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  Tensor<float> vis({1, 6, 16});
  for (int64_t t = 0; t < 6; ++t)
    for (int64_t j = 0; j < 16; ++j) vis.at({0, t, j}) = shared.at({0, 0, j});
  Var<float> a = randv({1, 3, 4}, 18);
  Var<float> out = cross_modal_interact(Var<float>(vis), a, p);
  Var<float> vproj = matmul(Var<float>(shared), p.ca_wv);
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t j = 0; j < 16; ++j)
      CHECK(out.value().at({0, r, j}) ==
            doctest::Approx(vproj.value().at({0, 0, j})).epsilon(1e-5));
}

TEST_CASE("cross-attention rejects swapped modality roles") {
  AgmParams<float> p = make_params();  // audio dim 4 != d_model 16
  Var<float> vis = randv({1, 5, 16}, 19);
  Var<float> aud = randv({1, 3, 4}, 20);
  // Visual-as-query / audio-as-key is a different computation with a
  // different output shape; the implementation must reject it rather than
  // silently transpose.
  CHECK_THROWS_AS(cross_modal_interact(aud, vis, p), ValidationError);
  // Batch mismatch is also a contract error.
  Var<float> aud2 = randv({2, 3, 4}, 21);
  CHECK_THROWS_AS(cross_modal_interact(vis, aud2, p), ValidationError);
}

TEST_CASE("agm_block zero inputs with zero biases give exactly zero") {
  AgmParams<float> p = make_params(8, 4, 16, 4, 32, /*pe=*/false);
  Var<float> v(Tensor<float>({1, 3, 8, 3, 3}, 0.f));
  Var<float> a(Tensor<float>({1, 4, 4}, 0.f));
  Var<float> out = agm_block(v, a, p);
  REQUIRE(out.shape() == Shape{1, 4, 16});
  for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.value()[i] == 0.f);
}

TEST_CASE("agm_block output shape contract") {
  AgmParams<float> p = make_params();
  Var<float> v = randv({2, 3, 8, 3, 3}, 23);
  Var<float> a = randv({2, 5, 4}, 24);
  Var<float> out = agm_block(v, a, p);
  CHECK(out.shape() == Shape{2, 5, 16});
}

TEST_CASE("agm parameter gradients match finite differences") {
  // End-to-end through the block for a representative parameter subset.
  using testutil::op_grad_max_rel_err;
  auto f = [](auto& in) {
    using S = std::decay_t<decltype(in[0].value()[0])>;
    AgmParams<S> p;
    p.init(4, 3, 8, 2, 8, false, CounterRng(41));
    // Substitute the differentiated inputs for selected parameters.
    p.ca_wq = in[1];
    p.ffn_w1 = in[2];
    p.sa_wq = in[3];
    return agm_block(in[0], in[4], p);
  };
  std::vector<Shape> shapes = {{1, 3, 4, 2, 2}, {3, 8}, {8, 8}, {8, 8}, {1, 2, 3}};
  // h = 1e-4: a coarser step can straddle a ReLU kink in the feed-forward
  // stage, which invalidates the central-difference oracle rather than the
  // gradient under test.
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed)
    worst = std::max(worst, op_grad_max_rel_err<double>(f, shapes, seed, -0.5, 0.5, 0.0, 1e-4));
  CHECK(worst < 1e-5);
}
