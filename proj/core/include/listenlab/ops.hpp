#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "listenlab/autodiff.hpp"
#include "listenlab/tensor.hpp"

namespace listenlab {

// ---------------------------------------------------------------------------
/// Instrumentation: gradient checks near ReLU kinks are meaningless, so the
// check harness asserts a margin on the smallest |preactivation| seen.
struct ReluProbe {
  static bool& enabled() {
    thread_local bool e = false;
    return e;
  }
  static double& min_abs() {
    thread_local double m = 1e300;
    return m;
  }
  static void reset() { min_abs() = 1e300; }
};

// ---------------------------------------------------------------------------
// Broadcast helpers. Broadcasting requires equal rank; each extent must match
// or be 1 on one side.

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size())
    throw ValidationError("broadcast: rank mismatch " + shape_str(a) + " vs " + shape_str(b));
  Shape out(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || a[i] == 1 || b[i] == 1)
      out[i] = std::max(a[i], b[i]);
    else
      throw ValidationError("broadcast: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
  }
  return out;
}

namespace detail {

inline std::vector<int64_t> bcast_strides(const Shape& s, const Shape& out) {
  auto st = row_major_strides(s);
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i] == 1 && out[i] != 1) st[i] = 0;
  return st;
}

}  // namespace detail

template <typename T, typename F>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, F&& f) {
  if (a.same_shape(b)) {
    Tensor<T> out(a.shape());
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(os);
  auto ost = row_major_strides(os);
  auto ast = detail::bcast_strides(a.shape(), os);
  auto bst = detail::bcast_strides(b.shape(), os);
  int64_t nd = static_cast<int64_t>(os.size());
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    int64_t rem = i, ao = 0, bo = 0;
    for (int64_t d = 0; d < nd; ++d) {
      int64_t idx = rem / ost[d];
      rem %= ost[d];
      ao += idx * ast[d];
      bo += idx * bst[d];
    }
    out[i] = f(a[ao], b[bo]);
  }
  return out;
}

// Sum `g` down to `target` shape (same rank, summing broadcast axes).
template <typename T>
Tensor<T> reduce_to_shape(const Tensor<T>& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor<T> out(target, T(0));
  auto gst = row_major_strides(g.shape());
  auto tst = detail::bcast_strides(target, g.shape());
  int64_t nd = g.ndim();
  int64_t n = g.numel();
  for (int64_t i = 0; i < n; ++i) {
    int64_t rem = i, to = 0;
    for (int64_t d = 0; d < nd; ++d) {
      int64_t idx = rem / gst[d];
      rem %= gst[d];
      to += idx * tst[d];
    }
    out[to] += g[i];
  }
  return out;
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* pd = dst.ptr();
  const T* ps = src.ptr();
  int64_t n = dst.numel();
  for (int64_t i = 0; i < n; ++i) pd[i] += ps[i];
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic.

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = broadcast_binary(a.value(), b.value(), [](T x, T y) { return x + y; });
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      accumulate(p->grad, reduce_to_shape(self.grad, p->value.shape()));
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = broadcast_binary(a.value(), b.value(), [](T x, T y) { return x - y; });
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (self.parents[0]->requires_grad) {
      self.parents[0]->ensure_grad();
      accumulate(self.parents[0]->grad, reduce_to_shape(self.grad, self.parents[0]->value.shape()));
    }
    if (self.parents[1]->requires_grad) {
      auto& p = self.parents[1];
      p->ensure_grad();
      Tensor<T> neg = self.grad;
      for (auto& v : neg.data()) v = -v;
      accumulate(p->grad, reduce_to_shape(neg, p->value.shape()));
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = broadcast_binary(a.value(), b.value(), [](T x, T y) { return x * y; });
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      Tensor<T> full = broadcast_binary(self.grad, pb->value, [](T g, T y) { return g * y; });
      accumulate(pa->grad, reduce_to_shape(full, pa->value.shape()));
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      Tensor<T> full = broadcast_binary(self.grad, pa->value, [](T g, T x) { return g * x; });
      accumulate(pb->grad, reduce_to_shape(full, pb->value.shape()));
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = static_cast<T>(v * s);
  return make_op<T>(std::move(out), {a}, [s](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      p->grad[i] += static_cast<T>(self.grad[i] * s);
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, double c) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = static_cast<T>(v + c);
  return make_op<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    accumulate(p->grad, self.grad);
  });
}

// ---------------------------------------------------------------------------
// Matrix product: a[..., m, k] x b[k, n] or a[..., m, k] x b[..., k, n] with
// equal batch extents. Inner products accumulate in at-least-double
// precision (extended precision when the tensors themselves are extended,
// for the finite-difference oracle).

template <typename T>
using Acc = std::conditional_t<std::is_same_v<T, long double>, long double, double>;

namespace detail {

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
  std::vector<Acc<T>> row(static_cast<size_t>(n));
  for (int64_t i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), Acc<T>(0));
    for (int64_t p = 0; p < k; ++p) {
      Acc<T> a = static_cast<Acc<T>>(A[i * k + p]);
      const T* b = B + p * n;
      for (int64_t j = 0; j < n; ++j) row[j] += a * static_cast<Acc<T>>(b[j]);
    }
    for (int64_t j = 0; j < n; ++j) C[i * n + j] += static_cast<T>(row[j]);
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      Acc<T> s = 0;
      const T* a = A + i * k;
      const T* b = B + j * k;
      for (int64_t p = 0; p < k; ++p) s += static_cast<Acc<T>>(a[p]) * static_cast<Acc<T>>(b[p]);
      C[i * n + j] += static_cast<T>(s);
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
  std::vector<Acc<T>> tmp(static_cast<size_t>(m * n), Acc<T>(0));
  for (int64_t p = 0; p < k; ++p) {
    const T* a = A + p * m;
    const T* b = B + p * n;
    for (int64_t i = 0; i < m; ++i) {
      Acc<T> av = static_cast<Acc<T>>(a[i]);
      Acc<T>* t = tmp.data() + i * n;
      for (int64_t j = 0; j < n; ++j) t[j] += av * static_cast<Acc<T>>(b[j]);
    }
  }
  for (int64_t i = 0; i < m * n; ++i) C[i] += static_cast<T>(tmp[i]);
}

}  // namespace detail

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2)
    throw ValidationError("matmul: operands must have rank >= 2, got " + shape_str(as) + " x " +
                          shape_str(bs));
  bool shared_b = bs.size() == 2 && as.size() > 2;
  if (!shared_b && as.size() != bs.size())
    throw ValidationError("matmul: rank mismatch " + shape_str(as) + " x " + shape_str(bs));
  int64_t m = as[as.size() - 2];
  int64_t k = as[as.size() - 1];
  int64_t k2 = bs[bs.size() - 2];
  int64_t n = bs[bs.size() - 1];
  if (k != k2)
    throw ValidationError("matmul: inner extents differ, " + shape_str(as) + " x " + shape_str(bs));
  int64_t batch = 1;
  Shape os;
  for (size_t i = 0; i + 2 < as.size(); ++i) {
    if (!shared_b && bs[i] != as[i])
      throw ValidationError("matmul: batch extents differ, " + shape_str(as) + " x " + shape_str(bs));
    batch *= as[i];
    os.push_back(as[i]);
  }
  os.push_back(m);
  os.push_back(n);

  Tensor<T> out(os, T(0));
  for (int64_t bi = 0; bi < batch; ++bi)
    detail::gemm_nn(a.value().ptr() + bi * m * k, b.value().ptr() + (shared_b ? 0 : bi * k * n),
                    out.ptr() + bi * m * n, m, k, n);

  return make_op<T>(std::move(out), {a, b}, [m, k, n, batch, shared_b](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (int64_t bi = 0; bi < batch; ++bi)
        detail::gemm_nt(self.grad.ptr() + bi * m * n,
                        pb->value.ptr() + (shared_b ? 0 : bi * k * n),
                        pa->grad.ptr() + bi * m * k, m, n, k);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int64_t bi = 0; bi < batch; ++bi)
        detail::gemm_tn(pa->value.ptr() + bi * m * k, self.grad.ptr() + bi * m * n,
                        pb->grad.ptr() + (shared_b ? 0 : bi * k * n), k, m, n);
    }
  });
}

// ---------------------------------------------------------------------------
// 2D cross-correlation. x: (N, C, H, W), w: (Cout, C, kh, kw).

enum class Padding { kSame, kValid };

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, Padding padding, int64_t stride = 1) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw ValidationError("conv2d: expected 4-axis input and kernel, got " + shape_str(xs) +
                          " and " + shape_str(ws));
  if (xs[1] != ws[1])
    throw ValidationError("conv2d: channel extents differ, input " + shape_str(xs) + " kernel " +
                          shape_str(ws));
  if (stride < 1) throw ValidationError("conv2d: stride must be >= 1");
  int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  int64_t Cout = ws[0], kh = ws[2], kw = ws[3];
  int64_t ph = 0, pw = 0;
  if (padding == Padding::kSame) {
    if (kh % 2 == 0 || kw % 2 == 0)
      throw ValidationError("conv2d: same-padding requires odd kernel extents, got " +
                            shape_str(ws));
    ph = (kh - 1) / 2;
    pw = (kw - 1) / 2;
  } else if (H < kh || W < kw) {
    throw ValidationError("conv2d: kernel larger than input under valid padding");
  }
  int64_t Ho = (H + 2 * ph - kh) / stride + 1;
  int64_t Wo = (W + 2 * pw - kw) / stride + 1;

  Tensor<T> out(Shape{N, Cout, Ho, Wo});
  const T* px = x.value().ptr();
  const T* pw_ = w.value().ptr();
  T* po = out.ptr();
  for (int64_t ni = 0; ni < N; ++ni)
    for (int64_t oc = 0; oc < Cout; ++oc)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow) {
          Acc<T> acc = 0;
          for (int64_t c = 0; c < C; ++c)
            for (int64_t ky = 0; ky < kh; ++ky) {
              int64_t ih = oh * stride + ky - ph;
              if (ih < 0 || ih >= H) continue;
              for (int64_t kx = 0; kx < kw; ++kx) {
                int64_t iw = ow * stride + kx - pw;
                if (iw < 0 || iw >= W) continue;
                acc += static_cast<Acc<T>>(px[((ni * C + c) * H + ih) * W + iw]) *
                       static_cast<Acc<T>>(pw_[((oc * C + c) * kh + ky) * kw + kx]);
              }
            }
          po[((ni * Cout + oc) * Ho + oh) * Wo + ow] = static_cast<T>(acc);
        }

  return make_op<T>(std::move(out), {x, w},
                    [N, C, H, W, Cout, kh, kw, ph, pw, Ho, Wo, stride](Node<T>& self) {
    auto& px_ = self.parents[0];
    auto& pw_ = self.parents[1];
    bool need_x = px_->requires_grad;
    bool need_w = pw_->requires_grad;
    if (need_x) px_->ensure_grad();
    if (need_w) pw_->ensure_grad();
    const T* xv = px_->value.ptr();
    const T* wv = pw_->value.ptr();
    T* dx = need_x ? px_->grad.ptr() : nullptr;
    T* dw = need_w ? pw_->grad.ptr() : nullptr;
    const T* dy = self.grad.ptr();
    for (int64_t ni = 0; ni < N; ++ni)
      for (int64_t oc = 0; oc < Cout; ++oc)
        for (int64_t oh = 0; oh < Ho; ++oh)
          for (int64_t ow = 0; ow < Wo; ++ow) {
            T g = dy[((ni * Cout + oc) * Ho + oh) * Wo + ow];
            if (g == T(0)) continue;
            for (int64_t c = 0; c < C; ++c)
              for (int64_t ky = 0; ky < kh; ++ky) {
                int64_t ih = oh * stride + ky - ph;
                if (ih < 0 || ih >= H) continue;
                for (int64_t kx = 0; kx < kw; ++kx) {
                  int64_t iw = ow * stride + kx - pw;
                  if (iw < 0 || iw >= W) continue;
                  int64_t xi = ((ni * C + c) * H + ih) * W + iw;
                  int64_t wi = ((oc * C + c) * kh + ky) * kw + kx;
                  if (need_x) dx[xi] += wv[wi] * g;
                  if (need_w) dw[wi] += xv[xi] * g;
                }
              }
          }
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities.

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data())
    v = static_cast<T>(Acc<T>(1) / (Acc<T>(1) + std::exp(-static_cast<Acc<T>>(v))));
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      T yv = self.value[i];
      p->grad[i] += self.grad[i] * yv * (T(1) - yv);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  if (ReluProbe::enabled()) {
    for (const T& v : x.value().data())
      ReluProbe::min_abs() = std::min(ReluProbe::min_abs(), std::abs(static_cast<double>(v)));
  }
  Tensor<T> out = x.value();
  for (auto& v : out.data())
    if (v < T(0)) v = T(0);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      if (p->value[i] > T(0)) p->grad[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Softmax along one axis, max-subtracted for stability. Each slice along the
// axis sums to 1.

template <typename T>
Var<T> softmax(const Var<T>& x, int64_t axis) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= x.value().ndim())
    throw ValidationError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                          shape_str(s));
  int64_t len = s[axis];
  int64_t inner = 1;
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  int64_t outer = x.numel() / (len * inner);

  Tensor<T> out(s);
  const T* px = x.value().ptr();
  T* po = out.ptr();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      int64_t base = o * len * inner + i;
      Acc<T> mx = -Acc<T>(1e300);
      for (int64_t j = 0; j < len; ++j)
        mx = std::max(mx, static_cast<Acc<T>>(px[base + j * inner]));
      Acc<T> sum = 0;
      for (int64_t j = 0; j < len; ++j) {
        Acc<T> e = std::exp(static_cast<Acc<T>>(px[base + j * inner]) - mx);
        po[base + j * inner] = static_cast<T>(e);
        sum += e;
      }
      for (int64_t j = 0; j < len; ++j)
        po[base + j * inner] = static_cast<T>(static_cast<Acc<T>>(po[base + j * inner]) / sum);
    }

  return make_op<T>(std::move(out), {x}, [len, inner, outer](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const T* y = self.value.ptr();
    const T* g = self.grad.ptr();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < inner; ++i) {
        int64_t base = o * len * inner + i;
        double dot = 0.0;
        for (int64_t j = 0; j < len; ++j)
          dot += static_cast<double>(y[base + j * inner]) * static_cast<double>(g[base + j * inner]);
        for (int64_t j = 0; j < len; ++j)
          p->grad[base + j * inner] +=
              static_cast<T>(static_cast<double>(y[base + j * inner]) *
                             (static_cast<double>(g[base + j * inner]) - dot));
      }
  });
}

// ---------------------------------------------------------------------------
// Reductions. Axes are removed from the shape; an empty axis list is the
// identity (documented, not an error).

namespace detail {

inline void check_axes(const Shape& s, const std::vector<int64_t>& axes) {
  for (size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] < 0 || axes[i] >= static_cast<int64_t>(s.size()))
      throw ValidationError("reduce: axis " + std::to_string(axes[i]) + " invalid for shape " +
                            shape_str(s));
    for (size_t j = i + 1; j < axes.size(); ++j)
      if (axes[i] == axes[j])
        throw ValidationError("reduce: duplicate axis " + std::to_string(axes[i]));
  }
}

// For each input element, the offset into the reduced output.
inline std::vector<int64_t> reduce_map_strides(const Shape& s, const std::vector<int64_t>& axes,
                                               Shape* out_shape) {
  std::vector<bool> reduced(s.size(), false);
  for (int64_t a : axes) reduced[static_cast<size_t>(a)] = true;
  Shape os;
  for (size_t i = 0; i < s.size(); ++i)
    if (!reduced[i]) os.push_back(s[i]);
  if (os.empty()) os.push_back(1);
  auto ost = row_major_strides(os);
  std::vector<int64_t> map(s.size(), 0);
  size_t k = 0;
  for (size_t i = 0; i < s.size(); ++i)
    if (!reduced[i]) map[i] = (os.size() == 1 && os[0] == 1 && k >= ost.size()) ? 0 : ost[k++];
  *out_shape = os;
  return map;
}

}  // namespace detail

template <typename T>
Var<T> reduce_sum(const Var<T>& x, std::vector<int64_t> axes, double scale_out = 1.0) {
  if (axes.empty()) return x;  // identity
  const Shape& s = x.shape();
  detail::check_axes(s, axes);
  Shape os;
  auto map = detail::reduce_map_strides(s, axes, &os);
  auto xst = row_major_strides(s);
  int64_t nd = x.value().ndim();
  int64_t n = x.numel();

  std::vector<Acc<T>> acc(static_cast<size_t>(shape_numel(os)), Acc<T>(0));
  for (int64_t i = 0; i < n; ++i) {
    int64_t rem = i, oo = 0;
    for (int64_t d = 0; d < nd; ++d) {
      int64_t idx = rem / xst[d];
      rem %= xst[d];
      oo += idx * map[d];
    }
    acc[static_cast<size_t>(oo)] += static_cast<Acc<T>>(x.value()[i]);
  }
  Tensor<T> out(os);
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = static_cast<T>(acc[static_cast<size_t>(i)] * static_cast<Acc<T>>(scale_out));

  return make_op<T>(std::move(out), {x}, [map, xst, nd, n, scale_out](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      int64_t rem = i, oo = 0;
      for (int64_t d = 0; d < nd; ++d) {
        int64_t idx = rem / xst[d];
        rem %= xst[d];
        oo += idx * map[d];
      }
      p->grad[i] += static_cast<T>(static_cast<double>(self.grad[oo]) * scale_out);
    }
  });
}

template <typename T>
Var<T> reduce_mean(const Var<T>& x, std::vector<int64_t> axes) {
  if (axes.empty()) return x;  // identity
  int64_t count = 1;
  for (int64_t a : axes) {
    if (a < 0 || a >= x.value().ndim())
      throw ValidationError("reduce_mean: axis " + std::to_string(a) + " invalid for shape " +
                            shape_str(x.shape()));
    count *= x.shape()[static_cast<size_t>(a)];
  }
  return reduce_sum(x, std::move(axes), 1.0 / static_cast<double>(count));
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  std::vector<int64_t> axes(static_cast<size_t>(x.value().ndim()));
  for (size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<int64_t>(i);
  return reduce_sum(x, std::move(axes));
}

// ---------------------------------------------------------------------------
// Layer normalization over the last axis (population variance, eps-stabilized)
// with per-feature affine.

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-5) {
  const Shape& s = x.shape();
  int64_t d = s.back();
  if (gamma.numel() != d || beta.numel() != d)
    throw ValidationError("layer_norm: affine extents must match last axis " + std::to_string(d));
  int64_t rows = x.numel() / d;

  Tensor<T> xhat(s);
  std::vector<double> inv_std(static_cast<size_t>(rows));
  const T* px = x.value().ptr();
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = px + r * d;
    Acc<T> mu = 0;
    for (int64_t j = 0; j < d; ++j) mu += static_cast<Acc<T>>(row[j]);
    mu /= d;
    Acc<T> var = 0;
    for (int64_t j = 0; j < d; ++j) {
      Acc<T> c = static_cast<Acc<T>>(row[j]) - mu;
      var += c * c;
    }
    var /= d;
    Acc<T> is = Acc<T>(1) / std::sqrt(var + static_cast<Acc<T>>(eps));
    inv_std[static_cast<size_t>(r)] = static_cast<double>(is);
    for (int64_t j = 0; j < d; ++j)
      xhat[r * d + j] = static_cast<T>((static_cast<Acc<T>>(row[j]) - mu) * is);
  }
  Tensor<T> out(s);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < d; ++j)
      out[r * d + j] = gamma.value()[j] * xhat[r * d + j] + beta.value()[j];

  return make_op<T>(std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](Node<T>& self) {
    auto& px_ = self.parents[0];
    auto& pg = self.parents[1];
    auto& pb = self.parents[2];
    const T* g = self.grad.ptr();
    if (pg->requires_grad || pb->requires_grad) {
      if (pg->requires_grad) pg->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      for (int64_t j = 0; j < d; ++j) {
        double dg = 0.0, db = 0.0;
        for (int64_t r = 0; r < rows; ++r) {
          dg += static_cast<double>(g[r * d + j]) * static_cast<double>(xhat[r * d + j]);
          db += static_cast<double>(g[r * d + j]);
        }
        if (pg->requires_grad) pg->grad[j] += static_cast<T>(dg);
        if (pb->requires_grad) pb->grad[j] += static_cast<T>(db);
      }
    }
    if (px_->requires_grad) {
      px_->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        double mean_gd = 0.0, mean_gdx = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          double gd = static_cast<double>(g[r * d + j]) * static_cast<double>(pg->value[j]);
          mean_gd += gd;
          mean_gdx += gd * static_cast<double>(xhat[r * d + j]);
        }
        mean_gd /= d;
        mean_gdx /= d;
        for (int64_t j = 0; j < d; ++j) {
          double gd = static_cast<double>(g[r * d + j]) * static_cast<double>(pg->value[j]);
          px_->grad[r * d + j] += static_cast<T>(
              inv_std[static_cast<size_t>(r)] *
              (gd - mean_gd - static_cast<double>(xhat[r * d + j]) * mean_gdx));
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation.

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
  if (shape_numel(s) != x.numel())
    throw ValidationError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(s));
  Tensor<T> out(std::move(s), x.value().data());
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i) p->grad[i] += self.grad[i];
  });
}

template <typename T>
Var<T> permute(const Var<T>& x, std::vector<int64_t> perm) {
  const Shape& s = x.shape();
  if (perm.size() != s.size()) throw ValidationError("permute: rank mismatch");
  std::vector<bool> used(s.size(), false);
  Shape os(s.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    int64_t p = perm[i];
    if (p < 0 || p >= static_cast<int64_t>(s.size()) || used[static_cast<size_t>(p)])
      throw ValidationError("permute: invalid permutation");
    used[static_cast<size_t>(p)] = true;
    os[i] = s[static_cast<size_t>(p)];
  }
  auto ost = row_major_strides(os);
  auto xst = row_major_strides(s);
  std::vector<int64_t> gather(s.size());
  for (size_t i = 0; i < perm.size(); ++i) gather[i] = xst[static_cast<size_t>(perm[i])];
  int64_t nd = static_cast<int64_t>(s.size());
  int64_t n = x.numel();

  Tensor<T> out(os);
  for (int64_t i = 0; i < n; ++i) {
    int64_t rem = i, xo = 0;
    for (int64_t d = 0; d < nd; ++d) {
      int64_t idx = rem / ost[d];
      rem %= ost[d];
      xo += idx * gather[d];
    }
    out[i] = x.value()[xo];
  }
  return make_op<T>(std::move(out), {x}, [ost, gather, nd, n](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      int64_t rem = i, xo = 0;
      for (int64_t d = 0; d < nd; ++d) {
        int64_t idx = rem / ost[d];
        rem %= ost[d];
        xo += idx * gather[d];
      }
      p->grad[xo] += self.grad[i];
    }
  });
}

// Concatenate along the last axis.
template <typename T>
Var<T> concat_last(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != bs.size()) throw ValidationError("concat: rank mismatch");
  for (size_t i = 0; i + 1 < as.size(); ++i)
    if (as[i] != bs[i])
      throw ValidationError("concat: leading extents differ, " + shape_str(as) + " vs " +
                            shape_str(bs));
  int64_t la = as.back(), lb = bs.back();
  Shape os = as;
  os.back() = la + lb;
  int64_t rows = a.numel() / la;
  Tensor<T> out(os);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < la; ++j) out[r * (la + lb) + j] = a.value()[r * la + j];
    for (int64_t j = 0; j < lb; ++j) out[r * (la + lb) + la + j] = b.value()[r * lb + j];
  }
  return make_op<T>(std::move(out), {a, b}, [la, lb, rows](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < la; ++j) pa->grad[r * la + j] += self.grad[r * (la + lb) + j];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < lb; ++j) pb->grad[r * lb + j] += self.grad[r * (la + lb) + la + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Adjacent-frame difference along axis 1, zero-padded in the final slot so
// the result aligns with all input frames.

template <typename T>
Var<T> temporal_diff_pad(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ValidationError("temporal_diff: need a time axis at position 1");
  int64_t N = s[0], Tt = s[1];
  if (Tt < 2) throw ValidationError("temporal_diff: requires at least 2 frames, got " +
                                    std::to_string(Tt));
  int64_t inner = x.numel() / (N * Tt);
  Tensor<T> out(s, T(0));
  const T* px = x.value().ptr();
  T* po = out.ptr();
  for (int64_t ni = 0; ni < N; ++ni)
    for (int64_t t = 0; t + 1 < Tt; ++t) {
      const T* cur = px + (ni * Tt + t) * inner;
      const T* nxt = px + (ni * Tt + t + 1) * inner;
      T* o = po + (ni * Tt + t) * inner;
      for (int64_t i = 0; i < inner; ++i) o[i] = nxt[i] - cur[i];
    }
  return make_op<T>(std::move(out), {x}, [N, Tt, inner](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    const T* g = self.grad.ptr();
    T* dx = p->grad.ptr();
    for (int64_t ni = 0; ni < N; ++ni)
      for (int64_t t = 0; t + 1 < Tt; ++t) {
        const T* go = g + (ni * Tt + t) * inner;
        T* dc = dx + (ni * Tt + t) * inner;
        T* dn = dx + (ni * Tt + t + 1) * inner;
        for (int64_t i = 0; i < inner; ++i) {
          dn[i] += go[i];
          dc[i] -= go[i];
        }
      }
  });
}

// Repeat each index along `axis` r times (out extent = in extent * r,
// out index c maps to in index c / r).
template <typename T>
Var<T> repeat_axis(const Var<T>& x, int64_t axis, int64_t r) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= x.value().ndim()) throw ValidationError("repeat_axis: invalid axis");
  if (r < 1) throw ValidationError("repeat_axis: repeat count must be >= 1");
  int64_t len = s[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  int64_t outer = x.numel() / (len * inner);
  Shape os = s;
  os[static_cast<size_t>(axis)] = len * r;
  Tensor<T> out(os);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t c = 0; c < len * r; ++c)
      for (int64_t i = 0; i < inner; ++i)
        out[(o * len * r + c) * inner + i] = x.value()[(o * len + c / r) * inner + i];
  return make_op<T>(std::move(out), {x}, [outer, len, inner, r](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t c = 0; c < len * r; ++c)
        for (int64_t i = 0; i < inner; ++i)
          p->grad[(o * len + c / r) * inner + i] += self.grad[(o * len * r + c) * inner + i];
  });
}

// ---------------------------------------------------------------------------
// Mean two-class (or K-class) cross-entropy over logits, via log-sum-exp.

template <typename T>
Var<T> cross_entropy_with_logits(const Var<T>& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ValidationError("cross_entropy: logits must be (N, K)");
  int64_t N = s[0], K = s[1];
  if (static_cast<int64_t>(labels.size()) != N)
    throw ValidationError("cross_entropy: label count does not match batch");
  for (int y : labels)
    if (y < 0 || y >= K)
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " outside [0," +
                            std::to_string(K) + ")");

  Tensor<T> probs(s);
  Acc<T> total = 0;
  const T* z = logits.value().ptr();
  for (int64_t i = 0; i < N; ++i) {
    Acc<T> mx = -Acc<T>(1e300);
    for (int64_t j = 0; j < K; ++j) mx = std::max(mx, static_cast<Acc<T>>(z[i * K + j]));
    Acc<T> sum = 0;
    for (int64_t j = 0; j < K; ++j) sum += std::exp(static_cast<Acc<T>>(z[i * K + j]) - mx);
    Acc<T> lse = mx + std::log(sum);
    total += lse - static_cast<Acc<T>>(z[i * K + labels[static_cast<size_t>(i)]]);
    for (int64_t j = 0; j < K; ++j)
      probs[i * K + j] = static_cast<T>(std::exp(static_cast<Acc<T>>(z[i * K + j]) - lse));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / N));

  return make_op<T>(std::move(out), {logits},
                    [probs = std::move(probs), labels, N, K](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    T g0 = self.grad[0];
    for (int64_t i = 0; i < N; ++i)
      for (int64_t j = 0; j < K; ++j) {
        T onehot = (j == labels[static_cast<size_t>(i)]) ? T(1) : T(0);
        p->grad[i * K + j] += g0 * (probs[i * K + j] - onehot) / static_cast<T>(N);
      }
  });
}

// ---------------------------------------------------------------------------
// Affine helpers.

template <typename T>
Var<T> bias_like(const Var<T>& b, int64_t ndim) {
  Shape s(static_cast<size_t>(ndim), 1);
  s.back() = b.numel();
  return reshape(b, std::move(s));
}

// y = x w + b over the last axis.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  Var<T> y = matmul(x, w);
  return add(y, bias_like(b, y.value().ndim()));
}

}  // namespace listenlab
