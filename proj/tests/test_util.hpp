#pragma once

// Shared helpers for the unit tests: temp directories and a generic
// per-operation gradient check against an extended-precision central
// difference oracle.

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "listenlab/finite_diff.hpp"
#include "listenlab/ops.hpp"
#include "listenlab/rng.hpp"

namespace testutil {

// A unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("listenlab_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Max per-element relative error between the analytic gradient of
// loss = sum(w ⊙ f(inputs)) computed in scalar type T and a central
// finite difference evaluated in long double at the same T-representable
// point. `f` must be callable for any scalar type (generic lambda).
//
// Inputs are drawn uniformly from [lo, hi]; when avoid_zero > 0 each value
// additionally keeps |x| >= avoid_zero (for kinked ops such as relu).
template <typename T, typename F>
double op_grad_max_rel_err(F&& f, const std::vector<listenlab::Shape>& shapes, uint64_t seed,
                           double lo = -1.0, double hi = 1.0, double avoid_zero = 0.0,
                           double h = 1e-3) {
  using namespace listenlab;
  CounterRng rng(seed, 0x0717);

  // Draw the evaluation point in T so it embeds exactly in long double.
  std::vector<Tensor<T>> points;
  points.reserve(shapes.size());
  for (const auto& s : shapes) {
    Tensor<T> t(s);
    for (auto& v : t.data()) {
      double x = rng.uniform(lo, hi);
      if (avoid_zero > 0.0 && std::abs(x) < avoid_zero) x = (x < 0 ? -avoid_zero : avoid_zero);
      v = static_cast<T>(x);
    }
    points.push_back(std::move(t));
  }

  // Analytic pass in T.
  std::vector<Var<T>> inputs;
  inputs.reserve(points.size());
  for (const auto& t : points) inputs.emplace_back(t, true);
  Var<T> out = f(inputs);
  Tensor<T> w(out.shape());
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(0.5, 1.5));
  Var<T> loss = sum_all(mul(out, Var<T>(w)));
  backward(loss);

  // Extended-precision oracle at the identical point.
  std::vector<Var<long double>> shadow;
  shadow.reserve(points.size());
  for (const auto& t : points) shadow.emplace_back(t.template cast<long double>());
  Tensor<long double> wl = w.template cast<long double>();
  auto eval = [&]() -> long double {
    NoGradGuard guard;
    Var<long double> o = f(shadow);
    long double total = 0.0L;
    for (int64_t i = 0; i < o.numel(); ++i) total += o.value()[i] * wl[i];
    return total;
  };

  double worst = 0.0;
  for (size_t k = 0; k < shadow.size(); ++k) {
    Tensor<double> numeric = finite_diff_grad<long double>(eval, shadow[k].mutable_value(), h);
    const Tensor<T>& analytic = inputs[k].grad();
    for (int64_t i = 0; i < numeric.numel(); ++i)
      worst = std::max(worst, rel_error(static_cast<double>(analytic[i]), numeric[i]));
  }
  return worst;
}

}  // namespace testutil
