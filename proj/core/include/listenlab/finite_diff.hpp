#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "listenlab/tensor.hpp"

namespace listenlab {

// Central differences: (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
// `x` is perturbed in place and restored; `f` re-evaluates the loss each
// call. The loss is carried in extended precision so the subtraction does
// not reintroduce rounding noise at small h.
template <typename T>
Tensor<double> finite_diff_grad(const std::function<long double()>& f, Tensor<T>& x, double h) {
  Tensor<double> g(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    T saved = x[i];
    x[i] = static_cast<T>(static_cast<long double>(saved) + static_cast<long double>(h));
    long double fp = f();
    x[i] = static_cast<T>(static_cast<long double>(saved) - static_cast<long double>(h));
    long double fm = f();
    x[i] = saved;
    g[i] = static_cast<double>((fp - fm) / (2.0L * static_cast<long double>(h)));
  }
  return g;
}

inline double rel_error(double analytic, double numeric) {
  constexpr double kFloor = 1e-8;
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

struct GradCheckReport {
  std::map<std::string, double> max_rel_err;  // per parameter tensor
  double worst = 0.0;
  std::string worst_param;

  void record(const std::string& name, double err) {
    double& e = max_rel_err[name];
    e = std::max(e, err);
    if (err > worst) {
      worst = err;
      worst_param = name;
    }
  }
  bool pass(double tol) const { return worst < tol; }
};

}  // namespace listenlab
