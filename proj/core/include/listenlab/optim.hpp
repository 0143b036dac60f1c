#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "listenlab/autodiff.hpp"
#include "listenlab/common.hpp"
#include "listenlab/mam.hpp"  // ParamList

namespace listenlab {

// Standard Adam with bias correction; moments accumulate in double so update
// behavior does not depend on the scalar type being trained. Seed-free and
// fully deterministic.
template <typename T>
class Adam {
 public:
  Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr >= 0.0)) throw ValidationError("adam: learning rate must be >= 0");
  }

  // Applies one update in place using each parameter's accumulated gradient.
  // Moment state is keyed by position, so the parameter list must have the
  // same order and shapes on every call.
  void step(ParamList<T>& params) {
    if (m_.empty()) {
      for (auto& [name, p] : params) {
        m_.push_back(Tensor<double>::zeros(p.shape()));
        v_.push_back(Tensor<double>::zeros(p.shape()));
      }
    }
    if (m_.size() != params.size())
      throw ValidationError("adam: parameter count changed between steps");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Var<T>& p = params[i].second;
      const Tensor<T>& g = p.grad();
      Tensor<T>& w = p.mutable_value();
      if (g.numel() != m_[i].numel())
        throw ValidationError("adam: gradient shape mismatch for " + params[i].first);
      for (int64_t k = 0; k < w.numel(); ++k) {
        double gk = static_cast<double>(g[k]);
        m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * gk;
        v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * gk * gk;
        double mhat = m_[i][k] / bc1;
        double vhat = v_[i][k] / bc2;
        w[k] = static_cast<T>(static_cast<double>(w[k]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<double>> m_, v_;
};

}  // namespace listenlab
