#pragma once

#include <cmath>
#include <deque>
#include <span>
#include <vector>

#include "connectome/nn/tensor.hpp"

namespace connectome::nn {

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double lr = 0.001;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD with momentum (v = mu*v + g; p -= lr*v) or bias-corrected Adam. Buffers
/// mirror the parameter tensors they were created for.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const std::vector<Tensor<T>*>& params) : cfg_(cfg) {
    require(cfg.lr > 0.0, Errc::invalid_argument, "learning rate must be positive");
    for (auto* p : params) {
      first_.emplace_back(p->size(), T(0));
      if (cfg.kind == OptimizerKind::adam) second_.emplace_back(p->size(), T(0));
    }
  }

  void step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>*>& grads) {
    require(params.size() == grads.size() && params.size() == first_.size(), Errc::shape,
            "optimizer: parameter list does not match its buffers");
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      const auto& g = *grads[k];
      require(p.size() == g.size() && p.size() == first_[k].size(), Errc::shape,
              "optimizer: gradient shape mismatch");
      auto& v = first_[k];
      if (cfg_.kind == OptimizerKind::sgd_momentum) {
        const T mu = static_cast<T>(cfg_.momentum), lr = static_cast<T>(cfg_.lr);
        for (std::size_t i = 0; i < p.size(); ++i) {
          v[i] = mu * v[i] + g[i];
          p[i] -= lr * v[i];
        }
      } else {
        auto& s = second_[k];
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        for (std::size_t i = 0; i < p.size(); ++i) {
          v[i] = b1 * v[i] + (T(1) - b1) * g[i];
          s[i] = b2 * s[i] + (T(1) - b2) * g[i] * g[i];
          const double mhat = v[i] / c1;
          const double shat = s[i] / c2;
          p[i] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(shat) + cfg_.eps));
        }
      }
    }
  }

  const OptimizerConfig& config() const { return cfg_; }
  long steps() const { return steps_; }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
  long steps_ = 0;
};

/// Stochastic weight averaging over the most recent `window` snapshots
/// (one per epoch); older snapshots fall out of the average.
template <typename T>
class SwaState {
 public:
  explicit SwaState(int window = 20) : window_(window) {
    require(window >= 1, Errc::invalid_argument, "SWA window must be >= 1");
  }

  void update(std::span<const T> params) {
    require(history_.empty() || params.size() == history_.front().size(), Errc::shape,
            "SWA: parameter count changed");
    history_.emplace_back(params.begin(), params.end());
    if (static_cast<int>(history_.size()) > window_) history_.pop_front();
  }

  int epochs() const { return static_cast<int>(history_.size()); }
  int window() const { return window_; }

  std::vector<T> finalize() const {
    require(!history_.empty(), Errc::invalid_argument, "SWA finalize before any update");
    std::vector<double> acc(history_.front().size(), 0.0);
    for (const auto& h : history_)
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += h[i];
    std::vector<T> out(acc.size());
    const double n = static_cast<double>(history_.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i] / n);
    return out;
  }

 private:
  int window_;
  std::deque<std::vector<T>> history_;
};

}  // namespace connectome::nn
