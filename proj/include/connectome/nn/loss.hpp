#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "connectome/error.hpp"

namespace connectome::nn {

enum class LossKind { bce, mse };

template <typename T>
struct LossValue {
  T value{};
  std::vector<T> gradient;
};

namespace detail {
template <typename T>
void check_inputs(std::span<const T> a, std::span<const T> b) {
  require(a.size() == b.size() && !a.empty(), Errc::shape, "loss: prediction/target size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    require(std::isfinite(a[i]) && std::isfinite(b[i]), Errc::numeric, "loss: non-finite input");
}

// log(1 + exp(-|z|)) + max(z, 0) - z*y
template <typename T>
T bce_logit_term(T z, T y) {
  return std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
}
}  // namespace detail

/// Mean binary cross-entropy on pre-sigmoid logits; gradient is w.r.t. the logits.
template <typename T>
LossValue<T> bce_with_logits(std::span<const T> logits, std::span<const T> target) {
  detail::check_inputs(logits, target);
  const T n = static_cast<T>(logits.size());
  LossValue<T> out{T(0), std::vector<T>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T z = logits[i];
    out.value += detail::bce_logit_term(z, target[i]);
    const T p = z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
    out.gradient[i] = (p - target[i]) / n;
  }
  out.value /= n;
  return out;
}

/// Mean loss in prediction space. For bce the predictions are probabilities in
/// (0, 1); the value is evaluated through the equivalent logit for stability.
template <typename T>
LossValue<T> loss(LossKind kind, std::span<const T> prediction, std::span<const T> target) {
  detail::check_inputs(prediction, target);
  const T n = static_cast<T>(prediction.size());
  LossValue<T> out{T(0), std::vector<T>(prediction.size())};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const T p = prediction[i];
    const T y = target[i];
    if (kind == LossKind::mse) {
      const T d = p - y;
      out.value += d * d;
      out.gradient[i] = T(2) * d / n;
    } else {
      require(p > 0 && p < 1, Errc::invalid_argument, "bce prediction must lie in (0, 1)");
      const T z = std::log(p) - std::log1p(-p);
      out.value += detail::bce_logit_term(z, y);
      out.gradient[i] = (p - y) / (p * (T(1) - p)) / n;
    }
  }
  out.value /= n;
  return out;
}

}  // namespace connectome::nn
