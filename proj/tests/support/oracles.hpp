#pragma once

// Independent reference implementations used only by tests. Each one follows
// the textbook definition with plain loops and extended precision, and shares
// no code with the library path it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "connectome/nn/network.hpp"
#include "connectome/rng.hpp"

namespace oracle {

inline long double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0;
  return sxy / std::sqrt(sxx * syy);
}

/// Naive 3D convolution over a single sample: x (M, D, H, W), w (N, M, k, k, k).
inline std::vector<double> conv3d(const std::vector<double>& x, int M, int D, int H, int W,
                                  const std::vector<double>& w, const std::vector<double>& b, int N,
                                  int k, bool same, int& Do, int& Ho, int& Wo) {
  const int p = same ? k / 2 : 0;
  Do = D + 2 * p - k + 1;
  Ho = H + 2 * p - k + 1;
  Wo = W + 2 * p - k + 1;
  std::vector<double> y(static_cast<std::size_t>(N) * Do * Ho * Wo, 0.0);
  for (int n = 0; n < N; ++n)
    for (int z = 0; z < Do; ++z)
      for (int yy = 0; yy < Ho; ++yy)
        for (int xx = 0; xx < Wo; ++xx) {
          long double acc = b[n];
          for (int m = 0; m < M; ++m)
            for (int a = 0; a < k; ++a)
              for (int c = 0; c < k; ++c)
                for (int e = 0; e < k; ++e) {
                  const int iz = z + a - p, iy = yy + c - p, ix = xx + e - p;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= D || iy >= H || ix >= W) continue;
                  acc += static_cast<long double>(w[(((n * M + m) * k + a) * k + c) * k + e]) *
                         x[((m * D + iz) * H + iy) * W + ix];
                }
          y[((n * Do + z) * Ho + yy) * Wo + xx] = static_cast<double>(acc);
        }
  return y;
}

/// Relative error ||a - b|| / max(||a||, ||b||), or the absolute norm when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  long double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  const long double denom = std::sqrt(std::max(na, nb));
  if (denom < 1e-12L) return static_cast<double>(std::sqrt(diff));
  return static_cast<double>(std::sqrt(diff) / denom);
}

struct GradCheck {
  double input_error = 0.0;
  double param_error = 0.0;
};

/// Central finite differences of L = sum(out * G) for a single layer in double
/// precision, against the layer's analytic backward. The layer runs in the
/// given mode; dropout-style randomness is excluded by the caller.
inline GradCheck check_layer(connectome::nn::Layer<double>& layer,
                             const connectome::nn::Tensor<double>& x, connectome::nn::Mode mode,
                             std::uint64_t seed, double h = 1e-6) {
  using connectome::nn::Tensor;
  auto objective = [&](const Tensor<double>& in, const std::vector<double>& G) {
    auto y = layer.forward(in, mode, nullptr);
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<long double>(y[i]) * G[i];
    return static_cast<double>(s);
  };

  auto y0 = layer.forward(x, mode, nullptr);
  connectome::Rng rng(seed);
  std::vector<double> G(y0.size());
  for (auto& g : G) g = rng.uniform(-1.0, 1.0);
  Tensor<double> gt(y0.shape(), G);

  layer.forward(x, mode, nullptr);
  auto gx = layer.backward(gt, true);
  std::vector<double> analytic_params;
  for (auto* g : layer.gradients())
    analytic_params.insert(analytic_params.end(), g->values().begin(), g->values().end());

  GradCheck out;
  std::vector<double> numeric_x(x.size());
  Tensor<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = objective(xp, G);
    xp[i] = orig - h;
    const double fm = objective(xp, G);
    xp[i] = orig;
    numeric_x[i] = (fp - fm) / (2 * h);
  }
  out.input_error = relative_error(gx.vector(), numeric_x);

  std::vector<double> numeric_params;
  for (auto* p : layer.parameters()) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double orig = (*p)[i];
      (*p)[i] = orig + h;
      const double fp = objective(x, G);
      (*p)[i] = orig - h;
      const double fm = objective(x, G);
      (*p)[i] = orig;
      numeric_params.push_back((fp - fm) / (2 * h));
    }
  }
  out.param_error = numeric_params.empty() ? 0.0 : relative_error(analytic_params, numeric_params);
  return out;
}

}  // namespace oracle
