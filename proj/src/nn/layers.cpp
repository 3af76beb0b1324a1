#include "connectome/nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <map>

namespace connectome::nn {

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::maxpool3d: return "maxpool3d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    case LayerKind::edge_to_node: return "edge_to_node";
    case LayerKind::node_to_graph: return "node_to_graph";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  static const std::map<std::string, LayerKind> m{
      {"conv3d", LayerKind::conv3d},         {"maxpool3d", LayerKind::maxpool3d},
      {"batchnorm", LayerKind::batchnorm},   {"dense", LayerKind::dense},
      {"dropout", LayerKind::dropout},       {"activation", LayerKind::activation},
      {"flatten", LayerKind::flatten},       {"edge_to_node", LayerKind::edge_to_node},
      {"node_to_graph", LayerKind::node_to_graph}};
  auto it = m.find(s);
  require(it != m.end(), Errc::format, "unknown layer kind '" + s + "'");
  return it->second;
}

Activation activation_from_string(const std::string& s) {
  static const std::map<std::string, Activation> m{{"elu", Activation::elu},
                                                   {"relu", Activation::relu},
                                                   {"leaky_relu", Activation::leaky_relu},
                                                   {"sigmoid", Activation::sigmoid},
                                                   {"linear", Activation::linear}};
  auto it = m.find(s);
  require(it != m.end(), Errc::format, "unknown activation '" + s + "'");
  return it->second;
}

LayerSpec LayerSpec::conv3d(int filters, int kernel, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::conv3d;
  s.units = filters;
  s.kernel = kernel;
  s.padding = padding;
  return s;
}
LayerSpec LayerSpec::maxpool3d(int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::maxpool3d;
  s.window = window;
  s.stride = stride;
  return s;
}
LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  return s;
}
LayerSpec LayerSpec::dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}
LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate;
  return s;
}
LayerSpec LayerSpec::act(Activation a, double alpha) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  s.alpha = alpha;
  return s;
}
LayerSpec LayerSpec::flatten() { return LayerSpec{}; }
LayerSpec LayerSpec::edge_to_node(int filters) {
  LayerSpec s;
  s.kind = LayerKind::edge_to_node;
  s.units = filters;
  return s;
}
LayerSpec LayerSpec::node_to_graph(int outputs) {
  LayerSpec s;
  s.kind = LayerKind::node_to_graph;
  s.units = outputs;
  return s;
}

template <typename T>
T activate(Activation a, double alpha, T x) {
  switch (a) {
    case Activation::elu: return x > 0 ? x : static_cast<T>(alpha) * std::expm1(x);
    case Activation::relu: return x > 0 ? x : T(0);
    case Activation::leaky_relu: return x > 0 ? x : static_cast<T>(alpha) * x;
    case Activation::sigmoid:
      if (x >= 0) return T(1) / (T(1) + std::exp(-x));
      else {
        const T e = std::exp(x);
        return e / (T(1) + e);
      }
    case Activation::linear: return x;
  }
  return x;
}

namespace {

template <typename T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

Shape with_batch(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

Shape drop_batch(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

// Conv3d ---------------------------------------------------------------------

template <typename T>
class Conv3d final : public Layer<T> {
 public:
  Conv3d(const LayerSpec& spec, const Shape& in, Rng& rng) : spec_(spec) {
    require(in.size() == 4, Errc::shape, "conv3d expects (C, D, H, W) input, got " + shape_string(in));
    require(spec.units >= 1 && spec.kernel >= 1, Errc::invalid_argument, "conv3d needs filters and kernel >= 1");
    require(spec.padding == Padding::valid || spec.kernel % 2 == 1, Errc::invalid_argument,
            "same padding needs an odd kernel");
    in_channels_ = in[0];
    const auto k = static_cast<std::size_t>(spec.kernel);
    weight_ = Tensor<T>({static_cast<std::size_t>(spec.units), in_channels_, k, k, k});
    bias_ = Tensor<T>({static_cast<std::size_t>(spec.units)});
    init_uniform(weight_, in_channels_ * k * k * k, rng);
    gweight_ = Tensor<T>(weight_.shape());
    gbias_ = Tensor<T>(bias_.shape());
    (void)output_shape(in);
  }

  LayerSpec spec() const override { return spec_; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 4 && in[0] == in_channels_, Errc::shape,
            "conv3d input shape mismatch: " + shape_string(in));
    const long k = spec_.kernel;
    const long p = pad();
    Shape out{static_cast<std::size_t>(spec_.units)};
    for (int a = 1; a < 4; ++a) {
      const long o = static_cast<long>(in[a]) + 2 * p - k + 1;
      require(o >= 1, Errc::shape, "conv3d kernel larger than input extent");
      out.push_back(static_cast<std::size_t>(o));
    }
    return out;
  }

  // Lowered to GEMM per sample: Y(F, S) = W(F, M k^3) * col(M k^3, S).
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    const auto os = output_shape(drop_batch(x.shape()));
    input_ = x;
    const std::size_t N = x.dim(0), F = os[0];
    const auto S = static_cast<Eigen::Index>(os[1] * os[2] * os[3]);
    const auto rows = static_cast<Eigen::Index>(weight_.size() / F);
    Tensor<T> y(with_batch(N, os));
    ConstMat w(weight_.data(), static_cast<Eigen::Index>(F), rows);
    const auto bias = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias_.data(), F);
    for (std::size_t b = 0; b < N; ++b) {
      im2col(x, b);
      Mat out(y.data() + b * F * static_cast<std::size_t>(S), static_cast<Eigen::Index>(F), S);
      out.noalias() = w * ConstMat(col_.data(), rows, S);
      out.colwise() += bias;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    const Tensor<T>& x = input_;
    const std::size_t N = x.dim(0), F = g.dim(1);
    const auto S = static_cast<Eigen::Index>(g.dim(2) * g.dim(3) * g.dim(4));
    const auto rows = static_cast<Eigen::Index>(weight_.size() / F);
    const auto Fi = static_cast<Eigen::Index>(F);
    gweight_.fill(T(0));
    gbias_.fill(T(0));
    Tensor<T> gx;
    if (need_input_grad) gx = Tensor<T>(x.shape());
    ConstMat w(weight_.data(), Fi, rows);
    Mat gw(gweight_.data(), Fi, rows);
    auto gb = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gbias_.data(), F);
    std::vector<T> gcol;
    for (std::size_t b = 0; b < N; ++b) {
      ConstMat go(g.data() + b * F * static_cast<std::size_t>(S), Fi, S);
      gb += go.rowwise().sum();
      im2col(x, b);
      gw.noalias() += go * ConstMat(col_.data(), rows, S).transpose();
      if (need_input_grad) {
        gcol.resize(static_cast<std::size_t>(rows * S));
        Mat(gcol.data(), rows, S).noalias() = w.transpose() * go;
        col2im(gcol, gx, b);
      }
    }
    return gx;
  }

  std::vector<Tensor<T>*> parameters() override { return {&weight_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&gweight_, &gbias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv3d>(*this); }

 private:
  using Mat = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMat = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  long pad() const { return spec_.padding == Padding::same ? spec_.kernel / 2 : 0; }

  // Visits every (col row, output z, output y) run: `fn(row, dst_offset,
  // src_offset, x0, x1)` where dst/src offsets address x = 0 of the run.
  template <typename Fn>
  void for_each_run(const Tensor<T>& x, Fn&& fn) const {
    const long D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const long K = spec_.kernel, P = pad();
    const long Do = D + 2 * P - K + 1, Ho = H + 2 * P - K + 1, Wo = W + 2 * P - K + 1;
    const long M = static_cast<long>(in_channels_);
    for (long m = 0; m < M; ++m)
      for (long kz = 0; kz < K; ++kz)
        for (long ky = 0; ky < K; ++ky)
          for (long kx = 0; kx < K; ++kx) {
            const long row = ((m * K + kz) * K + ky) * K + kx;
            const long x0 = std::max(0L, P - kx), x1 = std::min(Wo, W + P - kx);
            for (long z = 0; z < Do; ++z)
              for (long yy = 0; yy < Ho; ++yy) {
                const long iz = z + kz - P, iy = yy + ky - P;
                const bool inside = iz >= 0 && iz < D && iy >= 0 && iy < H;
                fn(row, (row * Do + z) * Ho * Wo + yy * Wo,
                   inside ? ((m * D + iz) * H + iy) * W + (kx - P) : -1L, inside ? x0 : 0L,
                   inside ? x1 : 0L, Wo);
              }
          }
  }

  void im2col(const Tensor<T>& x, std::size_t b) {
    const std::size_t per_sample = x.size() / x.dim(0);
    const T* in = x.data() + b * per_sample;
    const long K = spec_.kernel, P = pad();
    const long S = (x.dim(2) + 2 * P - K + 1) * (x.dim(3) + 2 * P - K + 1) * (x.dim(4) + 2 * P - K + 1);
    col_.resize(static_cast<std::size_t>(static_cast<long>(in_channels_) * K * K * K * S));
    T* col = col_.data();
    for_each_run(x, [&](long, long dst, long src, long x0, long x1, long Wo) {
      T* d = col + dst;
      for (long i = 0; i < x0; ++i) d[i] = T(0);
      for (long i = x0; i < x1; ++i) d[i] = in[src + i];
      for (long i = std::max(x1, x0); i < Wo; ++i) d[i] = T(0);
    });
  }

  void col2im(const std::vector<T>& gcol, Tensor<T>& gx, std::size_t b) const {
    const std::size_t per_sample = gx.size() / gx.dim(0);
    T* out = gx.data() + b * per_sample;
    const T* col = gcol.data();
    for_each_run(gx, [&](long, long dst, long src, long x0, long x1, long) {
      for (long i = x0; i < x1; ++i) out[src + i] += col[dst + i];
    });
  }

  LayerSpec spec_;
  std::size_t in_channels_ = 0;
  Tensor<T> weight_, bias_, gweight_, gbias_, input_;
  std::vector<T> col_;
};

// MaxPool3d ------------------------------------------------------------------

template <typename T>
class MaxPool3d final : public Layer<T> {
 public:
  explicit MaxPool3d(const LayerSpec& spec) : spec_(spec) {
    require(spec.window >= 1 && spec.stride >= 1, Errc::invalid_argument,
            "maxpool window and stride must be positive");
  }

  LayerSpec spec() const override { return spec_; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 4, Errc::shape, "maxpool3d expects (C, D, H, W) input");
    Shape out{in[0]};
    for (int a = 1; a < 4; ++a) {
      require(static_cast<std::size_t>(spec_.window) <= in[a], Errc::shape,
              "maxpool window larger than input extent");
      out.push_back((in[a] - spec_.window) / spec_.stride + 1);
    }
    return out;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    const auto os = output_shape(drop_batch(x.shape()));
    in_shape_ = x.shape();
    const std::size_t N = x.dim(0), C = x.dim(1);
    const std::size_t D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const std::size_t Do = os[1], Ho = os[2], Wo = os[3];
    const std::size_t w = spec_.window, s = spec_.stride;
    Tensor<T> y(with_batch(N, os));
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < N * C; ++bc) {
      const std::size_t base = bc * D * H * W;
      for (std::size_t z = 0; z < Do; ++z)
        for (std::size_t yy = 0; yy < Ho; ++yy)
          for (std::size_t xx = 0; xx < Wo; ++xx, ++o) {
            std::size_t best_i = base + ((z * s) * H + yy * s) * W + xx * s;
            T best = x[best_i];
            for (std::size_t dz = 0; dz < w; ++dz)
              for (std::size_t dy = 0; dy < w; ++dy)
                for (std::size_t dx = 0; dx < w; ++dx) {
                  const std::size_t i = base + ((z * s + dz) * H + yy * s + dy) * W + xx * s + dx;
                  if (x[i] > best) {
                    best = x[i];
                    best_i = i;
                  }
                }
            y[o] = best;
            argmax_[o] = best_i;
          }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    if (!need_input_grad) return {};
    Tensor<T> gx(in_shape_);
    for (std::size_t o = 0; o < g.size(); ++o) gx[argmax_[o]] += g[o];
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool3d>(*this); }

 private:
  LayerSpec spec_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

// BatchNorm ------------------------------------------------------------------

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(const LayerSpec& spec, const Shape& in) : spec_(spec) {
    require(!in.empty(), Errc::shape, "batchnorm needs a channel axis");
    channels_ = in[0];
    gamma_ = Tensor<T>({channels_}, T(1));
    beta_ = Tensor<T>({channels_}, T(0));
    ggamma_ = Tensor<T>({channels_});
    gbeta_ = Tensor<T>({channels_});
    running_mean_ = Tensor<T>({channels_}, T(0));
    running_var_ = Tensor<T>({channels_}, T(1));
  }

  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override {
    require(!in.empty() && in[0] == channels_, Errc::shape, "batchnorm channel mismatch");
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng*) override {
    (void)output_shape(drop_batch(x.shape()));
    const std::size_t N = x.dim(0), C = channels_;
    const std::size_t S = x.size() / (N * C);
    mode_ = mode;
    Tensor<T> y(x.shape());
    inv_std_.assign(C, T(0));
    xhat_ = Tensor<T>(x.shape());
    if (mode == Mode::eval) {
      for (std::size_t c = 0; c < C; ++c) {
        const T inv = T(1) / std::sqrt(running_var_[c] + T(kEps));
        inv_std_[c] = inv;
        for (std::size_t b = 0; b < N; ++b) {
          const std::size_t base = (b * C + c) * S;
          for (std::size_t i = 0; i < S; ++i) {
            xhat_[base + i] = (x[base + i] - running_mean_[c]) * inv;
            y[base + i] = gamma_[c] * xhat_[base + i] + beta_[c];
          }
        }
      }
      return y;
    }

    require(N >= 2, Errc::invalid_argument, "batchnorm needs batch size >= 2 in train mode");
    const double m = static_cast<double>(N * S);
    for (std::size_t c = 0; c < C; ++c) {
      double sum = 0.0;
      for (std::size_t b = 0; b < N; ++b)
        for (std::size_t i = 0; i < S; ++i) sum += x[(b * C + c) * S + i];
      const double mean = sum / m;
      double ss = 0.0;
      for (std::size_t b = 0; b < N; ++b)
        for (std::size_t i = 0; i < S; ++i) {
          const double d = x[(b * C + c) * S + i] - mean;
          ss += d * d;
        }
      const double var = ss / m;
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
      inv_std_[c] = inv;
      for (std::size_t b = 0; b < N; ++b)
        for (std::size_t i = 0; i < S; ++i) {
          const std::size_t k = (b * C + c) * S + i;
          xhat_[k] = (x[k] - static_cast<T>(mean)) * inv;
          y[k] = gamma_[c] * xhat_[k] + beta_[c];
        }
      running_mean_[c] = static_cast<T>((1.0 - kMomentum) * running_mean_[c] + kMomentum * mean);
      running_var_[c] =
          static_cast<T>((1.0 - kMomentum) * running_var_[c] + kMomentum * var * m / (m - 1.0));
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    const std::size_t N = g.dim(0), C = channels_;
    const std::size_t S = g.size() / (N * C);
    ggamma_.fill(T(0));
    gbeta_.fill(T(0));
    Tensor<T> gx;
    if (need_input_grad) gx = Tensor<T>(g.shape());

    if (mode_ == Mode::eval) {
      // Affine map with frozen statistics.
      for (std::size_t b = 0; b < N; ++b)
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < S; ++i) {
            const std::size_t k = (b * C + c) * S + i;
            gbeta_[c] += g[k];
            ggamma_[c] += g[k] * xhat_[k];
            if (need_input_grad) gx[k] = g[k] * gamma_[c] * inv_std_[c];
          }
      return gx;
    }

    const double m = static_cast<double>(N * S);
    for (std::size_t c = 0; c < C; ++c) {
      double sg = 0.0, sgx = 0.0;
      for (std::size_t b = 0; b < N; ++b)
        for (std::size_t i = 0; i < S; ++i) {
          const std::size_t k = (b * C + c) * S + i;
          sg += g[k];
          sgx += g[k] * xhat_[k];
        }
      gbeta_[c] = static_cast<T>(sg);
      ggamma_[c] = static_cast<T>(sgx);
      if (!need_input_grad) continue;
      // dx = gamma * inv_std / m * (m * g - sum(g) - xhat * sum(g * xhat))
      const double scale = gamma_[c] * inv_std_[c] / m;
      for (std::size_t b = 0; b < N; ++b)
        for (std::size_t i = 0; i < S; ++i) {
          const std::size_t k = (b * C + c) * S + i;
          gx[k] = static_cast<T>(scale * (m * g[k] - sg - xhat_[k] * sgx));
        }
    }
    return gx;
  }

  std::vector<Tensor<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> gradients() override { return {&ggamma_, &gbeta_}; }
  std::vector<Tensor<T>*> buffers() override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }

 private:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  LayerSpec spec_;
  std::size_t channels_ = 0;
  Mode mode_ = Mode::eval;
  Tensor<T> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_, xhat_;
  std::vector<T> inv_std_;
};

// Dense ----------------------------------------------------------------------

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(const LayerSpec& spec, const Shape& in, Rng& rng) : spec_(spec) {
    require(in.size() == 1, Errc::shape, "dense expects a flat input, got " + shape_string(in));
    require(spec.units >= 1, Errc::invalid_argument, "dense needs units >= 1");
    in_ = in[0];
    out_ = static_cast<std::size_t>(spec.units);
    weight_ = Tensor<T>({out_, in_});
    bias_ = Tensor<T>({out_});
    init_uniform(weight_, in_, rng);
    gweight_ = Tensor<T>(weight_.shape());
    gbias_ = Tensor<T>(bias_.shape());
  }

  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override {
    require(in.size() == 1 && in[0] == in_, Errc::shape,
            "dense input shape mismatch: " + shape_string(in) + " vs (" + std::to_string(in_) + ")");
    return {out_};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    (void)output_shape(drop_batch(x.shape()));
    input_ = x;
    const std::size_t N = x.dim(0);
    Tensor<T> y({N, out_});
    for (std::size_t b = 0; b < N; ++b) {
      const T* xb = x.data() + b * in_;
      for (std::size_t o = 0; o < out_; ++o) {
        const T* w = weight_.data() + o * in_;
        T acc = 0;
        for (std::size_t i = 0; i < in_; ++i) acc += w[i] * xb[i];
        y[b * out_ + o] = acc + bias_[o];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    const std::size_t N = g.dim(0);
    gweight_.fill(T(0));
    gbias_.fill(T(0));
    for (std::size_t b = 0; b < N; ++b) {
      const T* xb = input_.data() + b * in_;
      for (std::size_t o = 0; o < out_; ++o) {
        const T go = g[b * out_ + o];
        gbias_[o] += go;
        T* gw = gweight_.data() + o * in_;
        for (std::size_t i = 0; i < in_; ++i) gw[i] += go * xb[i];
      }
    }
    if (!need_input_grad) return {};
    Tensor<T> gx({N, in_});
    for (std::size_t b = 0; b < N; ++b) {
      T* gxb = gx.data() + b * in_;
      for (std::size_t o = 0; o < out_; ++o) {
        const T go = g[b * out_ + o];
        const T* w = weight_.data() + o * in_;
        for (std::size_t i = 0; i < in_; ++i) gxb[i] += go * w[i];
      }
    }
    return gx;
  }

  std::vector<Tensor<T>*> parameters() override { return {&weight_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&gweight_, &gbias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  LayerSpec spec_;
  std::size_t in_ = 0, out_ = 0;
  Tensor<T> weight_, bias_, gweight_, gbias_, input_;
};

// Dropout --------------------------------------------------------------------

template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(const LayerSpec& spec) : spec_(spec) {
    require(spec.rate >= 0.0 && spec.rate < 1.0, Errc::invalid_argument, "dropout rate must lie in [0, 1)");
  }

  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng* rng) override {
    if (mode == Mode::eval || spec_.rate == 0.0) {
      mask_.clear();
      return x;
    }
    require(rng != nullptr, Errc::invalid_argument, "dropout in train mode needs an RNG");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - spec_.rate));
    mask_.assign(x.size(), T(0));
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!rng->bernoulli(spec_.rate)) mask_[i] = keep_scale;
      y[i] = x[i] * mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    if (!need_input_grad) return {};
    if (mask_.empty()) return g;
    Tensor<T> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * mask_[i];
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }

 private:
  LayerSpec spec_;
  std::vector<T> mask_;
};

// Activation -----------------------------------------------------------------

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(const LayerSpec& spec) : spec_(spec) {}

  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    input_ = x;
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(spec_.activation, spec_.alpha, x[i]);
    output_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    if (!need_input_grad) return {};
    Tensor<T> gx(g.shape());
    const T alpha = static_cast<T>(spec_.alpha);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T x = input_[i];
      T d = 1;
      switch (spec_.activation) {
        case Activation::elu: d = x > 0 ? T(1) : output_[i] + alpha; break;
        case Activation::relu: d = x > 0 ? T(1) : T(0); break;
        case Activation::leaky_relu: d = x > 0 ? T(1) : alpha; break;
        case Activation::sigmoid: d = output_[i] * (T(1) - output_[i]); break;
        case Activation::linear: d = 1; break;
      }
      gx[i] = g[i] * d;
    }
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ActivationLayer>(*this); }

 private:
  LayerSpec spec_;
  Tensor<T> input_, output_;
};

// Flatten --------------------------------------------------------------------

template <typename T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(const LayerSpec& spec) : spec_(spec) {}
  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    in_shape_ = x.shape();
    Tensor<T> y = x;
    y.reshape({x.dim(0), x.size() / x.dim(0)});
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    if (!need_input_grad) return {};
    Tensor<T> gx = g;
    gx.reshape(in_shape_);
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  LayerSpec spec_;
  Shape in_shape_;
};

// Edge-to-node ---------------------------------------------------------------

// out(f, i) = b_f + sum_c sum_j row(f,c,j) A(c,i,j) + col(f,c,j) A(c,j,i)
template <typename T>
class EdgeToNode final : public Layer<T> {
 public:
  EdgeToNode(const LayerSpec& spec, const Shape& in, Rng& rng) : spec_(spec) {
    require(in.size() == 3 && in[1] == in[2], Errc::shape,
            "edge_to_node expects (C, R, R) input, got " + shape_string(in));
    require(spec.units >= 1, Errc::invalid_argument, "edge_to_node needs filters >= 1");
    C_ = in[0];
    R_ = in[1];
    F_ = static_cast<std::size_t>(spec.units);
    row_ = Tensor<T>({F_, C_, R_});
    col_ = Tensor<T>({F_, C_, R_});
    bias_ = Tensor<T>({F_});
    init_uniform(row_, 2 * C_ * R_, rng);
    init_uniform(col_, 2 * C_ * R_, rng);
    grow_ = Tensor<T>(row_.shape());
    gcol_ = Tensor<T>(col_.shape());
    gbias_ = Tensor<T>(bias_.shape());
  }

  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override {
    require(in.size() == 3 && in[0] == C_ && in[1] == R_ && in[2] == R_, Errc::shape,
            "edge_to_node input shape mismatch: " + shape_string(in));
    return {F_, R_};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    (void)output_shape(drop_batch(x.shape()));
    input_ = x;
    const std::size_t N = x.dim(0);
    Tensor<T> y({N, F_, R_});
    for (std::size_t b = 0; b < N; ++b)
      for (std::size_t f = 0; f < F_; ++f)
        for (std::size_t i = 0; i < R_; ++i) {
          T acc = bias_[f];
          for (std::size_t c = 0; c < C_; ++c) {
            const T* A = x.data() + (b * C_ + c) * R_ * R_;
            const T* r = row_.data() + (f * C_ + c) * R_;
            const T* q = col_.data() + (f * C_ + c) * R_;
            for (std::size_t j = 0; j < R_; ++j) acc += r[j] * A[i * R_ + j] + q[j] * A[j * R_ + i];
          }
          y[(b * F_ + f) * R_ + i] = acc;
        }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g, bool need_input_grad) override {
    const std::size_t N = g.dim(0);
    grow_.fill(T(0));
    gcol_.fill(T(0));
    gbias_.fill(T(0));
    Tensor<T> gx;
    if (need_input_grad) gx = Tensor<T>(input_.shape());
    for (std::size_t b = 0; b < N; ++b)
      for (std::size_t f = 0; f < F_; ++f) {
        const T* go = g.data() + (b * F_ + f) * R_;
        for (std::size_t i = 0; i < R_; ++i) gbias_[f] += go[i];
        for (std::size_t c = 0; c < C_; ++c) {
          const T* A = input_.data() + (b * C_ + c) * R_ * R_;
          T* gr = grow_.data() + (f * C_ + c) * R_;
          T* gq = gcol_.data() + (f * C_ + c) * R_;
          const T* r = row_.data() + (f * C_ + c) * R_;
          const T* q = col_.data() + (f * C_ + c) * R_;
          T* gA = need_input_grad ? gx.data() + (b * C_ + c) * R_ * R_ : nullptr;
          for (std::size_t i = 0; i < R_; ++i) {
            const T gi = go[i];
            for (std::size_t j = 0; j < R_; ++j) {
              gr[j] += gi * A[i * R_ + j];
              gq[j] += gi * A[j * R_ + i];
            }
            if (gA) {
              // A(i, j) feeds out(i) through row(j) and out(j) through col(i).
              for (std::size_t j = 0; j < R_; ++j) gA[i * R_ + j] += gi * r[j] + go[j] * q[i];
            }
          }
        }
      }
    return gx;
  }

  std::vector<Tensor<T>*> parameters() override { return {&row_, &col_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&grow_, &gcol_, &gbias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<EdgeToNode>(*this); }

 private:
  LayerSpec spec_;
  std::size_t C_ = 0, R_ = 0, F_ = 0;
  Tensor<T> row_, col_, bias_, grow_, gcol_, gbias_, input_;
};

// Node-to-graph --------------------------------------------------------------

template <typename T>
class NodeToGraph final : public Layer<T> {
 public:
  NodeToGraph(const LayerSpec& spec, const Shape& in, Rng& rng) : spec_(spec) {
    require(in.size() == 2, Errc::shape, "node_to_graph expects (F, R) input, got " + shape_string(in));
    require(spec.units >= 1, Errc::invalid_argument, "node_to_graph needs outputs >= 1");
    in_shape_ = in;
    G_ = static_cast<std::size_t>(spec.units);
    K_ = in[0] * in[1];
    weight_ = Tensor<T>({G_, in[0], in[1]});
    bias_ = Tensor<T>({G_});
    init_uniform(weight_, K_, rng);
    gweight_ = Tensor<T>(weight_.shape());
    gbias_ = Tensor<T>(bias_.shape());
  }

  LayerSpec spec() const override { return spec_; }
  Shape output_shape(const Shape& in) const override {
    require(in == in_shape_, Errc::shape, "node_to_graph input shape mismatch: " + shape_string(in));
    return {G_};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng*) override {
    (void)output_shape(drop_batch(x.shape()));
    input_ = x;
    const std::size_t N = x.dim(0);
    Tensor<T> y({N, G_});
    for (std::size_t b = 0; b < N; ++b)
      for (std::size_t g = 0; g < G_; ++g) {
        const T* w = weight_.data() + g * K_;
        const T* xb = x.data() + b * K_;
        T acc = bias_[g];
        for (std::size_t k = 0; k < K_; ++k) acc += w[k] * xb[k];
        y[b * G_ + g] = acc;
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool need_input_grad) override {
    const std::size_t N = gout.dim(0);
    gweight_.fill(T(0));
    gbias_.fill(T(0));
    Tensor<T> gx;
    if (need_input_grad) gx = Tensor<T>(input_.shape());
    for (std::size_t b = 0; b < N; ++b)
      for (std::size_t g = 0; g < G_; ++g) {
        const T go = gout[b * G_ + g];
        gbias_[g] += go;
        T* gw = gweight_.data() + g * K_;
        const T* w = weight_.data() + g * K_;
        const T* xb = input_.data() + b * K_;
        for (std::size_t k = 0; k < K_; ++k) gw[k] += go * xb[k];
        if (need_input_grad) {
          T* gxb = gx.data() + b * K_;
          for (std::size_t k = 0; k < K_; ++k) gxb[k] += go * w[k];
        }
      }
    return gx;
  }

  std::vector<Tensor<T>*> parameters() override { return {&weight_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&gweight_, &gbias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<NodeToGraph>(*this); }

 private:
  LayerSpec spec_;
  Shape in_shape_;
  std::size_t G_ = 0, K_ = 0;
  Tensor<T> weight_, bias_, gweight_, gbias_, input_;
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, Rng& rng) {
  std::unique_ptr<Layer<T>> layer;
  switch (spec.kind) {
    case LayerKind::conv3d: layer = std::make_unique<Conv3d<T>>(spec, in, rng); break;
    case LayerKind::maxpool3d: layer = std::make_unique<MaxPool3d<T>>(spec); break;
    case LayerKind::batchnorm: layer = std::make_unique<BatchNorm<T>>(spec, in); break;
    case LayerKind::dense: layer = std::make_unique<Dense<T>>(spec, in, rng); break;
    case LayerKind::dropout: layer = std::make_unique<Dropout<T>>(spec); break;
    case LayerKind::activation: layer = std::make_unique<ActivationLayer<T>>(spec); break;
    case LayerKind::flatten: layer = std::make_unique<Flatten<T>>(spec); break;
    case LayerKind::edge_to_node: layer = std::make_unique<EdgeToNode<T>>(spec, in, rng); break;
    case LayerKind::node_to_graph: layer = std::make_unique<NodeToGraph<T>>(spec, in, rng); break;
  }
  require(layer != nullptr, Errc::invalid_argument, "unknown layer kind");
  (void)layer->output_shape(in);
  return layer;
}

template std::unique_ptr<Layer<float>> make_layer<float>(const LayerSpec&, const Shape&, Rng&);
template std::unique_ptr<Layer<double>> make_layer<double>(const LayerSpec&, const Shape&, Rng&);
template float activate<float>(Activation, double, float);
template double activate<double>(Activation, double, double);

}  // namespace connectome::nn
