#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "connectome/nn/layers.hpp"

namespace connectome::nn {

/// Sequential stack of layers over a fixed per-sample input shape.
template <typename T>
class Network {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Network() = default;
  Network(Shape input_shape, std::vector<LayerSpec> specs, std::uint64_t init_seed);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t layer_count() const { return layers_.size(); }
  Shape output_shape() const;
  /// Per-sample shape after the first `n` layers.
  Shape shape_after(std::size_t n) const;

  /// Index of a terminal sigmoid activation, or layer_count() when absent.
  std::size_t head_start() const;

  /// Runs layers [0, stop). Input carries a leading batch axis.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng* rng = nullptr, std::size_t stop = npos);
  /// Pre-sigmoid output (the network without its terminal sigmoid).
  Tensor<T> logits(const Tensor<T>& x, Mode mode, Rng* rng = nullptr) {
    return forward(x, mode, rng, head_start());
  }
  /// Back-propagates through layers [0, from) in reverse, after a forward
  /// that stopped at `from`. Returns the input gradient when requested.
  Tensor<T> backward(const Tensor<T>& grad, std::size_t from = npos, bool need_input_grad = false);

  std::vector<Tensor<T>*> parameters();
  std::vector<Tensor<T>*> gradients();
  std::vector<Tensor<T>*> buffers();
  std::size_t parameter_count() const;
  std::size_t buffer_count() const;

  std::vector<T> flat_parameters() const;
  void set_flat_parameters(std::span<const T> values);
  std::vector<T> flat_buffers() const;
  void set_flat_buffers(std::span<const T> values);

  template <typename U>
  Network<U> cast() const;

 private:
  Shape input_shape_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace connectome::nn
