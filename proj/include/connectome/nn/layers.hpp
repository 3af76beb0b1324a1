#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "connectome/nn/tensor.hpp"
#include "connectome/rng.hpp"

namespace connectome::nn {

enum class LayerKind {
  conv3d,
  maxpool3d,
  batchnorm,
  dense,
  dropout,
  activation,
  flatten,
  edge_to_node,
  node_to_graph,
};

enum class Activation { elu, relu, leaky_relu, sigmoid, linear };
enum class Padding { same, valid };
enum class Mode { train, eval };

const char* to_string(LayerKind k);
const char* to_string(Activation a);
LayerKind layer_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

/// Architecture element. Input channel counts are inferred from the shape
/// flowing into the layer, so a spec only names what the layer produces.
struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  int units = 0;  // conv3d filters, dense outputs, E2N filters, N2G outputs
  int kernel = 3;
  Padding padding = Padding::same;
  int window = 2;
  int stride = 2;
  double rate = 0.0;
  Activation activation = Activation::linear;
  double alpha = 1.0;  // ELU scale or leaky slope

  static LayerSpec conv3d(int filters, int kernel = 3, Padding padding = Padding::same);
  static LayerSpec maxpool3d(int window = 2, int stride = 2);
  static LayerSpec batchnorm();
  static LayerSpec dense(int units);
  static LayerSpec dropout(double rate);
  static LayerSpec act(Activation a, double alpha = 1.0);
  static LayerSpec flatten();
  static LayerSpec edge_to_node(int filters);
  static LayerSpec node_to_graph(int outputs);

  bool operator==(const LayerSpec&) const = default;
};

/// One differentiable stage. Inputs and outputs carry a leading batch axis;
/// `forward` caches what `backward` needs, and `backward` overwrites the
/// parameter gradients.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  /// Per-sample output shape for a per-sample input shape.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng* rng) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out, bool need_input_grad) = 0;

  virtual std::vector<Tensor<T>*> parameters() { return {}; }
  virtual std::vector<Tensor<T>*> gradients() { return {}; }
  /// Non-trained state that is still serialized (batchnorm running stats).
  virtual std::vector<Tensor<T>*> buffers() { return {}; }

  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Builds a layer for the given per-sample input shape; parameters are drawn
/// uniformly in +-sqrt(6 / fan_in), biases start at zero.
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& input_shape, Rng& rng);

// Scalar activation helpers shared with tests.
template <typename T>
T activate(Activation a, double alpha, T x);

}  // namespace connectome::nn
