#include "connectome/nn/network.hpp"

namespace connectome::nn {

template <typename T>
Network<T>::Network(Shape input_shape, std::vector<LayerSpec> specs, std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)), specs_(std::move(specs)) {
  require(!input_shape_.empty(), Errc::shape, "network input shape is empty");
  Rng rng(init_seed);
  Shape shape = input_shape_;
  for (const auto& s : specs_) {
    layers_.push_back(make_layer<T>(s, shape, rng));
    shape = layers_.back()->output_shape(shape);
  }
}

template <typename T>
Network<T>::Network(const Network& other) : input_shape_(other.input_shape_), specs_(other.specs_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

template <typename T>
Shape Network<T>::shape_after(std::size_t n) const {
  Shape s = input_shape_;
  for (std::size_t i = 0; i < n && i < layers_.size(); ++i) s = layers_[i]->output_shape(s);
  return s;
}

template <typename T>
Shape Network<T>::output_shape() const {
  return shape_after(layers_.size());
}

template <typename T>
std::size_t Network<T>::head_start() const {
  if (!specs_.empty() && specs_.back().kind == LayerKind::activation &&
      specs_.back().activation == Activation::sigmoid)
    return specs_.size() - 1;
  return specs_.size();
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode, Rng* rng, std::size_t stop) {
  require(x.rank() == input_shape_.size() + 1, Errc::shape,
          "network input must be batch x " + shape_string(input_shape_) + ", got " +
              shape_string(x.shape()));
  for (std::size_t a = 0; a < input_shape_.size(); ++a)
    require(x.dim(a + 1) == input_shape_[a], Errc::shape,
            "network input must be batch x " + shape_string(input_shape_) + ", got " +
                shape_string(x.shape()));
  stop = std::min(stop, layers_.size());
  Tensor<T> h = x;
  for (std::size_t i = 0; i < stop; ++i) h = layers_[i]->forward(h, mode, rng);
  return h;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad, std::size_t from, bool need_input_grad) {
  from = std::min(from, layers_.size());
  Tensor<T> g = grad;
  for (std::size_t i = from; i-- > 0;) g = layers_[i]->backward(g, i > 0 || need_input_grad);
  return g;
}

template <typename T>
std::vector<Tensor<T>*> Network<T>::parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Tensor<T>*> Network<T>::gradients() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->gradients()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Tensor<T>*> Network<T>::buffers() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->buffers()) out.push_back(p);
  return out;
}

namespace {
template <typename T>
std::vector<T> gather(const std::vector<Tensor<T>*>& ts) {
  std::vector<T> out;
  for (auto* t : ts) out.insert(out.end(), t->values().begin(), t->values().end());
  return out;
}

template <typename T>
void scatter(const std::vector<Tensor<T>*>& ts, std::span<const T> values) {
  std::size_t total = 0;
  for (auto* t : ts) total += t->size();
  require(values.size() == total, Errc::shape,
          "parameter vector has " + std::to_string(values.size()) + " values, expected " +
              std::to_string(total));
  std::size_t off = 0;
  for (auto* t : ts) {
    std::copy(values.begin() + off, values.begin() + off + t->size(), t->data());
    off += t->size();
  }
}
}  // namespace

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto* t : const_cast<Network*>(this)->parameters()) n += t->size();
  return n;
}

template <typename T>
std::size_t Network<T>::buffer_count() const {
  std::size_t n = 0;
  for (auto* t : const_cast<Network*>(this)->buffers()) n += t->size();
  return n;
}

template <typename T>
std::vector<T> Network<T>::flat_parameters() const {
  return gather(const_cast<Network*>(this)->parameters());
}

template <typename T>
void Network<T>::set_flat_parameters(std::span<const T> values) {
  scatter(parameters(), values);
}

template <typename T>
std::vector<T> Network<T>::flat_buffers() const {
  return gather(const_cast<Network*>(this)->buffers());
}

template <typename T>
void Network<T>::set_flat_buffers(std::span<const T> values) {
  scatter(buffers(), values);
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(input_shape_, specs_, 0);
  const auto p = flat_parameters();
  const auto b = flat_buffers();
  const std::vector<U> pu(p.begin(), p.end()), bu(b.begin(), b.end());
  out.set_flat_parameters(pu);
  out.set_flat_buffers(bu);
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;

}  // namespace connectome::nn
