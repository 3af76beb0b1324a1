#include "connectome/saliency.hpp"

#include <cmath>

#include "connectome/error.hpp"

namespace connectome {

template <typename T>
nn::Tensor<T> input_gradient(nn::Network<T>& net, const nn::Tensor<T>& sample) {
  require(sample.shape() == net.input_shape(), Errc::shape,
          "saliency input " + nn::shape_string(sample.shape()) + " does not match network input " +
              nn::shape_string(net.input_shape()));
  const auto head = net.head_start();
  require(nn::shape_size(net.shape_after(head)) == 1, Errc::shape, "saliency needs a scalar output");
  nn::Shape batched{1};
  batched.insert(batched.end(), sample.shape().begin(), sample.shape().end());
  nn::Tensor<T> x(batched, sample.vector());
  const auto out = net.forward(x, nn::Mode::eval, nullptr, head);
  auto g = net.backward(nn::Tensor<T>(out.shape(), T(1)), head, true);
  g.reshape(sample.shape());
  for (auto& v : g.values()) v = std::abs(v);
  return g;
}

template nn::Tensor<float> input_gradient<float>(nn::Network<float>&, const nn::Tensor<float>&);
template nn::Tensor<double> input_gradient<double>(nn::Network<double>&, const nn::Tensor<double>&);

nn::Tensor<float> input_gradient(NetModel& model, const FingerprintVolume& input) {
  require(model.family == Family::cnn3d, Errc::invalid_argument,
          std::string("saliency needs a cnn3d model, got ") + to_string(model.family));
  const auto& d = input.meta.dims;
  const nn::Shape shape{static_cast<std::size_t>(input.channels), static_cast<std::size_t>(d[2]),
                        static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[0])};
  auto g = input_gradient(model.net, nn::Tensor<float>(shape, input.data));
  if (model.task == Task::regression)
    for (auto& v : g.values()) v *= static_cast<float>(model.target_scale);
  return g;
}

RealVolume reduce_saliency(const nn::Tensor<float>& w, const GridMeta& meta, const MaskVolume* mask) {
  const auto nv = meta.voxel_count();
  require(w.rank() >= 1 && w.size() % nv == 0 && w.size() > 0, Errc::shape,
          "gradient tensor " + nn::shape_string(w.shape()) + " does not fit the grid");
  if (mask) require(mask->meta == meta, Errc::shape, "saliency mask grid differs");
  const auto R = w.size() / nv;
  RealVolume s{meta, 1, std::vector<float>(nv, 0.0f)};
  for (std::size_t v = 0; v < nv; ++v) {
    if (mask && !mask->at(v)) continue;
    float m = 0.0f;
    for (std::size_t c = 0; c < R; ++c) m = std::max(m, std::abs(w[c * nv + v]));
    s.data[v] = m;
  }
  return s;
}

RealVolume ensemble_saliency(const std::vector<RealVolume>& maps) {
  require(!maps.empty(), Errc::invalid_argument, "no saliency maps to average");
  const auto& meta = maps.front().meta;
  std::vector<double> acc(meta.voxel_count(), 0.0);
  for (const auto& m : maps) {
    require(m.meta == meta && m.channels == 1 && m.data.size() == acc.size(), Errc::shape,
            "saliency maps are on different grids");
    for (std::size_t v = 0; v < acc.size(); ++v) acc[v] += m.data[v];
  }
  RealVolume out{meta, 1, std::vector<float>(acc.size())};
  for (std::size_t v = 0; v < acc.size(); ++v)
    out.data[v] = static_cast<float>(acc[v] / static_cast<double>(maps.size()));
  return out;
}

}  // namespace connectome
