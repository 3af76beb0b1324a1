#pragma once

#include <vector>

#include "connectome/models.hpp"
#include "connectome/volume.hpp"

namespace connectome {

/// |dO/dI| for one sample (no batch axis) in eval mode. O is the pre-sigmoid
/// logit for classification and the network output otherwise.
template <typename T>
nn::Tensor<T> input_gradient(nn::Network<T>& net, const nn::Tensor<T>& sample);

/// cnn3d only. Regression gradients are reported in target units. The result
/// has the fingerprint's channel-major layout (R, nz, ny, nx).
nn::Tensor<float> input_gradient(NetModel& model, const FingerprintVolume& input);

/// S(v) = max over channels of w(c, v), zero outside `mask` when given.
/// `w` is channel-major (R, nz, ny, nx) on `meta`'s grid.
RealVolume reduce_saliency(const nn::Tensor<float>& w, const GridMeta& meta, const MaskVolume* mask = nullptr);

/// Voxelwise mean of single-channel maps on one grid.
RealVolume ensemble_saliency(const std::vector<RealVolume>& maps);

}  // namespace connectome
