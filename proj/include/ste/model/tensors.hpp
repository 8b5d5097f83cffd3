#pragma once

#include <vector>

#include "ste/image.hpp"
#include "ste/nn/tensor.hpp"

namespace ste::model {

// RasterImage (HWC) <-> NCHW batches. All images in a batch share a shape.
template <class Real>
nn::Tensor<Real> images_to_tensor(const std::vector<const RasterImage*>& imgs);
template <class Real>
nn::Tensor<Real> masks_to_tensor(const std::vector<const BinaryMask*>& masks, int channels = 1);
template <class Real>
RasterImage tensor_to_image(const nn::Tensor<Real>& t, int n);

}  // namespace ste::model
