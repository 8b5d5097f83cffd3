#include "ste/model/tensors.hpp"

namespace ste::model {

template <class Real>
nn::Tensor<Real> images_to_tensor(const std::vector<const RasterImage*>& imgs) {
  if (imgs.empty()) throw InvalidArgument("images_to_tensor: empty batch");
  const RasterImage& f = *imgs[0];
  const int C = f.channels(), H = f.height(), W = f.width();
  nn::Tensor<Real> t({static_cast<int>(imgs.size()), C, H, W});
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    if (!imgs[n]->same_shape(f)) throw InvalidArgument("images_to_tensor: mixed shapes in batch");
    Real* dst = t.data.data() + n * C * H * W;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < C; ++c) dst[(c * H + y) * W + x] = imgs[n]->at(y, x, c);
  }
  return t;
}

template <class Real>
nn::Tensor<Real> masks_to_tensor(const std::vector<const BinaryMask*>& masks, int channels) {
  if (masks.empty()) throw InvalidArgument("masks_to_tensor: empty batch");
  const int H = masks[0]->height(), W = masks[0]->width();
  nn::Tensor<Real> t({static_cast<int>(masks.size()), channels, H, W});
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (!masks[n]->same_shape(*masks[0])) throw InvalidArgument("masks_to_tensor: mixed shapes in batch");
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          t.data[((n * channels + c) * H + y) * W + x] = masks[n]->at(y, x) ? Real(1) : Real(0);
  }
  return t;
}

template <class Real>
RasterImage tensor_to_image(const nn::Tensor<Real>& t, int n) {
  if (t.rank() != 4 || n < 0 || n >= t.dim(0)) throw InvalidArgument("tensor_to_image: bad index or rank");
  const int C = t.dim(1), H = t.dim(2), W = t.dim(3);
  RasterImage img(H, W, C);
  const Real* src = t.data.data() + static_cast<std::size_t>(n) * C * H * W;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) img.at(y, x, c) = static_cast<float>(src[(c * H + y) * W + x]);
  return img;
}

template nn::Tensor<float> images_to_tensor<float>(const std::vector<const RasterImage*>&);
template nn::Tensor<double> images_to_tensor<double>(const std::vector<const RasterImage*>&);
template nn::Tensor<float> masks_to_tensor<float>(const std::vector<const BinaryMask*>&, int);
template nn::Tensor<double> masks_to_tensor<double>(const std::vector<const BinaryMask*>&, int);
template RasterImage tensor_to_image<float>(const nn::Tensor<float>&, int);
template RasterImage tensor_to_image<double>(const nn::Tensor<double>&, int);

}  // namespace ste::model
