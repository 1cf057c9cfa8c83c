#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gahcda::nn {

/// Channel-major C x H x W activation tensor.
template <class T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, T fill = T{})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height) * width; }
  T* plane(int c) noexcept { return data.data() + c * plane_size(); }
  const T* plane(int c) const noexcept { return data.data() + c * plane_size(); }
  bool same_shape(const Tensor3& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }

  template <class U>
  Tensor3<U> cast() const {
    Tensor3<U> out(channels, height, width);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

/// One span per parameter tensor, in architecture order.
template <class T>
using ParamView = std::vector<std::span<const T>>;

/// Gradient buffers matching a ParamView.
template <class T>
using GradSet = std::vector<std::vector<T>>;

template <class T>
GradSet<T> zero_grads_like(const ParamView<T>& params) {
  GradSet<T> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) g[i].assign(params[i].size(), T{});
  return g;
}

}  // namespace gahcda::nn
