#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gahcda/nn/tensor.hpp"

namespace gahcda::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_extent(int in) const noexcept { return (in + 2 * pad - kernel) / stride + 1; }
  int weight_count() const noexcept { return out_channels * in_channels * kernel * kernel; }
};

/// Rows are (channel, ky, kx); columns are output pixels.
template <class T>
void im2col(const Tensor3<T>& in, const ConvShape& s, int out_h, int out_w, std::vector<T>& col) {
  const int k = s.kernel;
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  col.assign(static_cast<std::size_t>(in.channels) * k * k * cols, T{});
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.plane(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= in.height) continue;
          const T* src_row = src + static_cast<std::size_t>(iy) * in.width;
          T* dst_row = dst + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix >= 0 && ix < in.width) dst_row[ox] = src_row[ix];
          }
        }
      }
    }
  }
}

/// Scatter-add of im2col rows back onto an input-shaped tensor.
template <class T>
void col2im(std::span<const T> col, const ConvShape& s, int out_h, int out_w, Tensor3<T>& d_in) {
  const int k = s.kernel;
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < d_in.channels; ++c) {
    T* dst = d_in.plane(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= d_in.height) continue;
          T* dst_row = dst + static_cast<std::size_t>(iy) * d_in.width;
          const T* src_row = src + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix >= 0 && ix < d_in.width) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

/// Convolution via im2col + GEMM. The unfolded input is left in `col` for the
/// backward pass (pointwise convolutions skip the unfold and leave it empty).
template <class T>
Tensor3<T> conv_forward(const Tensor3<T>& in, std::span<const T> weight, std::span<const T> bias,
                        const ConvShape& s, std::vector<T>& col) {
  const int oh = s.out_extent(in.height);
  const int ow = s.out_extent(in.width);
  const int kdim = s.in_channels * s.kernel * s.kernel;
  Tensor3<T> out(s.out_channels, oh, ow);
  const Eigen::Index cols = static_cast<Eigen::Index>(oh) * ow;
  ConstMatrixMap<T> w(weight.data(), s.out_channels, kdim);
  MatrixMap<T> o(out.data.data(), s.out_channels, cols);
  if (s.kernel == 1 && s.stride == 1 && s.pad == 0) {
    col.clear();
    o.noalias() = w * ConstMatrixMap<T>(in.data.data(), kdim, cols);
  } else {
    im2col(in, s, oh, ow, col);
    o.noalias() = w * ConstMatrixMap<T>(col.data(), kdim, cols);
  }
  for (int c = 0; c < s.out_channels; ++c) o.row(c).array() += bias[c];
  return out;
}

/// Accumulates weight/bias gradients; returns the input gradient when
/// `want_input_grad` is set (empty tensor otherwise).
template <class T>
Tensor3<T> conv_backward(const Tensor3<T>& in, const std::vector<T>& col, const Tensor3<T>& d_out,
                         std::span<const T> weight, const ConvShape& s, std::span<T> d_weight,
                         std::span<T> d_bias, bool want_input_grad) {
  const int kdim = s.in_channels * s.kernel * s.kernel;
  const Eigen::Index cols = static_cast<Eigen::Index>(d_out.height) * d_out.width;
  const bool pointwise = s.kernel == 1 && s.stride == 1 && s.pad == 0;
  ConstMatrixMap<T> dout(d_out.data.data(), s.out_channels, cols);
  ConstMatrixMap<T> unfolded(pointwise ? in.data.data() : col.data(), kdim, cols);
  MatrixMap<T> dw(d_weight.data(), s.out_channels, kdim);
  dw.noalias() += dout * unfolded.transpose();
  // Plain loop: Eigen's vectorised sum() peels by address alignment, which
  // would make the rounding depend on where the buffer was allocated.
  for (int c = 0; c < s.out_channels; ++c) {
    T acc{};
    for (Eigen::Index j = 0; j < cols; ++j) acc += dout(c, j);
    d_bias[c] += acc;
  }
  if (!want_input_grad) return {};

  ConstMatrixMap<T> w(weight.data(), s.out_channels, kdim);
  Tensor3<T> d_in(s.in_channels, in.height, in.width);
  if (pointwise) {
    MatrixMap<T>(d_in.data.data(), kdim, cols).noalias() = w.transpose() * dout;
  } else {
    std::vector<T> dcol(static_cast<std::size_t>(kdim) * cols);
    MatrixMap<T>(dcol.data(), kdim, cols).noalias() = w.transpose() * dout;
    col2im<T>(dcol, s, d_out.height, d_out.width, d_in);
  }
  return d_in;
}

template <class T>
void relu_inplace(Tensor3<T>& t) {
  for (auto& v : t.data) v = v > T{} ? v : T{};
}

/// Masks `grad` where the post-activation output is zero.
template <class T>
void relu_backward_inplace(const Tensor3<T>& activated, Tensor3<T>& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(activated.data[i] > T{})) grad.data[i] = T{};
  }
}

/// 2x2 max pooling; `argmax` receives the flat input offset for each output.
template <class T>
Tensor3<T> maxpool2_forward(const Tensor3<T>& in, std::vector<std::int32_t>& argmax) {
  Tensor3<T> out(in.channels, in.height / 2, in.width / 2);
  argmax.resize(out.size());
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c) {
    const std::size_t base = c * in.plane_size();
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * in.width + 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * y + dy) * in.width + 2 * x + dx;
            if (in.data[idx] > in.data[best]) best = idx;
          }
        }
        out.data[o] = in.data[best];
        argmax[o] = static_cast<std::int32_t>(best);
      }
    }
  }
  return out;
}

template <class T>
Tensor3<T> maxpool2_backward(const Tensor3<T>& d_out, const std::vector<std::int32_t>& argmax, int in_h,
                             int in_w) {
  Tensor3<T> d_in(d_out.channels, in_h, in_w);
  for (std::size_t o = 0; o < d_out.data.size(); ++o) d_in.data[argmax[o]] += d_out.data[o];
  return d_in;
}

/// 2x2 stride-2 transposed convolution. Weight layout (in, out, 2, 2).
template <class T>
Tensor3<T> upconv2_forward(const Tensor3<T>& in, std::span<const T> weight, std::span<const T> bias,
                           int out_channels) {
  const Eigen::Index hw = static_cast<Eigen::Index>(in.height) * in.width;
  ConstMatrixMap<T> w(weight.data(), in.channels, out_channels * 4);
  ConstMatrixMap<T> x(in.data.data(), in.channels, hw);
  RowMatrix<T> g = w.transpose() * x;  // (out*4) x hw
  Tensor3<T> out(out_channels, in.height * 2, in.width * 2);
  for (int co = 0; co < out_channels; ++co) {
    T* dst = out.plane(co);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const auto row = g.row(co * 4 + a * 2 + b);
        for (int i = 0; i < in.height; ++i) {
          for (int j = 0; j < in.width; ++j) {
            dst[static_cast<std::size_t>(2 * i + a) * out.width + 2 * j + b] = row(i * in.width + j) + bias[co];
          }
        }
      }
    }
  }
  return out;
}

template <class T>
Tensor3<T> upconv2_backward(const Tensor3<T>& in, const Tensor3<T>& d_out, std::span<const T> weight,
                            std::span<T> d_weight, std::span<T> d_bias) {
  const int out_channels = d_out.channels;
  const Eigen::Index hw = static_cast<Eigen::Index>(in.height) * in.width;
  RowMatrix<T> dg(out_channels * 4, hw);
  for (int co = 0; co < out_channels; ++co) {
    const T* src = d_out.plane(co);
    T bsum{};
    for (std::size_t i = 0; i < d_out.plane_size(); ++i) bsum += src[i];
    d_bias[co] += bsum;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        auto row = dg.row(co * 4 + a * 2 + b);
        for (int i = 0; i < in.height; ++i) {
          for (int j = 0; j < in.width; ++j) {
            row(i * in.width + j) = src[static_cast<std::size_t>(2 * i + a) * d_out.width + 2 * j + b];
          }
        }
      }
    }
  }
  ConstMatrixMap<T> x(in.data.data(), in.channels, hw);
  ConstMatrixMap<T> w(weight.data(), in.channels, out_channels * 4);
  MatrixMap<T>(d_weight.data(), in.channels, out_channels * 4).noalias() += x * dg.transpose();
  Tensor3<T> d_in(in.channels, in.height, in.width);
  MatrixMap<T>(d_in.data.data(), in.channels, hw).noalias() = w * dg;
  return d_in;
}

template <class T>
Tensor3<T> concat_channels(const Tensor3<T>& a, const Tensor3<T>& b) {
  Tensor3<T> out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

/// Splits a gradient of concat_channels(a, b) back into its two parts.
template <class T>
std::pair<Tensor3<T>, Tensor3<T>> split_channels(const Tensor3<T>& d, int first_channels) {
  Tensor3<T> a(first_channels, d.height, d.width);
  Tensor3<T> b(d.channels - first_channels, d.height, d.width);
  std::copy(d.data.begin(), d.data.begin() + static_cast<std::ptrdiff_t>(a.size()), a.data.begin());
  std::copy(d.data.begin() + static_cast<std::ptrdiff_t>(a.size()), d.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

}  // namespace gahcda::nn
