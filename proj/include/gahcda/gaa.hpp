#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gahcda/backbone.hpp"
#include "gahcda/gaze.hpp"
#include "gahcda/nn/tensor.hpp"
#include "gahcda/params.hpp"

namespace gahcda {

/// Row-major sequence of `count` tokens, each `dim` wide.
template <class T>
struct Tokens {
  int count = 0;
  int dim = 0;
  std::vector<T> values;

  Tokens() = default;
  Tokens(int n, int d, T fill = T{}) : count(n), dim(d), values(static_cast<std::size_t>(n) * d, fill) {}

  T& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * dim + j]; }
  const T& operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * dim + j]; }

  template <class U>
  Tokens<U> cast() const {
    Tokens<U> out(count, dim);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
    return out;
  }
};

/// Spatial position r*w+c becomes token index; channels become token dims.
template <class T>
Tokens<T> tokens_from_map(const nn::Tensor3<T>& map);
template <class T>
nn::Tensor3<T> map_from_tokens(const Tokens<T>& tokens, int height, int width);

/// Gaze features f_G: one token per bottleneck cell.
using GazeFeature = Tokens<double>;

/// f_GA plus the attention matrix that produced it.
struct FusedFeature {
  Tokens<double> tokens;     ///< n x 2d; first d dims are f_T
  Tokens<double> attention;  ///< n x n, row-stochastic
};

/// Extractor: strided 3x3 conv stages (ReLU on all but the last), then a
/// 2d -> d affine projection applied to fused tokens before the MSE.
struct GaaArch {
  std::vector<int> extractor_widths;

  int depth() const noexcept { return static_cast<int>(extractor_widths.size()); }
  int token_dim() const noexcept { return extractor_widths.empty() ? 0 : extractor_widths.back(); }

  friend bool operator==(const GaaArch&, const GaaArch&) = default;
};

/// Extractor widths mirroring the encoder so tokens line up with the bottleneck.
GaaArch gaa_arch_for(const UNetArch& backbone);

struct GaaParams {
  GaaArch arch;
  ParamSet weights;  ///< extractor stages, then projection.weight (d x 2d), projection.bias

  friend bool operator==(const GaaParams&, const GaaParams&) = default;
};

std::vector<TensorSpec> gaa_param_specs(const GaaArch& arch);

/// Extractor gets He init. The projection starts as [I | N(0, 0.01^2)] with zero
/// bias, so a freshly cloned student starts close to aligned with the teacher.
GaaParams init_gaa_params(const GaaArch& arch, std::uint64_t seed);

GazeFeature extract_gaze_features(const GazeHeatmap& heatmap, const GaaParams& params);

/// f_GA = Concat(f_T, Softmax(f_G f_T^T / sqrt(d)) f_T).
FusedFeature cross_attention_fuse(const Tokens<double>& gaze, const Tokens<double>& teacher);

/// Mean squared error between projection(f_GA) and the student tokens.
double gaa_alignment_loss(const FusedFeature& fused, const Tokens<double>& student, const GaaParams& params);

namespace nn {

template <class T>
class GazeExtractor {
 public:
  struct Cache {
    std::vector<Tensor3<T>> inputs;
    std::vector<std::vector<T>> cols;
    std::vector<Tensor3<T>> outputs;
  };

  explicit GazeExtractor(GaaArch arch) : arch_(std::move(arch)) {}

  /// `params` holds only the extractor tensors (2 per stage).
  Tensor3<T> forward(const ParamView<T>& params, const Tensor3<T>& heatmap, Cache* cache) const;
  void backward(const ParamView<T>& params, const Cache& cache, Tensor3<T> d_out, GradSet<T>& grads) const;

 private:
  GaaArch arch_;
};

template <class T>
struct Attention {
  Tokens<T> fused;      ///< n x 2d
  Tokens<T> weights;    ///< n x n
};

template <class T>
Attention<T> attention_fuse(const Tokens<T>& gaze, const Tokens<T>& teacher);

template <class T>
struct AlignmentGrads {
  Tokens<T> d_student;
  Tokens<T> d_gaze;
  std::vector<T> d_proj_weight;
  std::vector<T> d_proj_bias;
};

/// Returns `scale * sum((P f_GA + b - f_S)^2)`; with `grads` non-null, adds the
/// matching gradients (teacher tokens receive none).
template <class T>
double alignment_loss(const Attention<T>& att, const Tokens<T>& gaze, const Tokens<T>& teacher,
                      const Tokens<T>& student, std::span<const T> proj_weight, std::span<const T> proj_bias,
                      double scale, AlignmentGrads<T>* grads);

}  // namespace nn
}  // namespace gahcda
