#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gahcda/core.hpp"
#include "gahcda/nn/tensor.hpp"
#include "gahcda/params.hpp"

namespace gahcda {

/// Lower clamp for probabilities; upper clamp is 1 - kProbEpsilon.
inline constexpr double kProbEpsilon = 1e-7;

/// U-Net shape: `depth` pooling levels, encoder level i has base * 2^i
/// channels and the bottleneck keeps the deepest encoder width.
struct UNetArch {
  int depth = 4;
  int base_channels = 16;
  int in_channels = 1;

  std::vector<int> level_widths() const;
  int bottleneck_channels() const { return base_channels << (depth - 1); }
  int stride() const { return 1 << depth; }

  friend bool operator==(const UNetArch&, const UNetArch&) = default;
};

/// Validates `depth >= 2` and `base_channels >= 4`.
void validate(const UNetArch& arch);

std::vector<TensorSpec> unet_param_specs(const UNetArch& arch);

struct ModelParams {
  UNetArch arch;
  std::uint64_t seed = 0;
  int epoch = 0;
  ParamSet weights;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// C x h x w activations.
using FeatureMap = nn::Tensor3<float>;

/// Sigmoid outputs clamped to [eps, 1 - eps].
class Prediction : public Grid<double> {
 public:
  Prediction() = default;
  Prediction(int height, int width, std::vector<double> probs);

  SegMask threshold(double cut) const;
};

struct ForwardResult {
  Prediction prediction;
  FeatureMap bottleneck;
  FeatureMap decoder;
};

ModelParams init_params(int depth, int base_channels, std::uint64_t seed);

ForwardResult forward(const ModelParams& params, const Image& image);

/// Deep copy. Kept as a named operation so the teacher/student hand-off reads
/// explicitly at call sites.
ModelParams clone_for_student(const ModelParams& teacher);

namespace nn {

/// Training-time U-Net over any scalar type. Parameter order follows
/// unet_param_specs.
template <class T>
class UNet {
 public:
  struct Cache;
  struct Output {
    Tensor3<T> logits;
    Tensor3<T> bottleneck;
    Tensor3<T> decoder;
  };

  explicit UNet(UNetArch arch);
  ~UNet();

  const UNetArch& arch() const noexcept { return arch_; }

  /// When `cache` is non-null it is filled for backward().
  Output forward(const ParamView<T>& params, const Tensor3<T>& input, Cache* cache) const;

  /// Accumulates into `grads`. `d_bottleneck` may be null.
  void backward(const ParamView<T>& params, const Cache& cache, const Tensor3<T>& d_logits,
                const Tensor3<T>* d_bottleneck, GradSet<T>& grads) const;

 private:
  UNetArch arch_;
};

template <class T>
struct UNet<T>::Cache {
  struct ConvRecord {
    Tensor3<T> input;  // shape only, except for pointwise convs
    std::vector<T> col;
    Tensor3<T> output;  // post-activation where applicable
  };
  struct PoolRecord {
    std::vector<std::int32_t> argmax;
    int in_height = 0;
    int in_width = 0;
  };
  std::vector<ConvRecord> convs;  // in execution order
  std::vector<PoolRecord> pools;
  std::vector<Tensor3<T>> up_inputs;
};

extern template class UNet<float>;
extern template class UNet<double>;

/// Sigmoid of each logit, clamped to [kProbEpsilon, 1 - kProbEpsilon].
template <class T>
void probs_from_logits(const Tensor3<T>& logits, std::vector<double>& probs);

/// Chain rule through the sigmoid, ignoring the clamp so saturated pixels
/// still receive a (tiny) gradient.
template <class T>
Tensor3<T> logit_grad_from_prob_grad(const Tensor3<T>& logits, std::span<const double> d_probs);

}  // namespace nn

nn::Tensor3<float> image_tensor(const Image& image);

}  // namespace gahcda
