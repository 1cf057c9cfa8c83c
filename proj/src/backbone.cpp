#include "gahcda/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "gahcda/nn/layers.hpp"

namespace gahcda {

std::vector<int> UNetArch::level_widths() const {
  std::vector<int> widths(depth);
  for (int i = 0; i < depth; ++i) widths[i] = base_channels << i;
  return widths;
}

void validate(const UNetArch& arch) {
  if (arch.depth < 2) throw ValidationError("depth too small");
  if (arch.depth > 8) throw ValidationError("depth too large");
  if (arch.base_channels < 4) throw ValidationError("base_channels too small");
  if (arch.in_channels < 1) throw ValidationError("in_channels must be positive");
}

namespace {

void add_conv(std::vector<TensorSpec>& specs, const std::string& prefix, int in, int out, int k) {
  specs.push_back({prefix + ".weight", {out, in, k, k}, in * k * k, false});
  specs.push_back({prefix + ".bias", {out}, in * k * k, true});
}

/// Tensor indices for each layer, in unet_param_specs order.
struct Layout {
  struct Level {
    int conv1 = 0;
    int conv2 = 0;
    int up = -1;
  };
  std::vector<Level> enc;
  Level bottleneck;
  std::vector<Level> dec;  // indexed by level, not execution order
  int head = 0;

  explicit Layout(int depth) : enc(depth), dec(depth) {
    int idx = 0;
    for (int i = 0; i < depth; ++i) {
      enc[i].conv1 = idx;
      enc[i].conv2 = idx + 2;
      idx += 4;
    }
    bottleneck.conv1 = idx;
    bottleneck.conv2 = idx + 2;
    idx += 4;
    for (int i = depth - 1; i >= 0; --i) {
      dec[i].up = idx;
      dec[i].conv1 = idx + 2;
      dec[i].conv2 = idx + 4;
      idx += 6;
    }
    head = idx;
  }
};

}  // namespace

std::vector<TensorSpec> unet_param_specs(const UNetArch& arch) {
  validate(arch);
  const auto widths = arch.level_widths();
  std::vector<TensorSpec> specs;
  int in = arch.in_channels;
  for (int i = 0; i < arch.depth; ++i) {
    const std::string p = "enc" + std::to_string(i);
    add_conv(specs, p + ".conv1", in, widths[i], 3);
    add_conv(specs, p + ".conv2", widths[i], widths[i], 3);
    in = widths[i];
  }
  add_conv(specs, "bottleneck.conv1", in, arch.bottleneck_channels(), 3);
  add_conv(specs, "bottleneck.conv2", arch.bottleneck_channels(), arch.bottleneck_channels(), 3);
  in = arch.bottleneck_channels();
  for (int i = arch.depth - 1; i >= 0; --i) {
    const std::string p = "dec" + std::to_string(i);
    specs.push_back({p + ".up.weight", {in, widths[i], 2, 2}, in, false});
    specs.push_back({p + ".up.bias", {widths[i]}, in, true});
    add_conv(specs, p + ".conv1", 2 * widths[i], widths[i], 3);
    add_conv(specs, p + ".conv2", widths[i], widths[i], 3);
    in = widths[i];
  }
  add_conv(specs, "head", in, 1, 1);
  return specs;
}

Prediction::Prediction(int height, int width, std::vector<double> probs)
    : Grid<double>(height, width, std::move(probs)) {
  for (double p : values_) {
    if (!(p >= kProbEpsilon && p <= 1.0 - kProbEpsilon)) {
      throw ValidationError("prediction outside [eps, 1-eps]");
    }
  }
}

SegMask Prediction::threshold(double cut) const {
  std::vector<std::uint8_t> px(values_.size());
  std::transform(values_.begin(), values_.end(), px.begin(),
                 [cut](double p) { return static_cast<std::uint8_t>(p >= cut); });
  return SegMask(height_, width_, std::move(px));
}

ModelParams init_params(int depth, int base_channels, std::uint64_t seed) {
  ModelParams p;
  p.arch = UNetArch{depth, base_channels, 1};
  p.seed = seed;
  p.epoch = 0;
  p.weights = init_from_specs(unet_param_specs(p.arch), seed);
  return p;
}

ModelParams clone_for_student(const ModelParams& teacher) {
  ModelParams student = teacher;
  return student;
}

nn::Tensor3<float> image_tensor(const Image& image) {
  nn::Tensor3<float> t(1, image.height(), image.width());
  std::copy(image.values().begin(), image.values().end(), t.data.begin());
  return t;
}

ForwardResult forward(const ModelParams& params, const Image& image) {
  nn::UNet<float> net(params.arch);
  auto out = net.forward(params.weights.view(), image_tensor(image), nullptr);
  std::vector<double> probs;
  nn::probs_from_logits(out.logits, probs);
  return ForwardResult{Prediction(image.height(), image.width(), std::move(probs)), std::move(out.bottleneck),
                       std::move(out.decoder)};
}

namespace nn {

template <class T>
UNet<T>::UNet(UNetArch arch) : arch_(arch) {
  validate(arch_);
}

template <class T>
UNet<T>::~UNet() = default;

namespace {

template <class T>
Tensor3<T> shape_of(const Tensor3<T>& t) {
  Tensor3<T> s;
  s.channels = t.channels;
  s.height = t.height;
  s.width = t.width;
  return s;
}

template <class T>
Tensor3<T> run_conv(const ParamView<T>& p, int idx, const Tensor3<T>& x, int out_channels, int kernel,
                    bool relu, typename UNet<T>::Cache* cache) {
  ConvShape s{x.channels, out_channels, kernel, 1, kernel / 2};
  std::vector<T> col;
  Tensor3<T> y = conv_forward<T>(x, p[idx], p[idx + 1], s, col);
  if (relu) relu_inplace(y);
  if (cache) {
    typename UNet<T>::Cache::ConvRecord rec;
    rec.input = kernel == 1 ? x : shape_of(x);
    rec.col = std::move(col);
    rec.output = y;
    cache->convs.push_back(std::move(rec));
  }
  return y;
}

template <class T>
Tensor3<T> back_conv(const ParamView<T>& p, int idx, const typename UNet<T>::Cache::ConvRecord& rec,
                     Tensor3<T> d_out, int kernel, bool relu, GradSet<T>& g, bool want_input) {
  if (relu) relu_backward_inplace(rec.output, d_out);
  ConvShape s{rec.input.channels, d_out.channels, kernel, 1, kernel / 2};
  return conv_backward<T>(rec.input, rec.col, d_out, p[idx], s, g[idx], g[idx + 1], want_input);
}

}  // namespace

template <class T>
typename UNet<T>::Output UNet<T>::forward(const ParamView<T>& p, const Tensor3<T>& input, Cache* cache) const {
  const int stride = arch_.stride();
  if (input.height % stride != 0 || input.width % stride != 0) {
    throw ValidationError("shape not divisible by stride");
  }
  if (input.channels != arch_.in_channels) throw ValidationError("input channel mismatch");
  if (p.size() != static_cast<std::size_t>(10 * arch_.depth + 6)) throw ValidationError("parameter count mismatch");
  if (cache) *cache = Cache{};

  const Layout layout(arch_.depth);
  const auto widths = arch_.level_widths();
  std::vector<Tensor3<T>> skips(arch_.depth);
  Tensor3<T> x = input;
  for (int i = 0; i < arch_.depth; ++i) {
    x = run_conv(p, layout.enc[i].conv1, x, widths[i], 3, true, cache);
    x = run_conv(p, layout.enc[i].conv2, x, widths[i], 3, true, cache);
    skips[i] = x;
    typename Cache::PoolRecord pool;
    pool.in_height = x.height;
    pool.in_width = x.width;
    x = maxpool2_forward(x, pool.argmax);
    if (cache) cache->pools.push_back(std::move(pool));
  }
  x = run_conv(p, layout.bottleneck.conv1, x, arch_.bottleneck_channels(), 3, true, cache);
  x = run_conv(p, layout.bottleneck.conv2, x, arch_.bottleneck_channels(), 3, true, cache);
  Output out;
  out.bottleneck = x;
  for (int i = arch_.depth - 1; i >= 0; --i) {
    const int up = layout.dec[i].up;
    if (cache) cache->up_inputs.push_back(x);
    Tensor3<T> u = upconv2_forward<T>(x, p[up], p[up + 1], widths[i]);
    x = concat_channels(skips[i], u);
    x = run_conv(p, layout.dec[i].conv1, x, widths[i], 3, true, cache);
    x = run_conv(p, layout.dec[i].conv2, x, widths[i], 3, true, cache);
  }
  out.decoder = x;
  out.logits = run_conv(p, layout.head, x, 1, 1, false, cache);
  return out;
}

template <class T>
void UNet<T>::backward(const ParamView<T>& p, const Cache& cache, const Tensor3<T>& d_logits,
                       const Tensor3<T>* d_bottleneck, GradSet<T>& g) const {
  const Layout layout(arch_.depth);
  const auto widths = arch_.level_widths();
  const int depth = arch_.depth;
  // conv records: enc (2 per level), bottleneck (2), dec (2 per level), head.
  std::size_t rec = cache.convs.size() - 1;
  Tensor3<T> d = back_conv(p, layout.head, cache.convs[rec--], d_logits, 1, false, g, true);

  std::vector<Tensor3<T>> d_skips(depth);
  for (int i = 0; i < depth; ++i) {
    d = back_conv(p, layout.dec[i].conv2, cache.convs[rec--], std::move(d), 3, true, g, true);
    d = back_conv(p, layout.dec[i].conv1, cache.convs[rec--], std::move(d), 3, true, g, true);
    auto [d_skip, d_up] = split_channels(d, widths[i]);
    d_skips[i] = std::move(d_skip);
    const int up = layout.dec[i].up;
    const Tensor3<T>& up_in = cache.up_inputs[depth - 1 - i];
    d = upconv2_backward<T>(up_in, d_up, p[up], g[up], g[up + 1]);
  }
  if (d_bottleneck) {
    for (std::size_t k = 0; k < d.data.size(); ++k) d.data[k] += d_bottleneck->data[k];
  }
  d = back_conv(p, layout.bottleneck.conv2, cache.convs[rec--], std::move(d), 3, true, g, true);
  d = back_conv(p, layout.bottleneck.conv1, cache.convs[rec--], std::move(d), 3, true, g, true);
  for (int i = depth - 1; i >= 0; --i) {
    const auto& pool = cache.pools[i];
    d = maxpool2_backward(d, pool.argmax, pool.in_height, pool.in_width);
    for (std::size_t k = 0; k < d.data.size(); ++k) d.data[k] += d_skips[i].data[k];
    d = back_conv(p, layout.enc[i].conv2, cache.convs[rec--], std::move(d), 3, true, g, true);
    d = back_conv(p, layout.enc[i].conv1, cache.convs[rec], std::move(d), 3, true, g, i > 0);
    if (i > 0) --rec;
  }
}

template class UNet<float>;
template class UNet<double>;

template <class T>
void probs_from_logits(const Tensor3<T>& logits, std::vector<double>& probs) {
  probs.resize(logits.data.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double z = static_cast<double>(logits.data[i]);
    const double s = 1.0 / (1.0 + std::exp(-z));
    probs[i] = std::clamp(s, kProbEpsilon, 1.0 - kProbEpsilon);
  }
}

template <class T>
Tensor3<T> logit_grad_from_prob_grad(const Tensor3<T>& logits, std::span<const double> d_probs) {
  Tensor3<T> d(logits.channels, logits.height, logits.width);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const double z = static_cast<double>(logits.data[i]);
    const double s = 1.0 / (1.0 + std::exp(-z));
    // Straight through the probability clamp: a saturated unit keeps a
    // (tiny) gradient instead of going permanently dead.
    d.data[i] = static_cast<T>(d_probs[i] * s * (1.0 - s));
  }
  return d;
}

template void probs_from_logits<float>(const Tensor3<float>&, std::vector<double>&);
template void probs_from_logits<double>(const Tensor3<double>&, std::vector<double>&);
template Tensor3<float> logit_grad_from_prob_grad<float>(const Tensor3<float>&, std::span<const double>);
template Tensor3<double> logit_grad_from_prob_grad<double>(const Tensor3<double>&, std::span<const double>);

}  // namespace nn
}  // namespace gahcda
