#include "gahcda/gaa.hpp"

#include <cmath>
#include <random>

#include "gahcda/nn/layers.hpp"

namespace gahcda {

template <class T>
Tokens<T> tokens_from_map(const nn::Tensor3<T>& map) {
  const int n = map.height * map.width;
  Tokens<T> t(n, map.channels);
  for (int c = 0; c < map.channels; ++c) {
    const T* plane = map.plane(c);
    for (int i = 0; i < n; ++i) t(i, c) = plane[i];
  }
  return t;
}

template <class T>
nn::Tensor3<T> map_from_tokens(const Tokens<T>& tokens, int height, int width) {
  if (tokens.count != height * width) throw ValidationError("token count mismatch");
  nn::Tensor3<T> map(tokens.dim, height, width);
  for (int c = 0; c < tokens.dim; ++c) {
    T* plane = map.plane(c);
    for (int i = 0; i < tokens.count; ++i) plane[i] = tokens(i, c);
  }
  return map;
}

template Tokens<float> tokens_from_map(const nn::Tensor3<float>&);
template Tokens<double> tokens_from_map(const nn::Tensor3<double>&);
template nn::Tensor3<float> map_from_tokens(const Tokens<float>&, int, int);
template nn::Tensor3<double> map_from_tokens(const Tokens<double>&, int, int);

GaaArch gaa_arch_for(const UNetArch& backbone) {
  validate(backbone);
  GaaArch arch;
  arch.extractor_widths = backbone.level_widths();
  arch.extractor_widths.back() = backbone.bottleneck_channels();
  return arch;
}

std::vector<TensorSpec> gaa_param_specs(const GaaArch& arch) {
  if (arch.extractor_widths.empty()) throw ValidationError("extractor needs at least one stage");
  std::vector<TensorSpec> specs;
  int in = 1;
  for (int i = 0; i < arch.depth(); ++i) {
    const int out = arch.extractor_widths[i];
    if (out < 1) throw ValidationError("extractor widths must be positive");
    const std::string p = "gaa.extractor.stage" + std::to_string(i);
    specs.push_back({p + ".weight", {out, in, 3, 3}, in * 9, false});
    specs.push_back({p + ".bias", {out}, in * 9, true});
    in = out;
  }
  const int d = arch.token_dim();
  specs.push_back({"gaa.projection.weight", {d, 2 * d}, 2 * d, false});
  specs.push_back({"gaa.projection.bias", {d}, 2 * d, true});
  return specs;
}

GaaParams init_gaa_params(const GaaArch& arch, std::uint64_t seed) {
  GaaParams params{arch, init_from_specs(gaa_param_specs(arch), seed)};
  const int d = arch.token_dim();
  NamedTensor& proj = params.weights[params.weights.size() - 2];
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> small(0.0, 0.01);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < 2 * d; ++c) {
      proj.values[static_cast<std::size_t>(r) * 2 * d + c] =
          c < d ? (r == c ? 1.0f : 0.0f) : static_cast<float>(small(rng));
    }
  }
  return params;
}

namespace {

nn::ParamView<double> extractor_view(const std::vector<std::vector<double>>& storage, int stages) {
  nn::ParamView<double> v;
  for (int i = 0; i < 2 * stages; ++i) v.emplace_back(storage[i]);
  return v;
}

void check_heatmap_divisible(int height, int width, int stages) {
  const int stride = 1 << stages;
  if (height % stride != 0 || width % stride != 0) throw ValidationError("shape not divisible by stride");
}

}  // namespace

GazeFeature extract_gaze_features(const GazeHeatmap& heatmap, const GaaParams& params) {
  check_heatmap_divisible(heatmap.height(), heatmap.width(), params.arch.depth());
  nn::Tensor3<double> input(1, heatmap.height(), heatmap.width());
  std::copy(heatmap.values().begin(), heatmap.values().end(), input.data.begin());
  const auto storage = params.weights.as_double();
  nn::GazeExtractor<double> extractor(params.arch);
  return tokens_from_map(extractor.forward(extractor_view(storage, params.arch.depth()), input, nullptr));
}

FusedFeature cross_attention_fuse(const Tokens<double>& gaze, const Tokens<double>& teacher) {
  auto att = nn::attention_fuse(gaze, teacher);
  return FusedFeature{std::move(att.fused), std::move(att.weights)};
}

double gaa_alignment_loss(const FusedFeature& fused, const Tokens<double>& student, const GaaParams& params) {
  const int d = params.arch.token_dim();
  if (fused.tokens.count != student.count) throw ValidationError("token count mismatch");
  if (fused.tokens.dim != 2 * d || student.dim != d) throw ValidationError("token dim mismatch");
  const auto& w = params.weights[params.weights.size() - 2].values;
  const auto& b = params.weights[params.weights.size() - 1].values;
  const std::vector<double> wd(w.begin(), w.end());
  const std::vector<double> bd(b.begin(), b.end());
  nn::Attention<double> att{fused.tokens, fused.attention};
  const Tokens<double> unused;
  return nn::alignment_loss<double>(att, unused, unused, student, wd, bd,
                                    1.0 / (static_cast<double>(student.count) * d), nullptr);
}

namespace nn {

template <class T>
Tensor3<T> GazeExtractor<T>::forward(const ParamView<T>& params, const Tensor3<T>& heatmap, Cache* cache) const {
  check_heatmap_divisible(heatmap.height, heatmap.width, arch_.depth());
  if (params.size() < static_cast<std::size_t>(2 * arch_.depth())) {
    throw ValidationError("extractor parameter count mismatch");
  }
  if (cache) *cache = Cache{};
  Tensor3<T> x = heatmap;
  for (int i = 0; i < arch_.depth(); ++i) {
    ConvShape s{x.channels, arch_.extractor_widths[i], 3, 2, 1};
    std::vector<T> col;
    Tensor3<T> y = conv_forward<T>(x, params[2 * i], params[2 * i + 1], s, col);
    if (i + 1 < arch_.depth()) relu_inplace(y);
    if (cache) {
      cache->inputs.push_back(x);
      cache->cols.push_back(std::move(col));
      cache->outputs.push_back(y);
    }
    x = std::move(y);
  }
  return x;
}

template <class T>
void GazeExtractor<T>::backward(const ParamView<T>& params, const Cache& cache, Tensor3<T> d,
                                GradSet<T>& grads) const {
  for (int i = arch_.depth() - 1; i >= 0; --i) {
    if (i + 1 < arch_.depth()) relu_backward_inplace(cache.outputs[i], d);
    const Tensor3<T>& in = cache.inputs[i];
    ConvShape s{in.channels, arch_.extractor_widths[i], 3, 2, 1};
    d = conv_backward<T>(in, cache.cols[i], d, params[2 * i], s, grads[2 * i], grads[2 * i + 1], i > 0);
  }
}

namespace {

// Token matrices are tiny (bottleneck h*w rows), so plain loops with a fixed
// summation order replace Eigen here: its small-product kernels peel by
// buffer alignment and the rounding would vary between runs.

/// c (m x n) = a (m x k) * b^T, b stored n x k.
template <class T>
void mul_abt(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc{};
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

/// c (m x n) = a (m x k) * b (k x n).
template <class T>
void mul_ab(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc{};
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

/// c (m x n) = a^T * b, a stored k x m, b stored k x n.
template <class T>
void mul_atb(const T* a, const T* b, T* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc{};
      for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

}  // namespace

template <class T>
Attention<T> attention_fuse(const Tokens<T>& gaze, const Tokens<T>& teacher) {
  if (gaze.count != teacher.count) throw ValidationError("token count mismatch");
  if (gaze.dim != teacher.dim) throw ValidationError("token dim mismatch");
  const int n = teacher.count;
  const int d = teacher.dim;

  Attention<T> out;
  out.weights = Tokens<T>(n, n);
  T* a = out.weights.values.data();
  mul_abt(gaze.values.data(), teacher.values.data(), a, n, n, d);
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
  for (int i = 0; i < n; ++i) {
    T* row = a + static_cast<std::size_t>(i) * n;
    T peak = row[0] * inv_sqrt_d;
    for (int j = 0; j < n; ++j) {
      row[j] *= inv_sqrt_d;
      peak = std::max(peak, row[j]);
    }
    T total{};
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= total;
  }
  std::vector<T> attended(static_cast<std::size_t>(n) * d);
  mul_ab(a, teacher.values.data(), attended.data(), n, d, n);
  out.fused = Tokens<T>(n, 2 * d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      out.fused(i, j) = teacher(i, j);
      out.fused(i, d + j) = attended[static_cast<std::size_t>(i) * d + j];
    }
  }
  return out;
}

template <class T>
double alignment_loss(const Attention<T>& att, const Tokens<T>& gaze, const Tokens<T>& teacher,
                      const Tokens<T>& student, std::span<const T> proj_weight, std::span<const T> proj_bias,
                      double scale, AlignmentGrads<T>* grads) {
  const int n = att.fused.count;
  const int d = student.dim;
  if (student.count != n) throw ValidationError("token count mismatch");
  if (att.fused.dim != 2 * d) throw ValidationError("token dim mismatch");
  const T* fused = att.fused.values.data();
  const std::size_t nd = static_cast<std::size_t>(n) * d;
  std::vector<T> diff(nd);
  mul_abt(fused, proj_weight.data(), diff.data(), n, d, 2 * d);
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      T& v = diff[static_cast<std::size_t>(i) * d + j];
      v += proj_bias[j] - student(i, j);
      sum_sq += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  if (!grads) return scale * sum_sq;

  std::vector<T> d_proj(nd);
  for (std::size_t k = 0; k < nd; ++k) d_proj[k] = diff[k] * static_cast<T>(2.0 * scale);
  grads->d_student = Tokens<T>(n, d);
  for (std::size_t k = 0; k < nd; ++k) grads->d_student.values[k] = -d_proj[k];
  grads->d_proj_weight.assign(static_cast<std::size_t>(d) * 2 * d, T{});
  grads->d_proj_bias.assign(d, T{});
  mul_atb(d_proj.data(), fused, grads->d_proj_weight.data(), d, 2 * d, n);
  for (int j = 0; j < d; ++j) {
    T acc{};
    for (int i = 0; i < n; ++i) acc += d_proj[static_cast<std::size_t>(i) * d + j];
    grads->d_proj_bias[j] = acc;
  }

  // Only the attended half depends on trainable inputs (f_G); f_T is frozen.
  std::vector<T> d_fused(static_cast<std::size_t>(n) * 2 * d);
  mul_ab(d_proj.data(), proj_weight.data(), d_fused.data(), n, 2 * d, d);
  std::vector<T> d_attended(nd);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      d_attended[static_cast<std::size_t>(i) * d + j] = d_fused[static_cast<std::size_t>(i) * 2 * d + d + j];
    }
  }
  const T* a = att.weights.values.data();
  std::vector<T> d_scores(static_cast<std::size_t>(n) * n);
  mul_abt(d_attended.data(), teacher.values.data(), d_scores.data(), n, n, d);
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
  for (int i = 0; i < n; ++i) {
    T* row = d_scores.data() + static_cast<std::size_t>(i) * n;
    const T* arow = a + static_cast<std::size_t>(i) * n;
    T dot{};
    for (int j = 0; j < n; ++j) dot += row[j] * arow[j];
    for (int j = 0; j < n; ++j) row[j] = arow[j] * (row[j] - dot) * inv_sqrt_d;
  }
  grads->d_gaze = Tokens<T>(gaze.count, gaze.dim);
  mul_ab(d_scores.data(), teacher.values.data(), grads->d_gaze.values.data(), n, d, n);
  return scale * sum_sq;
}

template class GazeExtractor<float>;
template class GazeExtractor<double>;
template Attention<float> attention_fuse(const Tokens<float>&, const Tokens<float>&);
template Attention<double> attention_fuse(const Tokens<double>&, const Tokens<double>&);
template double alignment_loss(const Attention<float>&, const Tokens<float>&, const Tokens<float>&,
                               const Tokens<float>&, std::span<const float>, std::span<const float>, double,
                               AlignmentGrads<float>*);
template double alignment_loss(const Attention<double>&, const Tokens<double>&, const Tokens<double>&,
                               const Tokens<double>&, std::span<const double>, std::span<const double>, double,
                               AlignmentGrads<double>*);

}  // namespace nn
}  // namespace gahcda
