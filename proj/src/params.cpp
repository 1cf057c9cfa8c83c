#include "gahcda/params.hpp"

#include <cmath>
#include <random>

namespace gahcda {

const NamedTensor* ParamSet::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::size_t ParamSet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

bool ParamSet::all_finite() const noexcept {
  for (const auto& t : tensors_) {
    for (float v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

nn::ParamView<float> ParamSet::view() const {
  nn::ParamView<float> v;
  v.reserve(tensors_.size());
  for (const auto& t : tensors_) v.emplace_back(t.values);
  return v;
}

std::vector<std::vector<double>> ParamSet::as_double() const {
  std::vector<std::vector<double>> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.emplace_back(t.values.begin(), t.values.end());
  return out;
}

ParamSet init_from_specs(const std::vector<TensorSpec>& specs, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::vector<NamedTensor> tensors;
  tensors.reserve(specs.size());
  for (const auto& spec : specs) {
    NamedTensor t;
    t.name = spec.name;
    t.shape = spec.shape;
    std::size_t n = 1;
    for (int d : spec.shape) n *= static_cast<std::size_t>(d);
    t.values.assign(n, 0.0f);
    if (!spec.is_bias) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / spec.fan_in));
      for (auto& v : t.values) v = static_cast<float>(normal(rng));
    }
    tensors.push_back(std::move(t));
  }
  return ParamSet(std::move(tensors));
}

}  // namespace gahcda
