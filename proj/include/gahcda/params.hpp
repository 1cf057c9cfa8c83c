#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gahcda/nn/tensor.hpp"

namespace gahcda {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  std::size_t numel() const noexcept { return values.size(); }
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in = 1;
  bool is_bias = false;
};

/// Ordered collection of named float tensors.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<NamedTensor> tensors) : tensors_(std::move(tensors)) {}

  std::size_t size() const noexcept { return tensors_.size(); }
  bool empty() const noexcept { return tensors_.empty(); }
  const NamedTensor& operator[](std::size_t i) const { return tensors_.at(i); }
  NamedTensor& operator[](std::size_t i) { return tensors_.at(i); }
  const NamedTensor* find(const std::string& name) const;
  std::size_t parameter_count() const noexcept;

  auto begin() const noexcept { return tensors_.begin(); }
  auto end() const noexcept { return tensors_.end(); }
  auto begin() noexcept { return tensors_.begin(); }
  auto end() noexcept { return tensors_.end(); }

  bool all_finite() const noexcept;

  nn::ParamView<float> view() const;
  /// Widened copy for double-precision evaluation (gradient checks).
  std::vector<std::vector<double>> as_double() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<NamedTensor> tensors_;
};

template <class T>
nn::ParamView<T> view_of(const std::vector<std::vector<T>>& storage) {
  nn::ParamView<T> v;
  v.reserve(storage.size());
  for (const auto& t : storage) v.emplace_back(t);
  return v;
}

/// Seeded fan-in-scaled normal initialisation (He for weights, zero biases).
ParamSet init_from_specs(const std::vector<TensorSpec>& specs, unsigned long long seed);

}  // namespace gahcda
