#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pkgm/common.hpp"

namespace pkgm {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Adam over a table split into fixed-size rows. Moments and step counts are kept
// per row and only rows that receive a gradient move, so sparse embedding
// updates cost O(touched rows). A dense parameter block is a table with one row.
class RowAdam {
 public:
  RowAdam() = default;
  RowAdam(std::size_t rows, std::size_t row_size, AdamConfig config)
      : config_(config),
        row_size_(row_size),
        m_(rows * row_size, 0.0f),
        v_(rows * row_size, 0.0f),
        steps_(rows, 0) {}

  void update(std::size_t row, std::span<float> param, std::span<const float> grad) {
    if (row >= steps_.size() || param.size() != row_size_ || grad.size() != row_size_) {
      throw IndexError("adam update shape mismatch");
    }
    const std::uint32_t t = ++steps_[row];
    const double c1 = 1.0 - std::pow(static_cast<double>(config_.beta1), t);
    const double c2 = 1.0 - std::pow(static_cast<double>(config_.beta2), t);
    const float step = static_cast<float>(config_.learning_rate * std::sqrt(c2) / c1);
    // Epsilon in the corrected form: lr·m̂/(√v̂ + ε) = step·m/(√v + ε·√c2).
    const float eps = static_cast<float>(config_.epsilon * std::sqrt(c2));
    float* m = m_.data() + row * row_size_;
    float* v = v_.data() + row * row_size_;
    for (std::size_t i = 0; i < row_size_; ++i) {
      const float g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * g * g;
      param[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
    }
  }

  std::uint32_t steps(std::size_t row) const { return steps_.at(row); }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t row_size_ = 0;
  std::vector<float> m_;
  std::vector<float> v_;
  std::vector<std::uint32_t> steps_;
};

}  // namespace pkgm
