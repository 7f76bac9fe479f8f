#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

namespace pkgm {

// Gradient rows keyed by table row. Rows are stored in first-touch order;
// sorted_slots() gives a fixed application order.
class SparseGrad {
 public:
  explicit SparseGrad(std::size_t row_size) : row_size_(row_size) {}

  std::span<float> row_for(std::uint32_t row) {
    auto [it, inserted] = slots_.try_emplace(row, rows_.size());
    if (inserted) {
      rows_.push_back(row);
      data_.resize(data_.size() + row_size_, 0.0f);
    }
    return std::span<float>(data_).subspan(it->second * row_size_, row_size_);
  }

  void add(std::uint32_t row, std::span<const float> grad, float scale) {
    auto dst = row_for(row);
    for (std::size_t i = 0; i < row_size_; ++i) dst[i] += scale * grad[i];
  }

  void merge(const SparseGrad& other) {
    for (std::size_t k = 0; k < other.rows_.size(); ++k) add(other.rows_[k], other.row(k), 1.0f);
  }

  void clear() {
    slots_.clear();
    rows_.clear();
    data_.clear();
  }

  std::size_t size() const { return rows_.size(); }
  std::uint32_t row_id(std::size_t k) const { return rows_[k]; }
  std::span<const float> row(std::size_t k) const {
    return std::span<const float>(data_).subspan(k * row_size_, row_size_);
  }
  std::span<float> row(std::size_t k) { return std::span<float>(data_).subspan(k * row_size_, row_size_); }

  std::vector<std::size_t> sorted_slots() const {
    std::vector<std::size_t> order(rows_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) { return rows_[a] < rows_[b]; });
    return order;
  }

 private:
  std::size_t row_size_;
  std::unordered_map<std::uint32_t, std::size_t> slots_;
  std::vector<std::uint32_t> rows_;
  std::vector<float> data_;
};

}  // namespace pkgm
