#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nexrl/errors.hpp"

namespace nexrl {

/// Dense 4-D array [batch, channel, height, width], row-major, the carrier of
/// all image and feature data. Template parameter selects storage precision:
/// float for training, double for the gradient-check instantiation.
template <typename T>
class TensorT {
 public:
  TensorT() : dims_{0, 0, 0, 0} {}

  TensorT(int n, int c, int h, int w, T fill = T(0))
      : dims_{n, c, h, w},
        data_(static_cast<std::size_t>(n) * c * h * w, fill) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw ShapeError("tensor extents must be non-negative");
  }

  static TensorT zeros_like(const TensorT& other) {
    return TensorT(other.batch(), other.channels(), other.height(),
                   other.width());
  }

  int batch() const { return dims_[0]; }
  int channels() const { return dims_[1]; }
  int height() const { return dims_[2]; }
  int width() const { return dims_[3]; }
  const std::array<int, 4>& dims() const { return dims_; }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  /// Pointer to the [h, w] plane of sample n, channel c.
  T* plane(int n, int c) {
    return data_.data() +
           (static_cast<std::size_t>(n) * dims_[1] + c) * plane_size();
  }
  const T* plane(int n, int c) const {
    return data_.data() +
           (static_cast<std::size_t>(n) * dims_[1] + c) * plane_size();
  }

  std::size_t plane_size() const {
    return static_cast<std::size_t>(dims_[2]) * dims_[3];
  }

  T& at(int n, int c, int i, int j) {
    return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + i) *
                     dims_[3] +
                 j];
  }
  const T& at(int n, int c, int i, int j) const {
    return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + i) *
                     dims_[3] +
                 j];
  }

  bool same_shape(const TensorT& other) const { return dims_ == other.dims_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    return "[" + std::to_string(dims_[0]) + "," + std::to_string(dims_[1]) +
           "," + std::to_string(dims_[2]) + "," + std::to_string(dims_[3]) +
           "]";
  }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  std::array<int, 4> dims_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b,
                        const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

}  // namespace nexrl
