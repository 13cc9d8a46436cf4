#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nexrl/errors.hpp"

namespace nexrl {

/// 2-D real-valued image, double precision. Simulation and metrics run in
/// double; data is narrowed to float only when packed into network tensors.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0)
      : height_(height),
        width_(width),
        v_(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0)
      throw ShapeError("image extents must be non-negative");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return v_.size(); }

  double& at(int i, int j) {
    return v_[static_cast<std::size_t>(i) * width_ + j];
  }
  double at(int i, int j) const {
    return v_[static_cast<std::size_t>(i) * width_ + j];
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }

  std::string shape_str() const {
    return "[" + std::to_string(height_) + "," + std::to_string(width_) + "]";
  }

  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> v_;
};

inline void require_same_shape(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

/// One complex-valued MR slice: real and imaginary planes of equal shape.
struct ComplexImage {
  Image real;
  Image imag;

  ComplexImage() = default;
  ComplexImage(int height, int width)
      : real(height, width), imag(height, width) {}
  ComplexImage(Image re, Image im)
      : real(std::move(re)), imag(std::move(im)) {
    require_same_shape(real, imag, "ComplexImage");
  }

  int height() const { return real.height(); }
  int width() const { return real.width(); }
};

inline void require_same_shape(const ComplexImage& a, const ComplexImage& b,
                               const char* op) {
  require_same_shape(a.real, b.real, op);
}

/// K repeated acquisitions of one slice plus the noise model that made them.
struct NexSet {
  std::vector<ComplexImage> slices;
  double sigma0 = 0.0;
  Image gfactor;
};

inline Image magnitude_image(const ComplexImage& x) {
  Image out(x.height(), x.width());
  for (std::size_t t = 0; t < out.size(); ++t)
    out.data()[t] = std::hypot(x.real.data()[t], x.imag.data()[t]);
  return out;
}

inline ComplexImage complex_add(const ComplexImage& a, const ComplexImage& b) {
  require_same_shape(a, b, "complex_add");
  ComplexImage out(a.height(), a.width());
  for (std::size_t t = 0; t < out.real.size(); ++t) {
    out.real.data()[t] = a.real.data()[t] + b.real.data()[t];
    out.imag.data()[t] = a.imag.data()[t] + b.imag.data()[t];
  }
  return out;
}

inline ComplexImage complex_sub(const ComplexImage& a, const ComplexImage& b) {
  require_same_shape(a, b, "complex_sub");
  ComplexImage out(a.height(), a.width());
  for (std::size_t t = 0; t < out.real.size(); ++t) {
    out.real.data()[t] = a.real.data()[t] - b.real.data()[t];
    out.imag.data()[t] = a.imag.data()[t] - b.imag.data()[t];
  }
  return out;
}

/// Complex mean of slices[first, first+count).
inline ComplexImage complex_average(const std::vector<ComplexImage>& slices,
                                    std::size_t first, std::size_t count) {
  if (count == 0 || first + count > slices.size())
    throw DataError("complex_average: bad slice range");
  ComplexImage out(slices[first].height(), slices[first].width());
  for (std::size_t k = first; k < first + count; ++k) {
    require_same_shape(slices[k], out, "complex_average");
    for (std::size_t t = 0; t < out.real.size(); ++t) {
      out.real.data()[t] += slices[k].real.data()[t];
      out.imag.data()[t] += slices[k].imag.data()[t];
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t t = 0; t < out.real.size(); ++t) {
    out.real.data()[t] *= inv;
    out.imag.data()[t] *= inv;
  }
  return out;
}

}  // namespace nexrl
