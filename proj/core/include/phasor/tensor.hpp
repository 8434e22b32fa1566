#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace phasor {

// Split-plane complex tensor: two row-major real planes of identical shape.
// The feature axis always trails; batch/sequence axes lead. All compute on
// the float path is double precision (the packed integer kernels are the
// fast path).
struct ComplexTensor {
  std::vector<std::size_t> shape;
  std::vector<double> re;
  std::vector<double> im;

  ComplexTensor() = default;
  explicit ComplexTensor(std::vector<std::size_t> dims);

  static ComplexTensor zeros(std::vector<std::size_t> dims);

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
  // 2-D accessors; throw on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;
  bool same_shape(const ComplexTensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

// Real row-major matrix (attention scores, logits).
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Y = conj(x)·W for x:[m×k], W:[k×n].
//   Y_re = x_re·W_re + x_im·W_im
//   Y_im = x_re·W_im − x_im·W_re
ComplexTensor hermitian_matmul(const ComplexTensor& x, const ComplexTensor& w);

// Standard complex product per element: (ac−bd) + i(ad+bc).
ComplexTensor complex_elementwise_mul(const ComplexTensor& a, const ComplexTensor& b);

// (max(0,x))² applied independently to each plane.
ComplexTensor relu2(const ComplexTensor& z);

// RMS normalization over the trailing axis, applied to each plane
// independently: x_c / sqrt(mean(x_c²)+eps) · gain_c.
ComplexTensor rmsnorm_componentwise(const ComplexTensor& x, std::span<const double> gain_re,
                                    std::span<const double> gain_im, double eps);

}  // namespace phasor
