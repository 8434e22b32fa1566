#include "phasor/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phasor/threading.hpp"

namespace phasor {

static std::size_t shape_numel(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> dims)
    : shape(std::move(dims)), re(shape_numel(shape), 0.0), im(shape_numel(shape), 0.0) {}

ComplexTensor ComplexTensor::zeros(std::vector<std::size_t> dims) {
  return ComplexTensor(std::move(dims));
}

std::size_t ComplexTensor::numel() const { return shape_numel(shape); }

std::size_t ComplexTensor::rows() const {
  if (shape.size() != 2) throw std::invalid_argument("ComplexTensor::rows: tensor is not 2-D");
  return shape[0];
}

std::size_t ComplexTensor::cols() const {
  if (shape.size() != 2) throw std::invalid_argument("ComplexTensor::cols: tensor is not 2-D");
  return shape[1];
}

bool ComplexTensor::all_finite() const {
  for (double v : re)
    if (!std::isfinite(v)) return false;
  for (double v : im)
    if (!std::isfinite(v)) return false;
  return true;
}

ComplexTensor hermitian_matmul(const ComplexTensor& x, const ComplexTensor& w) {
  if (x.rank() != 2 || w.rank() != 2) {
    throw std::invalid_argument("hermitian_matmul: operands must be 2-D");
  }
  const std::size_t m = x.shape[0], k = x.shape[1];
  if (w.shape[0] != k) {
    throw std::invalid_argument("hermitian_matmul: inner dimensions disagree (" +
                                std::to_string(k) + " vs " + std::to_string(w.shape[0]) + ")");
  }
  const std::size_t n = w.shape[1];
  ComplexTensor y({m, n});

  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double* __restrict yr = y.re.data() + i * n;
      double* __restrict yi = y.im.data() + i * n;
      for (std::size_t t = 0; t < k; ++t) {
        const double a = x.re[i * k + t];
        const double b = x.im[i * k + t];
        const double* __restrict wr = w.re.data() + t * n;
        const double* __restrict wi = w.im.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) {
          yr[j] += a * wr[j] + b * wi[j];
          yi[j] += a * wi[j] - b * wr[j];
        }
      }
    }
  });
  return y;
}

ComplexTensor complex_elementwise_mul(const ComplexTensor& a, const ComplexTensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("complex_elementwise_mul: shape mismatch");
  ComplexTensor y(a.shape);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) {
    y.re[i] = a.re[i] * b.re[i] - a.im[i] * b.im[i];
    y.im[i] = a.re[i] * b.im[i] + a.im[i] * b.re[i];
  }
  return y;
}

ComplexTensor relu2(const ComplexTensor& z) {
  ComplexTensor y(z.shape);
  const std::size_t n = z.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = z.re[i] > 0.0 ? z.re[i] : 0.0;
    const double m = z.im[i] > 0.0 ? z.im[i] : 0.0;
    y.re[i] = r * r;
    y.im[i] = m * m;
  }
  return y;
}

ComplexTensor rmsnorm_componentwise(const ComplexTensor& x, std::span<const double> gain_re,
                                    std::span<const double> gain_im, double eps) {
  if (x.rank() == 0 || x.shape.back() == 0) {
    throw std::invalid_argument("rmsnorm_componentwise: empty trailing axis");
  }
  const std::size_t d = x.shape.back();
  if (gain_re.size() != d || gain_im.size() != d) {
    throw std::invalid_argument("rmsnorm_componentwise: gain length must equal trailing axis");
  }
  const std::size_t rows = x.numel() / d;
  ComplexTensor y(x.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.re.data() + r * d;
    const double* xi = x.im.data() + r * d;
    double sr = 0.0, si = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      sr += xr[j] * xr[j];
      si += xi[j] * xi[j];
    }
    const double inv_r = 1.0 / std::sqrt(sr / static_cast<double>(d) + eps);
    const double inv_i = 1.0 / std::sqrt(si / static_cast<double>(d) + eps);
    for (std::size_t j = 0; j < d; ++j) {
      y.re[r * d + j] = xr[j] * inv_r * gain_re[j];
      y.im[r * d + j] = xi[j] * inv_i * gain_im[j];
    }
  }
  return y;
}

}  // namespace phasor
