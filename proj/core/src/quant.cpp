#include "phasor/quant.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace phasor {

Codeword phase_project(double w_re, double w_im) {
  if (w_re == 0.0 && w_im == 0.0) return Codeword::plus_one;
  const double theta = std::atan2(w_im, w_re);
  const auto e = static_cast<long long>(std::floor(2.0 * theta / std::numbers::pi + 0.5));
  return static_cast<Codeword>(((e % 4) + 4) % 4);
}

Scales compute_scales(const ComplexTensor& w) {
  if (w.numel() == 0) throw std::invalid_argument("compute_scales: empty tensor");
  double sum_re = 0.0, sum_im = 0.0;
  std::size_t n_re = 0, n_im = 0;
  const std::size_t n = w.numel();
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Codeword c = phase_project(w.re[idx], w.im[idx]);
    if (is_real_codeword(c)) {
      sum_re += std::fabs(w.re[idx]);
      ++n_re;
    } else {
      sum_im += std::fabs(w.im[idx]);
      ++n_im;
    }
  }
  constexpr double kMinClassMean = 1e-8;
  Scales s;
  if (n_re > 0) {
    const double mean = sum_re / static_cast<double>(n_re);
    if (mean >= kMinClassMean) s.gamma_re = 1.0 / mean;
  }
  if (n_im > 0) {
    const double mean = sum_im / static_cast<double>(n_im);
    if (mean >= kMinClassMean) s.gamma_im = 1.0 / mean;
  }
  return s;
}

PackedQuantTensor::PackedQuantTensor(std::size_t n_rows, std::size_t n_cols)
    : rows(n_rows), cols(n_cols), codes(n_rows * ((n_cols + 3) / 4), 0) {}

Codeword PackedQuantTensor::code_at(std::size_t r, std::size_t c) const {
  const std::uint8_t byte = codes[r * row_bytes() + c / 4];
  return static_cast<Codeword>((byte >> (2 * (c % 4))) & 0x3u);
}

void PackedQuantTensor::set_code(std::size_t r, std::size_t c, Codeword cw) {
  std::uint8_t& byte = codes[r * row_bytes() + c / 4];
  const unsigned shift = 2 * (c % 4);
  byte = static_cast<std::uint8_t>((byte & ~(0x3u << shift)) |
                                   (static_cast<unsigned>(cw) << shift));
}

PackedQuantTensor quantize_weights(const ComplexTensor& w) {
  if (w.rank() != 2) throw std::invalid_argument("quantize_weights: weight must be 2-D");
  const std::size_t k = w.shape[0], n = w.shape[1];
  PackedQuantTensor p(n, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p.set_code(j, i, phase_project(w.re[i * n + j], w.im[i * n + j]));
    }
  }
  const Scales s = compute_scales(w);
  p.dequant_re = static_cast<float>(1.0 / s.gamma_re);
  p.dequant_im = static_cast<float>(1.0 / s.gamma_im);
  return p;
}

ComplexTensor dequantize_weights(const PackedQuantTensor& p) {
  if (p.codes.size() != p.rows * p.row_bytes()) {
    throw std::runtime_error("dequantize_weights: code array has " +
                             std::to_string(p.codes.size()) + " bytes, expected " +
                             std::to_string(p.rows * p.row_bytes()));
  }
  if (!(p.dequant_re > 0.0f) || !(p.dequant_im > 0.0f)) {
    throw std::runtime_error("dequantize_weights: dequant scales must be positive");
  }
  const std::size_t k = p.cols, n = p.rows;
  ComplexTensor w({k, n});
  const double dre = p.dequant_re;
  const double dim = p.dequant_im;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      switch (p.code_at(j, i)) {
        case Codeword::plus_one: w.re[i * n + j] = dre; break;
        case Codeword::plus_i: w.im[i * n + j] = dim; break;
        case Codeword::minus_one: w.re[i * n + j] = -dre; break;
        case Codeword::minus_i: w.im[i * n + j] = -dim; break;
      }
    }
  }
  return w;
}

static std::int8_t quantize_component(double x, double scale) {
  double v = scale * x;
  if (v > 127.0) v = 127.0;
  if (v < -128.0) v = -128.0;
  return static_cast<std::int8_t>(std::round(v));  // half away from zero
}

QuantActivation quantize_activation(const ComplexTensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("quantize_activation: input must be 2-D");
  const std::size_t tokens = x.shape[0], d = x.shape[1];
  QuantActivation a;
  a.tokens = tokens;
  a.features = d;
  a.q_re.resize(tokens * d);
  a.q_im.resize(tokens * d);
  a.scale_re.resize(tokens);
  a.scale_im.resize(tokens);
  constexpr double kMinAbsMax = 1e-5;
  for (std::size_t t = 0; t < tokens; ++t) {
    double max_re = 0.0, max_im = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      max_re = std::max(max_re, std::fabs(x.re[t * d + j]));
      max_im = std::max(max_im, std::fabs(x.im[t * d + j]));
    }
    const double s_re = 127.0 / std::max(max_re, kMinAbsMax);
    const double s_im = 127.0 / std::max(max_im, kMinAbsMax);
    a.scale_re[t] = s_re;
    a.scale_im[t] = s_im;
    for (std::size_t j = 0; j < d; ++j) {
      a.q_re[t * d + j] = quantize_component(x.re[t * d + j], s_re);
      a.q_im[t * d + j] = quantize_component(x.im[t * d + j], s_im);
    }
  }
  return a;
}

ComplexTensor dequantize_activation(const QuantActivation& a) {
  ComplexTensor x({a.tokens, a.features});
  for (std::size_t t = 0; t < a.tokens; ++t) {
    const double inv_re = 1.0 / a.scale_re[t];
    const double inv_im = 1.0 / a.scale_im[t];
    for (std::size_t j = 0; j < a.features; ++j) {
      x.re[t * a.features + j] = a.q_re[t * a.features + j] * inv_re;
      x.im[t * a.features + j] = a.q_im[t * a.features + j] * inv_im;
    }
  }
  return x;
}

}  // namespace phasor
