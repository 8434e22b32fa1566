#pragma once

#include <cstdint>
#include <vector>

#include "phasor/tensor.hpp"

namespace phasor {

// 2-bit codeword: value = i^code, i.e. 0→+1, 1→+i, 2→−1, 3→−i.
enum class Codeword : std::uint8_t {
  plus_one = 0,
  plus_i = 1,
  minus_one = 2,
  minus_i = 3,
};

inline bool is_real_codeword(Codeword c) { return (static_cast<std::uint8_t>(c) & 1u) == 0; }

// Phase-based projection onto the fourth roots of unity:
//   code = ⌊2θ/π + 1/2⌋ mod 4,  θ = atan2(w_im, w_re) ∈ (−π, π].
// Arg(0+0i) is defined as 0, so zero weights map to +1.
Codeword phase_project(double w_re, double w_im);

struct Scales {
  double gamma_re = 1.0;
  double gamma_im = 1.0;
};

// γ_re = 1 / mean(|W_re| over entries projected to {±1});
// γ_im = 1 / mean(|W_im| over entries projected to {±i}).
// An empty class, or a class mean below 1e-8, falls back to γ = 1.
Scales compute_scales(const ComplexTensor& w);

// Packed 2-bit weight matrix. Storage is output-major: `rows` output
// features, each holding ceil(cols/4) bytes of codes along the `cols`
// reduction axis. Within a byte, the code for reduction index c sits at
// bits 2·(c mod 4)..2·(c mod 4)+1 (lowest bits first), so a packed byte
// is directly usable as a 256-entry LUT index. Padding codes in a
// trailing partial byte are 0 and ignored on unpack.
struct PackedQuantTensor {
  std::size_t rows = 0;  // output features (n of the k×n weight matrix)
  std::size_t cols = 0;  // reduction axis (k)
  std::vector<std::uint8_t> codes;  // rows · ceil(cols/4)
  float dequant_re = 1.0f;          // = 1/γ_re
  float dequant_im = 1.0f;          // = 1/γ_im

  PackedQuantTensor() = default;
  PackedQuantTensor(std::size_t n_rows, std::size_t n_cols);

  std::size_t row_bytes() const { return (cols + 3) / 4; }
  Codeword code_at(std::size_t r, std::size_t c) const;
  void set_code(std::size_t r, std::size_t c, Codeword cw);
};

// Projects every entry of a k×n weight matrix, computes the two scales,
// and packs the codes (output-major).
PackedQuantTensor quantize_weights(const ComplexTensor& w);

// Expands back to a k×n ComplexTensor with entries in
// {±dequant_re, ±i·dequant_im}. Throws on a corrupt code-array length.
ComplexTensor dequantize_weights(const PackedQuantTensor& p);

// Symmetric per-token INT8 activation quantization. Real and imaginary
// planes are quantized independently with per-token scales
// s_c = 127 / max(max_j |x_c[t,j]|, 1e-5).
struct QuantActivation {
  std::size_t tokens = 0;
  std::size_t features = 0;
  std::vector<std::int8_t> q_re, q_im;     // [tokens×features]
  std::vector<double> scale_re, scale_im;  // per token
};

// x must be 2-D [tokens×features]. Rounding is half away from zero.
QuantActivation quantize_activation(const ComplexTensor& x);

// x̂_c[t,j] = q_c[t,j] / scale_c[t].
ComplexTensor dequantize_activation(const QuantActivation& a);

}  // namespace phasor
