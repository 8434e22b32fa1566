#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phasor/quant.hpp"
#include "phasor/tensor.hpp"

namespace phasor {

struct IntPair {
  std::int32_t re = 0;
  std::int32_t im = 0;
  bool operator==(const IntPair&) const = default;
};

// conj(x)·w for a quantized activation pair and a codeword, using only
// negation and component swap:
//   +1 → ( x_re, −x_im)    −1 → (−x_re,  x_im)
//   +i → ( x_im,  x_re)    −i → (−x_im, −x_re)
IntPair multfree_term(std::int8_t x_re, std::int8_t x_im, Codeword code);

// Integer accumulator pair. k ≤ 2^15 guarantees |sum| ≤ k·127 < 2^31.
struct ComplexAccumulator {
  std::vector<std::int32_t> re, im;
  ComplexAccumulator() = default;
  explicit ComplexAccumulator(std::size_t n) : re(n, 0), im(n, 0) {}
  bool operator==(const ComplexAccumulator&) const = default;
};

// Contributions from real codewords (±1) and imaginary codewords (±i)
// are kept in separate accumulator pairs — four integers per output
// element — so the two dequant scales and the two per-token activation
// scales can all be applied after integer accumulation.
struct GemmAccumulators {
  std::size_t m = 0, n = 0;
  ComplexAccumulator real_class;  // from ±1 weights
  ComplexAccumulator imag_class;  // from ±i weights
  bool operator==(const GemmAccumulators&) const = default;
};

constexpr std::size_t kMaxInnerDim = std::size_t{1} << 15;

// 256-entry table of 4-term partial sums: entry[b] is the sum of
// multfree_term(x_k, code at bits 2k..2k+1 of b) over the group's four
// activations.
struct Lut256 {
  std::array<IntPair, 256> entries{};
};

// Built by table doubling (1→4→16→64→256 entries) using only additions.
Lut256 build_lut(const std::int8_t x_re[4], const std::int8_t x_im[4]);

// Class-split variant used by lut_gemm: real_class[b] + imag_class[b]
// equals build_lut(...).entries[b].
struct ClassLuts {
  Lut256 real_class;
  Lut256 imag_class;
};
ClassLuts build_class_luts(const std::int8_t x_re[4], const std::int8_t x_im[4]);

// Integer accumulation stages (exposed so tests can compare the two
// kernels' accumulators bit-exactly).
GemmAccumulators multfree_accumulate(const QuantActivation& a, const PackedQuantTensor& w);
GemmAccumulators lut_accumulate(const QuantActivation& a, const PackedQuantTensor& w);

// Final per-element scaling shared by both kernels:
//   out_re = dq_re·R_re/s_re + dq_im·I_re/s_im
//   out_im = dq_re·R_im/s_im + dq_im·I_im/s_re
ComplexTensor scale_accumulators(const GemmAccumulators& acc, const QuantActivation& a,
                                 const PackedQuantTensor& w);

// out = conj(dequant(a))·dequant(w), computed addition-only in integers
// with one float scaling pass at the end.
ComplexTensor multfree_gemm(const QuantActivation& a, const PackedQuantTensor& w);
ComplexTensor lut_gemm(const QuantActivation& a, const PackedQuantTensor& w);

// Arithmetic-op tally for the audited kernel run. The accumulation loop
// has no multiply call site; inner_mults can only be incremented by one,
// so a zero count certifies the multiplication-free structure of the
// path actually executed.
struct KernelOpCounts {
  std::uint64_t inner_adds = 0;   // additions/subtractions into accumulators
  std::uint64_t inner_swaps = 0;  // component swaps (±i codewords)
  std::uint64_t inner_mults = 0;
  std::uint64_t scale_mults = 0;  // float multiplies in the final scaling
};
ComplexTensor multfree_gemm_audited(const QuantActivation& a, const PackedQuantTensor& w,
                                    KernelOpCounts& counts);

enum class BenchPath { float_ref, multfree, lut };

std::string bench_path_name(BenchPath p);

struct BenchRow {
  std::string path;
  std::size_t m = 0, k = 0, n = 0, reps = 0;
  double ns_per_call = 0.0;
  std::size_t weight_bytes = 0;   // n·ceil(k/4)
  std::uint64_t adds_estimate = 0;  // 2·m·n·k inner additions
};

// Times each requested path on one random m×k × k×n instance.
std::vector<BenchRow> run_bench(std::size_t m, std::size_t k, std::size_t n, std::size_t reps,
                                const std::vector<BenchPath>& paths, std::uint64_t seed = 0);

}  // namespace phasor
