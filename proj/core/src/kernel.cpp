#include "phasor/kernel.hpp"

#include <chrono>
#include <random>
#include <stdexcept>

#include "phasor/threading.hpp"

namespace phasor {

IntPair multfree_term(std::int8_t x_re, std::int8_t x_im, Codeword code) {
  const std::int32_t r = x_re, i = x_im;
  switch (code) {
    case Codeword::plus_one: return {r, -i};
    case Codeword::plus_i: return {i, r};
    case Codeword::minus_one: return {-r, i};
    case Codeword::minus_i: return {-i, -r};
  }
  return {};
}

namespace {

struct NoAudit {
  static void add(std::uint64_t) {}
  static void swap(std::uint64_t) {}
};

struct CountingAudit {
  KernelOpCounts* c;
  void add(std::uint64_t n) const { c->inner_adds += n; }
  void swap(std::uint64_t n) const { c->inner_swaps += n; }
};

void check_gemm_dims(const QuantActivation& a, const PackedQuantTensor& w) {
  if (a.features != w.cols) {
    throw std::invalid_argument("quantized gemm: inner dimensions disagree (" +
                                std::to_string(a.features) + " vs " + std::to_string(w.cols) +
                                ")");
  }
  if (w.cols > kMaxInnerDim) {
    throw std::invalid_argument("quantized gemm: inner dimension " + std::to_string(w.cols) +
                                " exceeds the 32-bit accumulator bound " +
                                std::to_string(kMaxInnerDim));
  }
}

// The accumulation loop body shared by the production and audited runs.
// Only additions, subtractions, and component swaps; no multiply call
// site exists between here and the final scaling pass.
template <typename Audit>
GemmAccumulators multfree_accumulate_impl(const QuantActivation& a, const PackedQuantTensor& w,
                                          Audit audit) {
  check_gemm_dims(a, w);
  const std::size_t m = a.tokens, k = a.features, n = w.rows;
  GemmAccumulators acc;
  acc.m = m;
  acc.n = n;
  acc.real_class = ComplexAccumulator(m * n);
  acc.imag_class = ComplexAccumulator(m * n);
  const std::size_t row_bytes = w.row_bytes();

  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const std::int8_t* qr = a.q_re.data() + t * k;
      const std::int8_t* qi = a.q_im.data() + t * k;
      for (std::size_t j = 0; j < n; ++j) {
        const std::uint8_t* row = w.codes.data() + j * row_bytes;
        std::int32_t r_re = 0, r_im = 0, i_re = 0, i_im = 0;
        for (std::size_t c = 0; c < k; ++c) {
          const std::uint8_t code = (row[c / 4] >> (2 * (c % 4))) & 0x3u;
          switch (static_cast<Codeword>(code)) {
            case Codeword::plus_one:
              r_re += qr[c];
              r_im -= qi[c];
              audit.add(2);
              break;
            case Codeword::minus_one:
              r_re -= qr[c];
              r_im += qi[c];
              audit.add(2);
              break;
            case Codeword::plus_i:
              i_re += qi[c];
              i_im += qr[c];
              audit.add(2);
              audit.swap(1);
              break;
            case Codeword::minus_i:
              i_re -= qi[c];
              i_im -= qr[c];
              audit.add(2);
              audit.swap(1);
              break;
          }
        }
        acc.real_class.re[t * n + j] = r_re;
        acc.real_class.im[t * n + j] = r_im;
        acc.imag_class.re[t * n + j] = i_re;
        acc.imag_class.im[t * n + j] = i_im;
      }
    }
  });
  return acc;
}

}  // namespace

GemmAccumulators multfree_accumulate(const QuantActivation& a, const PackedQuantTensor& w) {
  return multfree_accumulate_impl(a, w, NoAudit{});
}

Lut256 build_lut(const std::int8_t x_re[4], const std::int8_t x_im[4]) {
  Lut256 lut;  // entries[0] starts at (0,0)
  std::size_t size = 1;
  for (int pos = 0; pos < 4; ++pos) {
    IntPair terms[4];
    for (int c = 0; c < 4; ++c) {
      terms[c] = multfree_term(x_re[pos], x_im[pos], static_cast<Codeword>(c));
    }
    // Extend in place: higher blocks first so block 0 stays pristine.
    for (int c = 3; c >= 0; --c) {
      for (std::size_t b = 0; b < size; ++b) {
        lut.entries[b + c * size].re = lut.entries[b].re + terms[c].re;
        lut.entries[b + c * size].im = lut.entries[b].im + terms[c].im;
      }
    }
    size *= 4;
  }
  return lut;
}

ClassLuts build_class_luts(const std::int8_t x_re[4], const std::int8_t x_im[4]) {
  ClassLuts luts;
  std::size_t size = 1;
  for (int pos = 0; pos < 4; ++pos) {
    IntPair terms[4];
    for (int c = 0; c < 4; ++c) {
      terms[c] = multfree_term(x_re[pos], x_im[pos], static_cast<Codeword>(c));
    }
    for (int c = 3; c >= 0; --c) {
      const bool real_cw = (c & 1) == 0;
      for (std::size_t b = 0; b < size; ++b) {
        IntPair r = luts.real_class.entries[b];
        IntPair i = luts.imag_class.entries[b];
        if (real_cw) {
          r.re += terms[c].re;
          r.im += terms[c].im;
        } else {
          i.re += terms[c].re;
          i.im += terms[c].im;
        }
        luts.real_class.entries[b + c * size] = r;
        luts.imag_class.entries[b + c * size] = i;
      }
    }
    size *= 4;
  }
  return luts;
}

GemmAccumulators lut_accumulate(const QuantActivation& a, const PackedQuantTensor& w) {
  check_gemm_dims(a, w);
  const std::size_t m = a.tokens, k = a.features, n = w.rows;
  const std::size_t groups = (k + 3) / 4;
  GemmAccumulators acc;
  acc.m = m;
  acc.n = n;
  acc.real_class = ComplexAccumulator(m * n);
  acc.imag_class = ComplexAccumulator(m * n);
  const std::size_t row_bytes = w.row_bytes();

  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      std::int32_t* rr = acc.real_class.re.data() + t * n;
      std::int32_t* ri = acc.real_class.im.data() + t * n;
      std::int32_t* ir = acc.imag_class.re.data() + t * n;
      std::int32_t* ii = acc.imag_class.im.data() + t * n;
      for (std::size_t g = 0; g < groups; ++g) {
        // Short trailing group: pad with zero activations (the padding
        // codes are 0, and a zero activation contributes nothing).
        std::int8_t gr[4] = {0, 0, 0, 0};
        std::int8_t gi[4] = {0, 0, 0, 0};
        const std::size_t lanes = std::min<std::size_t>(4, k - 4 * g);
        for (std::size_t l = 0; l < lanes; ++l) {
          gr[l] = a.q_re[t * k + 4 * g + l];
          gi[l] = a.q_im[t * k + 4 * g + l];
        }
        const ClassLuts luts = build_class_luts(gr, gi);
        for (std::size_t j = 0; j < n; ++j) {
          const std::uint8_t byte = w.codes[j * row_bytes + g];
          rr[j] += luts.real_class.entries[byte].re;
          ri[j] += luts.real_class.entries[byte].im;
          ir[j] += luts.imag_class.entries[byte].re;
          ii[j] += luts.imag_class.entries[byte].im;
        }
      }
    }
  });
  return acc;
}

ComplexTensor scale_accumulators(const GemmAccumulators& acc, const QuantActivation& a,
                                 const PackedQuantTensor& w) {
  const std::size_t m = acc.m, n = acc.n;
  ComplexTensor out({m, n});
  const double dre = w.dequant_re;
  const double dim = w.dequant_im;
  for (std::size_t t = 0; t < m; ++t) {
    const double inv_sre = 1.0 / a.scale_re[t];
    const double inv_sim = 1.0 / a.scale_im[t];
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = t * n + j;
      out.re[idx] = dre * inv_sre * acc.real_class.re[idx] + dim * inv_sim * acc.imag_class.re[idx];
      out.im[idx] = dre * inv_sim * acc.real_class.im[idx] + dim * inv_sre * acc.imag_class.im[idx];
    }
  }
  return out;
}

ComplexTensor multfree_gemm(const QuantActivation& a, const PackedQuantTensor& w) {
  return scale_accumulators(multfree_accumulate(a, w), a, w);
}

ComplexTensor lut_gemm(const QuantActivation& a, const PackedQuantTensor& w) {
  return scale_accumulators(lut_accumulate(a, w), a, w);
}

ComplexTensor multfree_gemm_audited(const QuantActivation& a, const PackedQuantTensor& w,
                                    KernelOpCounts& counts) {
  const GemmAccumulators acc = multfree_accumulate_impl(a, w, CountingAudit{&counts});
  counts.scale_mults += 4 * acc.m * acc.n;
  return scale_accumulators(acc, a, w);
}

std::string bench_path_name(BenchPath p) {
  switch (p) {
    case BenchPath::float_ref: return "float_ref";
    case BenchPath::multfree: return "multfree";
    case BenchPath::lut: return "lut";
  }
  return "?";
}

std::vector<BenchRow> run_bench(std::size_t m, std::size_t k, std::size_t n, std::size_t reps,
                                const std::vector<BenchPath>& paths, std::uint64_t seed) {
  if (m == 0 || k == 0 || n == 0 || reps == 0) {
    throw std::invalid_argument("run_bench: sizes and reps must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  ComplexTensor x({m, k});
  for (auto& v : x.re) v = dist(rng);
  for (auto& v : x.im) v = dist(rng);
  ComplexTensor wfull({k, n});
  for (auto& v : wfull.re) v = dist(rng);
  for (auto& v : wfull.im) v = dist(rng);

  const QuantActivation a = quantize_activation(x);
  const PackedQuantTensor w = quantize_weights(wfull);
  if (w.codes.size() != n * ((k + 3) / 4)) {
    throw std::runtime_error("run_bench: packed weight length does not match n*ceil(k/4)");
  }
  const ComplexTensor xq = dequantize_activation(a);
  const ComplexTensor wq = dequantize_weights(w);

  std::vector<BenchRow> rows;
  volatile double sink = 0.0;
  for (BenchPath p : paths) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t r = 0; r < reps; ++r) {
      ComplexTensor out;
      switch (p) {
        case BenchPath::float_ref: out = hermitian_matmul(xq, wq); break;
        case BenchPath::multfree: out = multfree_gemm(a, w); break;
        case BenchPath::lut: out = lut_gemm(a, w); break;
      }
      sink = sink + out.re[0];
    }
    const auto stop = std::chrono::steady_clock::now();
    const double total_ns =
        static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
    BenchRow row;
    row.path = bench_path_name(p);
    row.m = m;
    row.k = k;
    row.n = n;
    row.reps = reps;
    row.ns_per_call = total_ns / static_cast<double>(reps);
    row.weight_bytes = w.codes.size();
    row.adds_estimate = static_cast<std::uint64_t>(2) * m * n * k;
    rows.push_back(std::move(row));
  }
  (void)sink;
  return rows;
}

}  // namespace phasor
