#pragma once

#include <array>
#include <cstdint>
#include <ostream>

#include "phasor/quant.hpp"

namespace phasor {

// Codeword usage over the logical entries of a packed matrix (padding
// codes excluded). Index order follows the codeword values: +1, +i, −1, −i.
struct CodebookHistogram {
  std::array<std::uint64_t, 4> counts{};
  std::array<double, 4> freqs{};
  std::uint64_t total = 0;
};

CodebookHistogram codebook_histogram(const PackedQuantTensor& p);

// ℓ2 norm of the dequantized matrix:
// sqrt(n_real·dequant_re² + n_imag·dequant_im²).
double dequantized_l2_norm(const PackedQuantTensor& p);

// Token embeddings mean-centered per dimension, one CSV row per
// (token, dim) point: token_id, dim, re, im.
void export_embeddings_csv(const ComplexTensor& embed, std::ostream& out);

}  // namespace phasor
