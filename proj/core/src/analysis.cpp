#include "phasor/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <vector>

namespace phasor {

CodebookHistogram codebook_histogram(const PackedQuantTensor& p) {
  CodebookHistogram h;
  for (std::size_t r = 0; r < p.rows; ++r) {
    for (std::size_t c = 0; c < p.cols; ++c) {
      ++h.counts[static_cast<std::size_t>(p.code_at(r, c))];
    }
  }
  h.total = p.rows * p.cols;
  if (h.total == 0) throw std::invalid_argument("codebook_histogram: empty matrix");
  for (std::size_t i = 0; i < 4; ++i) {
    h.freqs[i] = static_cast<double>(h.counts[i]) / static_cast<double>(h.total);
  }
  return h;
}

double dequantized_l2_norm(const PackedQuantTensor& p) {
  const CodebookHistogram h = codebook_histogram(p);
  const double n_real = static_cast<double>(h.counts[0] + h.counts[2]);
  const double n_imag = static_cast<double>(h.counts[1] + h.counts[3]);
  const double dre = p.dequant_re;
  const double dim = p.dequant_im;
  return std::sqrt(n_real * dre * dre + n_imag * dim * dim);
}

void export_embeddings_csv(const ComplexTensor& embed, std::ostream& out) {
  if (embed.rank() != 2) throw std::invalid_argument("export_embeddings_csv: expected 2-D table");
  const std::size_t vocab = embed.shape[0], d = embed.shape[1];
  std::vector<double> mean_re(d, 0.0), mean_im(d, 0.0);
  for (std::size_t v = 0; v < vocab; ++v) {
    for (std::size_t j = 0; j < d; ++j) {
      mean_re[j] += embed.re[v * d + j];
      mean_im[j] += embed.im[v * d + j];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    mean_re[j] /= static_cast<double>(vocab);
    mean_im[j] /= static_cast<double>(vocab);
  }
  out << "token_id,dim,re,im\n";
  out << std::setprecision(17);
  for (std::size_t v = 0; v < vocab; ++v) {
    for (std::size_t j = 0; j < d; ++j) {
      out << v << ',' << j << ',' << embed.re[v * d + j] - mean_re[j] << ','
          << embed.im[v * d + j] - mean_im[j] << '\n';
    }
  }
}

}  // namespace phasor
