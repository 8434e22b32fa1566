#include "phasor/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace phasor {

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_heads == 0 || d_head == 0 || d_ffn == 0 ||
      n_layers == 0 || max_seq == 0) {
    throw std::invalid_argument("ModelConfig: all counts must be positive");
  }
  if (d_model != n_heads * d_head) {
    throw std::invalid_argument("ModelConfig: d_model (" + std::to_string(d_model) +
                                ") must equal n_heads*d_head (" +
                                std::to_string(n_heads * d_head) + ")");
  }
  if (rope_base <= 0.0) throw std::invalid_argument("ModelConfig: rope_base must be positive");
  if (norm_eps < 0.0) throw std::invalid_argument("ModelConfig: norm_eps must be nonnegative");
}

namespace {

ComplexTensor normal_init(std::vector<std::size_t> dims, std::size_t fan_in,
                          std::mt19937_64& rng) {
  ComplexTensor t(std::move(dims));
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(2.0 * static_cast<double>(fan_in)));
  for (auto& v : t.re) v = dist(rng);
  for (auto& v : t.im) v = dist(rng);
  return t;
}

ComplexTensor ones_gain(std::size_t d) {
  ComplexTensor g({d});
  std::fill(g.re.begin(), g.re.end(), 1.0);
  std::fill(g.im.begin(), g.im.end(), 1.0);
  return g;
}

}  // namespace

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.config = config;
  const std::size_t d = config.d_model, f = config.d_ffn;
  m.embed = normal_init({config.vocab_size, d}, d, rng);
  m.layers.resize(config.n_layers);
  for (auto& lw : m.layers) {
    lw.attn_norm_gain = ones_gain(d);
    lw.wq = normal_init({d, d}, d, rng);
    lw.wk = normal_init({d, d}, d, rng);
    lw.wv = normal_init({d, d}, d, rng);
    lw.wo = normal_init({d, d}, d, rng);
    lw.ffn_norm_gain = ones_gain(d);
    lw.w_up = normal_init({d, f}, d, rng);
    lw.w_gate = normal_init({d, f}, d, rng);
    lw.w_down = normal_init({f, d}, f, rng);
  }
  m.final_norm_gain = ones_gain(d);
  m.lm_head = normal_init({config.vocab_size, d}, d, rng);
  return m;
}

ComplexTensor embed_tokens(const std::vector<int>& ids, const Model& m) {
  const std::size_t d = m.config.d_model;
  ComplexTensor out({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= m.config.vocab_size) {
      throw std::out_of_range("embed_tokens: token id " + std::to_string(id) +
                              " outside vocab of " + std::to_string(m.config.vocab_size));
    }
    for (std::size_t j = 0; j < d; ++j) {
      out.re[t * d + j] = m.embed.re[static_cast<std::size_t>(id) * d + j];
      out.im[t * d + j] = m.embed.im[static_cast<std::size_t>(id) * d + j];
    }
  }
  return out;
}

ComplexTensor apply_rope(const ComplexTensor& qk, const std::vector<std::size_t>& positions,
                         double base) {
  if (qk.rank() != 3) throw std::invalid_argument("apply_rope: expected [seq×heads×d_head]");
  const std::size_t seq = qk.shape[0], heads = qk.shape[1], dh = qk.shape[2];
  if (positions.size() != seq) {
    throw std::invalid_argument("apply_rope: positions length must equal the sequence length");
  }
  ComplexTensor out(qk.shape);
  for (std::size_t s = 0; s < seq; ++s) {
    const double pos = static_cast<double>(positions[s]);
    for (std::size_t j = 0; j < dh; ++j) {
      const double theta = std::pow(base, -static_cast<double>(j) / static_cast<double>(dh));
      const double c = std::cos(pos * theta);
      const double si = std::sin(pos * theta);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t idx = (s * heads + h) * dh + j;
        out.re[idx] = qk.re[idx] * c - qk.im[idx] * si;
        out.im[idx] = qk.re[idx] * si + qk.im[idx] * c;
      }
    }
  }
  return out;
}

RealMatrix attention_scores(const ComplexTensor& q, const ComplexTensor& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.shape[1] != k.shape[1]) {
    throw std::invalid_argument("attention_scores: expected 2-D operands with equal feature axis");
  }
  const std::size_t m = q.shape[0], n = k.shape[0], d = q.shape[1];
  RealMatrix s(m, n);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        acc += q.re[a * d + j] * k.re[b * d + j] + q.im[a * d + j] * k.im[b * d + j];
      }
      s.at(a, b) = acc;
    }
  }
  return s;
}

ComplexTensor attention_forward(const ComplexTensor& q, const ComplexTensor& k,
                                const ComplexTensor& v, bool causal, std::size_t scale_dim,
                                std::vector<double>* probs_out) {
  if (q.rank() != 3 || !q.same_shape(k) || !q.same_shape(v)) {
    throw std::invalid_argument("attention_forward: Q, K, V must share a [seq×heads×d_head] shape");
  }
  if (scale_dim == 0) throw std::invalid_argument("attention_forward: scale_dim must be positive");
  const std::size_t seq = q.shape[0], heads = q.shape[1], dh = q.shape[2];
  const std::size_t w = 2 * dh;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(scale_dim));
  ComplexTensor out(q.shape);
  if (probs_out) probs_out->assign(heads * seq * seq, 0.0);

  std::vector<double> qt(seq * w), kt(seq * w), vt(seq * w), ot(seq * w);
  std::vector<double> row(seq);
  for (std::size_t h = 0; h < heads; ++h) {
    // Concatenate re|im along the feature axis for this head.
    for (std::size_t s = 0; s < seq; ++s) {
      for (std::size_t j = 0; j < dh; ++j) {
        const std::size_t idx = (s * heads + h) * dh + j;
        qt[s * w + j] = q.re[idx];
        qt[s * w + dh + j] = q.im[idx];
        kt[s * w + j] = k.re[idx];
        kt[s * w + dh + j] = k.im[idx];
        vt[s * w + j] = v.re[idx];
        vt[s * w + dh + j] = v.im[idx];
      }
    }
    std::fill(ot.begin(), ot.end(), 0.0);
    for (std::size_t a = 0; a < seq; ++a) {
      const std::size_t limit = causal ? a + 1 : seq;
      double maxv = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < limit; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < w; ++j) dot += qt[a * w + j] * kt[b * w + j];
        row[b] = dot * inv_scale;
        maxv = std::max(maxv, row[b]);
      }
      double denom = 0.0;
      for (std::size_t b = 0; b < limit; ++b) {
        row[b] = std::exp(row[b] - maxv);
        denom += row[b];
      }
      for (std::size_t b = 0; b < limit; ++b) {
        const double p = row[b] / denom;
        if (probs_out) (*probs_out)[h * seq * seq + a * seq + b] = p;
        for (std::size_t j = 0; j < w; ++j) ot[a * w + j] += p * vt[b * w + j];
      }
    }
    // Split the first half back into the real plane, the second into the
    // imaginary plane.
    for (std::size_t s = 0; s < seq; ++s) {
      for (std::size_t j = 0; j < dh; ++j) {
        const std::size_t idx = (s * heads + h) * dh + j;
        out.re[idx] = ot[s * w + j];
        out.im[idx] = ot[s * w + dh + j];
      }
    }
  }
  return out;
}

namespace {

ComplexTensor project(const ComplexTensor& x, const ComplexTensor& w, Mode mode) {
  if (mode == Mode::full_precision) return hermitian_matmul(x, w);
  const ComplexTensor xq = dequantize_activation(quantize_activation(x));
  const ComplexTensor wq = dequantize_weights(quantize_weights(w));
  return hermitian_matmul(xq, wq);
}

}  // namespace

ComplexTensor ffn_forward(const ComplexTensor& x, const LayerWeights& lw, Mode mode) {
  const ComplexTensor gate = project(x, lw.w_gate, mode);
  const ComplexTensor up = project(x, lw.w_up, mode);
  const ComplexTensor h = complex_elementwise_mul(relu2(gate), up);
  return project(h, lw.w_down, mode);
}

RealMatrix lm_head_forward(const ComplexTensor& h, const ComplexTensor& lm_head) {
  return attention_scores(h, lm_head);
}

ModelTape build_model_tape(const Model& m, const std::vector<int>& ids, Mode mode,
                           const std::vector<int>* targets) {
  m.config.validate();
  if (ids.empty()) throw std::invalid_argument("build_model_tape: empty sequence");
  if (ids.size() > m.config.max_seq) {
    throw std::invalid_argument("build_model_tape: sequence length " +
                                std::to_string(ids.size()) + " exceeds max_seq " +
                                std::to_string(m.config.max_seq));
  }
  const std::size_t seq = ids.size();
  const std::size_t d = m.config.d_model, heads = m.config.n_heads, dh = m.config.d_head;

  ModelTape tape;
  Graph& g = tape.graph;
  for_each_param(m, [&](const std::string&, const ComplexTensor& p) {
    tape.params.push_back(g.param(&p));
  });
  const auto pid = [&](std::size_t layer, std::size_t slot) {
    return tape.params[1 + layer * 9 + slot];
  };

  std::vector<std::size_t> positions(seq);
  std::iota(positions.begin(), positions.end(), 0);

  Graph::NodeId x = g.embed(tape.params[0], ids);
  for (std::size_t l = 0; l < m.config.n_layers; ++l) {
    Graph::NodeId normed = g.rmsnorm(x, pid(l, 0), m.config.norm_eps);
    Graph::NodeId q = g.reshape(g.linear(normed, pid(l, 1), mode), {seq, heads, dh});
    Graph::NodeId k = g.reshape(g.linear(normed, pid(l, 2), mode), {seq, heads, dh});
    Graph::NodeId v = g.reshape(g.linear(normed, pid(l, 3), mode), {seq, heads, dh});
    q = g.rope(q, positions, m.config.rope_base);
    k = g.rope(k, positions, m.config.rope_base);
    Graph::NodeId att = g.attention(q, k, v, /*causal=*/true, m.config.scale_dim());
    Graph::NodeId o = g.linear(g.reshape(att, {seq, d}), pid(l, 4), mode);
    x = g.add(x, o);

    Graph::NodeId normed2 = g.rmsnorm(x, pid(l, 5), m.config.norm_eps);
    Graph::NodeId up = g.linear(normed2, pid(l, 6), mode);
    Graph::NodeId gate = g.linear(normed2, pid(l, 7), mode);
    Graph::NodeId hidden = g.cmul(g.relu2(gate), up);
    Graph::NodeId down = g.linear(hidden, pid(l, 8), mode);
    x = g.add(x, down);
  }
  x = g.rmsnorm(x, tape.params[1 + m.config.n_layers * 9], m.config.norm_eps);
  tape.logits = g.score(x, tape.params[2 + m.config.n_layers * 9]);
  if (targets) tape.loss = g.cross_entropy(tape.logits, *targets);
  return tape;
}

RealMatrix model_forward(const std::vector<int>& ids, const Model& m, Mode mode) {
  ModelTape tape = build_model_tape(m, ids, mode);
  const ComplexTensor& v = tape.graph.value(tape.logits);
  RealMatrix logits(v.shape[0], v.shape[1]);
  logits.data = v.re;
  return logits;
}

QuantizedModel quantize_model(const Model& m) {
  QuantizedModel q;
  q.config = m.config;
  q.embed = m.embed;
  q.final_norm_gain = m.final_norm_gain;
  q.lm_head = m.lm_head;
  q.layers.reserve(m.layers.size());
  for (const LayerWeights& lw : m.layers) {
    QuantizedLayer ql;
    ql.attn_norm_gain = lw.attn_norm_gain;
    ql.ffn_norm_gain = lw.ffn_norm_gain;
    ql.wq = quantize_weights(lw.wq);
    ql.wk = quantize_weights(lw.wk);
    ql.wv = quantize_weights(lw.wv);
    ql.wo = quantize_weights(lw.wo);
    ql.w_up = quantize_weights(lw.w_up);
    ql.w_gate = quantize_weights(lw.w_gate);
    ql.w_down = quantize_weights(lw.w_down);
    q.layers.push_back(std::move(ql));
  }
  return q;
}

namespace {

ComplexTensor qproject(const ComplexTensor& x, const PackedQuantTensor& w, KernelKind kind) {
  switch (kind) {
    case KernelKind::float_ref: {
      const ComplexTensor xq = dequantize_activation(quantize_activation(x));
      return hermitian_matmul(xq, dequantize_weights(w));
    }
    case KernelKind::multfree: return multfree_gemm(quantize_activation(x), w);
    case KernelKind::lut: return lut_gemm(quantize_activation(x), w);
  }
  throw std::invalid_argument("qproject: bad kernel kind");
}

}  // namespace

RealMatrix quantized_forward(const std::vector<int>& ids, const QuantizedModel& m,
                             KernelKind kind) {
  m.config.validate();
  if (ids.empty()) throw std::invalid_argument("quantized_forward: empty sequence");
  if (ids.size() > m.config.max_seq) {
    throw std::invalid_argument("quantized_forward: sequence exceeds max_seq");
  }
  const std::size_t seq = ids.size();
  const std::size_t d = m.config.d_model, heads = m.config.n_heads, dh = m.config.d_head;
  const double eps = m.config.norm_eps;

  ComplexTensor x({seq, d});
  for (std::size_t t = 0; t < seq; ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= m.config.vocab_size) {
      throw std::out_of_range("quantized_forward: token id outside vocab");
    }
    for (std::size_t j = 0; j < d; ++j) {
      x.re[t * d + j] = m.embed.re[static_cast<std::size_t>(id) * d + j];
      x.im[t * d + j] = m.embed.im[static_cast<std::size_t>(id) * d + j];
    }
  }

  std::vector<std::size_t> positions(seq);
  std::iota(positions.begin(), positions.end(), 0);
  const auto reshape3 = [&](ComplexTensor t) {
    t.shape = {seq, heads, dh};
    return t;
  };
  const auto reshape2 = [&](ComplexTensor t) {
    t.shape = {seq, d};
    return t;
  };
  const auto add_into = [](ComplexTensor& dst, const ComplexTensor& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) {
      dst.re[i] += src.re[i];
      dst.im[i] += src.im[i];
    }
  };

  for (const QuantizedLayer& lw : m.layers) {
    const ComplexTensor normed =
        rmsnorm_componentwise(x, lw.attn_norm_gain.re, lw.attn_norm_gain.im, eps);
    ComplexTensor q = reshape3(qproject(normed, lw.wq, kind));
    ComplexTensor k = reshape3(qproject(normed, lw.wk, kind));
    const ComplexTensor v = reshape3(qproject(normed, lw.wv, kind));
    q = apply_rope(q, positions, m.config.rope_base);
    k = apply_rope(k, positions, m.config.rope_base);
    const ComplexTensor att =
        attention_forward(q, k, v, /*causal=*/true, m.config.scale_dim());
    add_into(x, qproject(reshape2(att), lw.wo, kind));

    const ComplexTensor normed2 =
        rmsnorm_componentwise(x, lw.ffn_norm_gain.re, lw.ffn_norm_gain.im, eps);
    const ComplexTensor gate = qproject(normed2, lw.w_gate, kind);
    const ComplexTensor up = qproject(normed2, lw.w_up, kind);
    const ComplexTensor hidden = complex_elementwise_mul(relu2(gate), up);
    add_into(x, qproject(hidden, lw.w_down, kind));
  }
  x = rmsnorm_componentwise(x, m.final_norm_gain.re, m.final_norm_gain.im, eps);
  return lm_head_forward(x, m.lm_head);
}

}  // namespace phasor
