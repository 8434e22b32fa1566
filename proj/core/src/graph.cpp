#include "phasor/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phasor/model.hpp"
#include "phasor/threading.hpp"
#include "phasor/train.hpp"

namespace phasor {

namespace {

// C += sign · A(m×p)·B(p×n)
void addmm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t p,
              std::size_t n, double sign) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t t = 0; t < p; ++t) {
        const double av = sign * a[i * p + t];
        const double* __restrict br = b + t * n;
        double* __restrict cr = c + i * n;
        for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
      }
    }
  });
}

// C += sign · A(m×p)·B(n×p)ᵀ
void addmm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t p,
              std::size_t n, double sign) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double* __restrict ar = a + i * p;
        const double* __restrict br = b + j * p;
        double dot = 0.0;
        for (std::size_t t = 0; t < p; ++t) dot += ar[t] * br[t];
        c[i * n + j] += sign * dot;
      }
    }
  });
}

// C += sign · A(p×m)ᵀ·B(p×n)
void addmm_tn(const double* a, const double* b, double* c, std::size_t p, std::size_t m,
              std::size_t n, double sign) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double* __restrict cr = c + i * n;
      for (std::size_t t = 0; t < p; ++t) {
        const double av = sign * a[t * m + i];
        const double* __restrict br = b + t * n;
        for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
      }
    }
  });
}

}  // namespace

Graph::NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const ComplexTensor& Graph::value(NodeId id) const { return val(nodes_.at(id)); }

double Graph::scalar_value(NodeId id) const {
  const ComplexTensor& v = value(id);
  if (v.numel() != 1) throw std::invalid_argument("scalar_value: node is not scalar");
  return v.re[0];
}

ComplexTensor& Graph::ensure_grad(NodeId id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = ComplexTensor(val(n).shape);
    n.has_grad = true;
  }
  return n.grad;
}

const ComplexTensor& Graph::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (!n.has_grad) throw std::runtime_error("grad: node received no gradient; run backward first");
  return n.grad;
}

Graph::NodeId Graph::param(const ComplexTensor* p) {
  Node n;
  n.op = Op::param;
  n.external = p;
  return push(std::move(n));
}

Graph::NodeId Graph::constant(ComplexTensor value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Graph::NodeId Graph::embed(NodeId table, std::vector<int> ids) {
  const ComplexTensor& tab = value(table);
  if (tab.rank() != 2) throw std::invalid_argument("embed: table must be 2-D");
  const std::size_t vocab = tab.shape[0], d = tab.shape[1];
  Node n;
  n.op = Op::embed;
  n.a = table;
  n.value = ComplexTensor({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw std::out_of_range("embed: token id " + std::to_string(id) + " outside vocab of " +
                              std::to_string(vocab));
    }
    for (std::size_t j = 0; j < d; ++j) {
      n.value.re[t * d + j] = tab.re[static_cast<std::size_t>(id) * d + j];
      n.value.im[t * d + j] = tab.im[static_cast<std::size_t>(id) * d + j];
    }
  }
  n.ids = std::move(ids);
  return push(std::move(n));
}

Graph::NodeId Graph::linear(NodeId x, NodeId w, Mode mode) {
  const ComplexTensor& xv = value(x);
  const ComplexTensor& wv = value(w);
  Node n;
  n.a = x;
  n.b = w;
  if (mode == Mode::full_precision) {
    n.op = Op::linear_full;
    n.value = hermitian_matmul(xv, wv);
  } else {
    n.op = Op::linear_qat;
    n.saved_x = dequantize_activation(quantize_activation(xv));
    n.saved_w = dequantize_weights(quantize_weights(wv));
    n.value = hermitian_matmul(n.saved_x, n.saved_w);
  }
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const ComplexTensor& av = value(a);
  const ComplexTensor& bv = value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  Node n;
  n.op = Op::add;
  n.a = a;
  n.b = b;
  n.value = ComplexTensor(av.shape);
  for (std::size_t i = 0; i < av.numel(); ++i) {
    n.value.re[i] = av.re[i] + bv.re[i];
    n.value.im[i] = av.im[i] + bv.im[i];
  }
  return push(std::move(n));
}

Graph::NodeId Graph::cmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::cmul;
  n.a = a;
  n.b = b;
  n.value = complex_elementwise_mul(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::relu2(NodeId z) {
  Node n;
  n.op = Op::relu2;
  n.a = z;
  n.value = phasor::relu2(value(z));
  return push(std::move(n));
}

Graph::NodeId Graph::rmsnorm(NodeId x, NodeId gain, double eps) {
  const ComplexTensor& gv = value(gain);
  if (gv.rank() != 1) throw std::invalid_argument("rmsnorm: gain must be 1-D");
  Node n;
  n.op = Op::rmsnorm;
  n.a = x;
  n.b = gain;
  n.scalar = eps;
  n.value = rmsnorm_componentwise(value(x), gv.re, gv.im, eps);
  return push(std::move(n));
}

Graph::NodeId Graph::reshape(NodeId x, std::vector<std::size_t> dims) {
  const ComplexTensor& xv = value(x);
  std::size_t count = 1;
  for (std::size_t d : dims) count *= d;
  if (count != xv.numel()) throw std::invalid_argument("reshape: element count changes");
  Node n;
  n.op = Op::reshape;
  n.a = x;
  n.value.shape = std::move(dims);
  n.value.re = xv.re;
  n.value.im = xv.im;
  return push(std::move(n));
}

Graph::NodeId Graph::rope(NodeId x, std::vector<std::size_t> positions, double base) {
  Node n;
  n.op = Op::rope;
  n.a = x;
  n.scalar = base;
  n.value = apply_rope(value(x), positions, base);
  n.positions = std::move(positions);
  return push(std::move(n));
}

Graph::NodeId Graph::attention(NodeId q, NodeId k, NodeId v, bool causal, std::size_t scale_dim) {
  Node n;
  n.op = Op::attention;
  n.a = q;
  n.b = k;
  n.c = v;
  n.causal = causal;
  n.scale_dim = scale_dim;
  n.value = attention_forward(value(q), value(k), value(v), causal, scale_dim, &n.saved_real);
  return push(std::move(n));
}

Graph::NodeId Graph::score(NodeId h, NodeId w) {
  const RealMatrix s = attention_scores(value(h), value(w));
  Node n;
  n.op = Op::score;
  n.a = h;
  n.b = w;
  n.value = ComplexTensor({s.rows, s.cols});
  n.value.re = s.data;
  return push(std::move(n));
}

Graph::NodeId Graph::cross_entropy(NodeId logits, std::vector<int> targets) {
  const ComplexTensor& lv = value(logits);
  if (lv.rank() != 2) throw std::invalid_argument("cross_entropy: logits must be 2-D");
  RealMatrix lm(lv.shape[0], lv.shape[1]);
  lm.data = lv.re;
  Node n;
  n.op = Op::cross_entropy;
  n.a = logits;
  const double loss = phasor::cross_entropy(lm, targets, &n.saved_real);
  n.value = ComplexTensor({1});
  n.value.re[0] = loss;
  n.ids = std::move(targets);
  return push(std::move(n));
}

Graph::NodeId Graph::sum(NodeId x) {
  const ComplexTensor& xv = value(x);
  Node n;
  n.op = Op::sum;
  n.a = x;
  n.value = ComplexTensor({1});
  for (double v : xv.re) n.value.re[0] += v;
  for (double v : xv.im) n.value.re[0] += v;
  return push(std::move(n));
}

void Graph::backward(NodeId root) {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size()) {
    throw std::invalid_argument("backward: bad root node");
  }
  if (val(nodes_[root]).numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar");
  }
  for (auto& n : nodes_) {
    n.grad = ComplexTensor();
    n.has_grad = false;
  }
  ensure_grad(root).re[0] = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    if (nodes_[id].has_grad) backward_node(id);
  }
}

void Graph::backward_node(NodeId id) {
  Node& n = nodes_[id];
  const ComplexTensor& g = n.grad;
  switch (n.op) {
    case Op::param:
    case Op::constant:
      return;

    case Op::embed: {
      ComplexTensor& dt = ensure_grad(n.a);
      const std::size_t d = n.value.shape[1];
      for (std::size_t t = 0; t < n.ids.size(); ++t) {
        const std::size_t row = static_cast<std::size_t>(n.ids[t]);
        for (std::size_t j = 0; j < d; ++j) {
          dt.re[row * d + j] += g.re[t * d + j];
          dt.im[row * d + j] += g.im[t * d + j];
        }
      }
      return;
    }

    case Op::linear_full:
    case Op::linear_qat: {
      // STE: the qat case applies the same rules to the saved
      // dequantized operands and writes the result to the raw inputs.
      const ComplexTensor& xv = n.op == Op::linear_qat ? n.saved_x : val(nodes_[n.a]);
      const ComplexTensor& wv = n.op == Op::linear_qat ? n.saved_w : val(nodes_[n.b]);
      const std::size_t m = xv.shape[0], k = xv.shape[1], out = wv.shape[1];
      ComplexTensor& dx = ensure_grad(n.a);
      ComplexTensor& dw = ensure_grad(n.b);
      // dx_re = G_re·W_reᵀ + G_im·W_imᵀ ; dx_im = G_re·W_imᵀ − G_im·W_reᵀ
      addmm_nt(g.re.data(), wv.re.data(), dx.re.data(), m, out, k, 1.0);
      addmm_nt(g.im.data(), wv.im.data(), dx.re.data(), m, out, k, 1.0);
      addmm_nt(g.re.data(), wv.im.data(), dx.im.data(), m, out, k, 1.0);
      addmm_nt(g.im.data(), wv.re.data(), dx.im.data(), m, out, k, -1.0);
      // dW_re = x_reᵀ·G_re − x_imᵀ·G_im ; dW_im = x_imᵀ·G_re + x_reᵀ·G_im
      addmm_tn(xv.re.data(), g.re.data(), dw.re.data(), m, k, out, 1.0);
      addmm_tn(xv.im.data(), g.im.data(), dw.re.data(), m, k, out, -1.0);
      addmm_tn(xv.im.data(), g.re.data(), dw.im.data(), m, k, out, 1.0);
      addmm_tn(xv.re.data(), g.im.data(), dw.im.data(), m, k, out, 1.0);
      return;
    }

    case Op::add: {
      ComplexTensor& da = ensure_grad(n.a);
      ComplexTensor& db = ensure_grad(n.b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        da.re[i] += g.re[i];
        da.im[i] += g.im[i];
        db.re[i] += g.re[i];
        db.im[i] += g.im[i];
      }
      return;
    }

    case Op::cmul: {
      const ComplexTensor& av = val(nodes_[n.a]);
      const ComplexTensor& bv = val(nodes_[n.b]);
      ComplexTensor& da = ensure_grad(n.a);
      ComplexTensor& db = ensure_grad(n.b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        // d(a) = g ⊙ conj(b), d(b) = g ⊙ conj(a)
        da.re[i] += g.re[i] * bv.re[i] + g.im[i] * bv.im[i];
        da.im[i] += g.im[i] * bv.re[i] - g.re[i] * bv.im[i];
        db.re[i] += g.re[i] * av.re[i] + g.im[i] * av.im[i];
        db.im[i] += g.im[i] * av.re[i] - g.re[i] * av.im[i];
      }
      return;
    }

    case Op::relu2: {
      const ComplexTensor& zv = val(nodes_[n.a]);
      ComplexTensor& dz = ensure_grad(n.a);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        dz.re[i] += g.re[i] * 2.0 * (zv.re[i] > 0.0 ? zv.re[i] : 0.0);
        dz.im[i] += g.im[i] * 2.0 * (zv.im[i] > 0.0 ? zv.im[i] : 0.0);
      }
      return;
    }

    case Op::rmsnorm: {
      const ComplexTensor& xv = val(nodes_[n.a]);
      const ComplexTensor& gv = val(nodes_[n.b]);
      ComplexTensor& dx = ensure_grad(n.a);
      ComplexTensor& dg = ensure_grad(n.b);
      const std::size_t d = xv.shape.back();
      const std::size_t rows = xv.numel() / d;
      const double eps = n.scalar;
      for (int plane = 0; plane < 2; ++plane) {
        const std::vector<double>& x = plane == 0 ? xv.re : xv.im;
        const std::vector<double>& gain = plane == 0 ? gv.re : gv.im;
        const std::vector<double>& gr = plane == 0 ? g.re : g.im;
        std::vector<double>& dxp = plane == 0 ? dx.re : dx.im;
        std::vector<double>& dgp = plane == 0 ? dg.re : dg.im;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xr = x.data() + r * d;
          const double* grr = gr.data() + r * d;
          double ms = 0.0;
          for (std::size_t j = 0; j < d; ++j) ms += xr[j] * xr[j];
          const double rms = std::sqrt(ms / static_cast<double>(d) + eps);
          const double inv = 1.0 / rms;
          double dot = 0.0;  // Σ_j (g_j·gain_j)·x_j
          for (std::size_t j = 0; j < d; ++j) dot += grr[j] * gain[j] * xr[j];
          const double k = dot * inv * inv * inv / static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            dxp[r * d + j] += grr[j] * gain[j] * inv - xr[j] * k;
            dgp[j] += grr[j] * xr[j] * inv;
          }
        }
      }
      return;
    }

    case Op::reshape: {
      ComplexTensor& dx = ensure_grad(n.a);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        dx.re[i] += g.re[i];
        dx.im[i] += g.im[i];
      }
      return;
    }

    case Op::rope: {
      const ComplexTensor& xv = val(nodes_[n.a]);
      ComplexTensor& dx = ensure_grad(n.a);
      const std::size_t seq = xv.shape[0], heads = xv.shape[1], dh = xv.shape[2];
      for (std::size_t s = 0; s < seq; ++s) {
        const double pos = static_cast<double>(n.positions[s]);
        for (std::size_t j = 0; j < dh; ++j) {
          const double theta = std::pow(n.scalar, -static_cast<double>(j) / static_cast<double>(dh));
          const double c = std::cos(pos * theta);
          const double si = std::sin(pos * theta);
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t idx = (s * heads + h) * dh + j;
            // inverse rotation: multiply the cotangent by e^{−i·m·θ}
            dx.re[idx] += g.re[idx] * c + g.im[idx] * si;
            dx.im[idx] += -g.re[idx] * si + g.im[idx] * c;
          }
        }
      }
      return;
    }

    case Op::attention: {
      const ComplexTensor& qv = val(nodes_[n.a]);
      const ComplexTensor& kv = val(nodes_[n.b]);
      const ComplexTensor& vv = val(nodes_[n.c]);
      ComplexTensor& dq = ensure_grad(n.a);
      ComplexTensor& dk = ensure_grad(n.b);
      ComplexTensor& dv = ensure_grad(n.c);
      const std::size_t seq = qv.shape[0], heads = qv.shape[1], dh = qv.shape[2];
      const std::size_t w = 2 * dh;
      const double inv_scale = 1.0 / std::sqrt(static_cast<double>(n.scale_dim));
      std::vector<double> qt(seq * w), kt(seq * w), vt(seq * w), gt(seq * w);
      std::vector<double> dqt(seq * w), dkt(seq * w), dvt(seq * w);
      std::vector<double> dp(seq * seq), ds(seq * seq);
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t s = 0; s < seq; ++s) {
          for (std::size_t j = 0; j < dh; ++j) {
            const std::size_t idx = (s * heads + h) * dh + j;
            qt[s * w + j] = qv.re[idx];
            qt[s * w + dh + j] = qv.im[idx];
            kt[s * w + j] = kv.re[idx];
            kt[s * w + dh + j] = kv.im[idx];
            vt[s * w + j] = vv.re[idx];
            vt[s * w + dh + j] = vv.im[idx];
            gt[s * w + j] = g.re[idx];
            gt[s * w + dh + j] = g.im[idx];
          }
        }
        const double* probs = n.saved_real.data() + h * seq * seq;
        std::fill(dqt.begin(), dqt.end(), 0.0);
        std::fill(dkt.begin(), dkt.end(), 0.0);
        std::fill(dvt.begin(), dvt.end(), 0.0);
        // dṼ = Pᵀ·G̃ ; dP = G̃·Ṽᵀ
        addmm_tn(probs, gt.data(), dvt.data(), seq, seq, w, 1.0);
        std::fill(dp.begin(), dp.end(), 0.0);
        addmm_nt(gt.data(), vt.data(), dp.data(), seq, w, seq, 1.0);
        // softmax backward per row, then the score scale
        for (std::size_t a = 0; a < seq; ++a) {
          double rowdot = 0.0;
          for (std::size_t b = 0; b < seq; ++b) rowdot += dp[a * seq + b] * probs[a * seq + b];
          for (std::size_t b = 0; b < seq; ++b) {
            ds[a * seq + b] = probs[a * seq + b] * (dp[a * seq + b] - rowdot) * inv_scale;
          }
        }
        // dQ̃ = dS·K̃ ; dK̃ = dSᵀ·Q̃
        addmm_nn(ds.data(), kt.data(), dqt.data(), seq, seq, w, 1.0);
        addmm_tn(ds.data(), qt.data(), dkt.data(), seq, seq, w, 1.0);
        for (std::size_t s = 0; s < seq; ++s) {
          for (std::size_t j = 0; j < dh; ++j) {
            const std::size_t idx = (s * heads + h) * dh + j;
            dq.re[idx] += dqt[s * w + j];
            dq.im[idx] += dqt[s * w + dh + j];
            dk.re[idx] += dkt[s * w + j];
            dk.im[idx] += dkt[s * w + dh + j];
            dv.re[idx] += dvt[s * w + j];
            dv.im[idx] += dvt[s * w + dh + j];
          }
        }
      }
      return;
    }

    case Op::score: {
      const ComplexTensor& hv = val(nodes_[n.a]);
      const ComplexTensor& wv = val(nodes_[n.b]);
      ComplexTensor& dh = ensure_grad(n.a);
      ComplexTensor& dw = ensure_grad(n.b);
      const std::size_t m = hv.shape[0], d = hv.shape[1], out = wv.shape[0];
      // logits = h_re·w_reᵀ + h_im·w_imᵀ (only the re plane of g matters)
      addmm_nn(g.re.data(), wv.re.data(), dh.re.data(), m, out, d, 1.0);
      addmm_nn(g.re.data(), wv.im.data(), dh.im.data(), m, out, d, 1.0);
      addmm_tn(g.re.data(), hv.re.data(), dw.re.data(), m, out, d, 1.0);
      addmm_tn(g.re.data(), hv.im.data(), dw.im.data(), m, out, d, 1.0);
      return;
    }

    case Op::sum: {
      ComplexTensor& dx = ensure_grad(n.a);
      const double gs = g.re[0];
      for (double& v : dx.re) v += gs;
      for (double& v : dx.im) v += gs;
      return;
    }

    case Op::cross_entropy: {
      const ComplexTensor& lv = val(nodes_[n.a]);
      ComplexTensor& dl = ensure_grad(n.a);
      const std::size_t seq = lv.shape[0], vocab = lv.shape[1];
      const double gscale = g.re[0] / static_cast<double>(seq);
      for (std::size_t t = 0; t < seq; ++t) {
        for (std::size_t v = 0; v < vocab; ++v) {
          double p = n.saved_real[t * vocab + v];
          if (v == static_cast<std::size_t>(n.ids[t])) p -= 1.0;
          dl.re[t * vocab + v] += gscale * p;
        }
      }
      return;
    }
  }
}

}  // namespace phasor
