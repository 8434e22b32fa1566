#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasor/graph.hpp"
#include "phasor/kernel.hpp"
#include "phasor/quant.hpp"
#include "phasor/tensor.hpp"

namespace phasor {

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t d_model = 64;   // complex feature count
  std::size_t n_heads = 4;
  std::size_t d_head = 16;    // complex per-head feature count
  std::size_t d_ffn = 128;    // complex hidden count
  std::size_t n_layers = 2;
  std::size_t max_seq = 256;
  double rope_base = 10000.0;
  double norm_eps = 1e-6;
  // Softmax scale divisor. 0 means the default 2·d_head (the width of
  // the concatenated per-head tensors the real attention kernel sees).
  std::size_t attn_scale_dim = 0;

  std::size_t scale_dim() const { return attn_scale_dim ? attn_scale_dim : 2 * d_head; }
  void validate() const;
};

// The seven projections listed here are the quantization targets;
// embeddings, norm gains, and the LM head always stay full precision.
struct LayerWeights {
  ComplexTensor attn_norm_gain;  // [d_model]
  ComplexTensor wq, wk, wv, wo;  // [d_model × d_model]
  ComplexTensor ffn_norm_gain;   // [d_model]
  ComplexTensor w_up, w_gate;    // [d_model × d_ffn]
  ComplexTensor w_down;          // [d_ffn × d_model]
};

struct Model {
  ModelConfig config;
  ComplexTensor embed;  // [vocab × d_model]; re/im planes are the two channels
  std::vector<LayerWeights> layers;
  ComplexTensor final_norm_gain;  // [d_model]
  // LM head as a complex [vocab × d_model] matrix; row v concatenated as
  // [re row | im row] is the real [vocab × 2·d_model] output projection.
  ComplexTensor lm_head;
};

// W_re, W_im ~ N(0, (1/sqrt(2·fan_in))²) so complex entries have expected
// squared modulus 1/fan_in; norm gains start at 1.
Model init_model(const ModelConfig& config, std::uint64_t seed);

// Stable parameter enumeration shared by the trainer, checkpointing and
// analysis: embed, per layer (attn_norm, wq, wk, wv, wo, ffn_norm, w_up,
// w_gate, w_down), final_norm, lm_head.
template <typename ModelT, typename Fn>
void for_each_param(ModelT& m, Fn&& fn) {
  fn("embed", m.embed);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    fn(p + "attn_norm", m.layers[l].attn_norm_gain);
    fn(p + "wq", m.layers[l].wq);
    fn(p + "wk", m.layers[l].wk);
    fn(p + "wv", m.layers[l].wv);
    fn(p + "wo", m.layers[l].wo);
    fn(p + "ffn_norm", m.layers[l].ffn_norm_gain);
    fn(p + "w_up", m.layers[l].w_up);
    fn(p + "w_gate", m.layers[l].w_gate);
    fn(p + "w_down", m.layers[l].w_down);
  }
  fn("final_norm", m.final_norm_gain);
  fn("lm_head", m.lm_head);
}

// Row t is embed_re[id_t] + i·embed_im[id_t].
ComplexTensor embed_tokens(const std::vector<int>& ids, const Model& m);

// Rotates feature j of the token at position m by e^{i·m·θ_j} with
// θ_j = base^{−j/d_head}; magnitudes are preserved exactly.
ComplexTensor apply_rope(const ComplexTensor& qk, const std::vector<std::size_t>& positions,
                         double base);

// Re(conj(Q)·Kᵀ) = Q_re·K_reᵀ + Q_im·K_imᵀ for 2-D inputs sharing the
// trailing feature axis. This is the direct complex formulation; the
// attention kernel below goes through the concatenated-real form instead.
RealMatrix attention_scores(const ComplexTensor& q, const ComplexTensor& k);

// Concatenation trick: re|im are joined along the feature axis, a plain
// real attention (softmax(Q̃K̃ᵀ/sqrt(scale_dim))·Ṽ with optional causal
// mask) runs per head, and the output splits back into planes. Inputs
// are [seq × heads × d_head]. probs_out, when given, receives the
// softmax matrix per head ([heads][seq][seq] flattened).
ComplexTensor attention_forward(const ComplexTensor& q, const ComplexTensor& k,
                                const ComplexTensor& v, bool causal, std::size_t scale_dim,
                                std::vector<double>* probs_out = nullptr);

// h = relu2(x·W_gate) ⊙ (x·W_up), then h·W_down, all three projections
// Hermitian (quantize→dequantize applied in qat mode).
ComplexTensor ffn_forward(const ComplexTensor& x, const LayerWeights& lw, Mode mode);

// logits = [H_re | H_im]·W_outᵀ, expressed on the complex form of the
// head as the real part of the Hermitian pairing. Never quantized.
RealMatrix lm_head_forward(const ComplexTensor& h, const ComplexTensor& lm_head);

// Tape for one sequence: forward in the requested mode with leaves bound
// to the model parameters (in for_each_param order).
struct ModelTape {
  Graph graph;
  Graph::NodeId logits = -1;
  Graph::NodeId loss = -1;  // set when targets are provided
  std::vector<Graph::NodeId> params;
};

ModelTape build_model_tape(const Model& m, const std::vector<int>& ids, Mode mode,
                           const std::vector<int>* targets = nullptr);

// Full decoder forward; returns [seq × vocab] logits.
RealMatrix model_forward(const std::vector<int>& ids, const Model& m, Mode mode);

// Packed-weight model for the integer inference path. Projections stay
// packed; everything else is full precision.
struct QuantizedLayer {
  ComplexTensor attn_norm_gain;
  PackedQuantTensor wq, wk, wv, wo;
  ComplexTensor ffn_norm_gain;
  PackedQuantTensor w_up, w_gate, w_down;
};

struct QuantizedModel {
  ModelConfig config;
  ComplexTensor embed;
  std::vector<QuantizedLayer> layers;
  ComplexTensor final_norm_gain;
  ComplexTensor lm_head;
};

QuantizedModel quantize_model(const Model& m);

enum class KernelKind { float_ref, multfree, lut };

// Forward over packed weights. float_ref runs the quantize→dequantize
// float reference for every projection; multfree/lut run the integer
// kernels. All three agree to float-rounding level.
RealMatrix quantized_forward(const std::vector<int>& ids, const QuantizedModel& m,
                             KernelKind kind);

}  // namespace phasor
