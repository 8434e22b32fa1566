#pragma once

#include <cstdint>
#include <vector>

#include "phasor/quant.hpp"
#include "phasor/tensor.hpp"

namespace phasor {

enum class Mode { full_precision, qat };

// Reverse-mode tape over the model's op set. Nodes are appended in
// program order, so reverse id order is a valid reverse topological
// order for backward().
//
// In qat mode a linear node runs quantize→dequantize on both operands
// before the Hermitian product and saves the dequantized tensors; its
// backward applies the regular matmul rules to those saved tensors and
// passes the result straight through to the raw inputs (STE — the
// quantizers are treated as identity maps).
class Graph {
 public:
  using NodeId = std::int32_t;

  // Leaf bound to an external tensor (parameters). The tensor must
  // outlive the graph; its gradient is read back via grad().
  NodeId param(const ComplexTensor* p);
  // Leaf owning a value; no gradient is propagated past it.
  NodeId constant(ComplexTensor value);

  NodeId embed(NodeId table, std::vector<int> ids);
  NodeId linear(NodeId x, NodeId w, Mode mode);
  NodeId add(NodeId a, NodeId b);
  NodeId cmul(NodeId a, NodeId b);
  NodeId relu2(NodeId z);
  NodeId rmsnorm(NodeId x, NodeId gain, double eps);
  NodeId reshape(NodeId x, std::vector<std::size_t> dims);
  NodeId rope(NodeId x, std::vector<std::size_t> positions, double base);
  NodeId attention(NodeId q, NodeId k, NodeId v, bool causal, std::size_t scale_dim);
  // Real part of the Hermitian pairing of every row of h with every row
  // of w: value.re is [rows(h) × rows(w)] logits, value.im is zero.
  NodeId score(NodeId h, NodeId w);
  // Mean token-level negative log-likelihood; value is a 1-element tensor.
  NodeId cross_entropy(NodeId logits, std::vector<int> targets);
  // Σ re + Σ im as a 1-element tensor (scalar loss for gradient checks).
  NodeId sum(NodeId x);

  const ComplexTensor& value(NodeId id) const;
  double scalar_value(NodeId id) const;

  // Seeds d(root)=1 and accumulates gradients into every reachable node.
  void backward(NodeId root);
  const ComplexTensor& grad(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    param,
    constant,
    embed,
    linear_full,
    linear_qat,
    add,
    cmul,
    relu2,
    rmsnorm,
    reshape,
    rope,
    attention,
    score,
    cross_entropy,
    sum,
  };

  struct Node {
    Op op;
    NodeId a = -1, b = -1, c = -1;
    ComplexTensor value;
    const ComplexTensor* external = nullptr;
    ComplexTensor grad;
    bool has_grad = false;

    std::vector<int> ids;                 // embed ids / ce targets
    std::vector<std::size_t> positions;   // rope
    double scalar = 0.0;                  // rmsnorm eps / rope base
    std::size_t scale_dim = 0;            // attention
    bool causal = false;
    ComplexTensor saved_x, saved_w;       // qat linear: dequantized operands
    std::vector<double> saved_real;       // attention / ce softmax probs
  };

  NodeId push(Node n);
  const ComplexTensor& val(const Node& n) const { return n.external ? *n.external : n.value; }
  ComplexTensor& ensure_grad(NodeId id);

  void backward_node(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace phasor
