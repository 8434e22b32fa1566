#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phasor/corpus.hpp"
#include "phasor/model.hpp"
#include "phasor/tensor.hpp"

namespace phasor {

struct TrainHyper {
  std::size_t batch_size = 8;
  std::size_t seq_len = 128;
  double peak_lr_stage1 = 3e-3;
  double peak_lr_stage2 = 2e-3;
  std::size_t warmup_steps = 0;  // 0 → 2% of total_steps (at least 1)
  std::size_t total_steps = 500;
  double weight_decay_stage1 = 0.1;
  double weight_decay_stage2 = 0.0;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  std::uint64_t rng_seed = 0;
  std::size_t start_step = 0;
  int start_stage = 1;
  // Fast mode accumulates batch gradients in 32-bit floats; tests and
  // gradient checks use the 64-bit default.
  bool fp32_grad_accum = false;

  std::size_t effective_warmup() const;
  void validate() const;
};

struct TrainState {
  std::size_t step = 0;
  int stage = 1;
  std::uint64_t rng_seed = 0;
  TrainHyper hyper;
  // Adam moments in for_each_param order, shaped like their parameters.
  std::vector<ComplexTensor> m1, m2;
};

// Two-stage linear schedule: warmup 0→peak1, decay to 0 at the 50% mark,
// restart at peak2, decay to 0 at total_steps.
double lr_at(std::size_t step, const TrainState& state);

// Mean over positions of −log softmax(logits)[target]. probs_out, when
// given, receives the row softmax.
double cross_entropy(const RealMatrix& logits, const std::vector<int>& targets,
                     std::vector<double>* probs_out = nullptr);

// Global-norm gradient clip followed by a decoupled-weight-decay Adam
// update with bias correction. grads must be in for_each_param order;
// weight decay applies only in stage 1.
void adamw_step(Model& m, std::vector<ComplexTensor>& grads, TrainState& state, double lr);

struct LossRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  Mode mode = Mode::full_precision;
};

struct TrainResult {
  Model model;
  TrainState state;
  std::vector<LossRecord> trace;
};

// Deterministic QAT / full-precision training on fixed-length windows
// sampled from the corpus.
TrainResult train_loop(const Corpus& corpus, const ModelConfig& config, const TrainHyper& hyper,
                       Mode mode);

std::string mode_name(Mode mode);

// CSV columns: step, lr, loss, mode.
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& trace);

}  // namespace phasor
