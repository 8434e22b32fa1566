#include "phasor/train.hpp"

#include "phasor/threading.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

namespace phasor {

std::size_t TrainHyper::effective_warmup() const {
  if (warmup_steps > 0) return warmup_steps;
  return std::max<std::size_t>(1, total_steps / 50);
}

void TrainHyper::validate() const {
  if (batch_size == 0 || seq_len == 0) {
    throw std::invalid_argument("TrainHyper: batch_size and seq_len must be positive");
  }
  if (total_steps < 2) throw std::invalid_argument("TrainHyper: total_steps must be at least 2");
  if (effective_warmup() >= total_steps / 2) {
    throw std::invalid_argument("TrainHyper: warmup must end before the 50% stage switch");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("TrainHyper: betas must lie in [0,1)");
  }
  if (clip_norm <= 0.0) throw std::invalid_argument("TrainHyper: clip_norm must be positive");
  if (start_step > total_steps) {
    throw std::invalid_argument("TrainHyper: start_step exceeds total_steps");
  }
}

double lr_at(std::size_t step, const TrainState& state) {
  const TrainHyper& h = state.hyper;
  if (step > h.total_steps) throw std::invalid_argument("lr_at: step exceeds total_steps");
  const std::size_t warmup = h.effective_warmup();
  const std::size_t half = h.total_steps / 2;
  if (step <= warmup) {
    return h.peak_lr_stage1 * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (step <= half) {
    return h.peak_lr_stage1 * static_cast<double>(half - step) /
           static_cast<double>(half - warmup);
  }
  return h.peak_lr_stage2 * static_cast<double>(h.total_steps - step) /
         static_cast<double>(h.total_steps - half);
}

double cross_entropy(const RealMatrix& logits, const std::vector<int>& targets,
                     std::vector<double>* probs_out) {
  if (targets.size() != logits.rows) {
    throw std::invalid_argument("cross_entropy: one target per logit row required");
  }
  if (probs_out) probs_out->assign(logits.rows * logits.cols, 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < logits.rows; ++t) {
    const int target = targets[t];
    if (target < 0 || static_cast<std::size_t>(target) >= logits.cols) {
      throw std::out_of_range("cross_entropy: target id outside vocab");
    }
    const double* row = logits.data.data() + t * logits.cols;
    double maxv = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < logits.cols; ++v) maxv = std::max(maxv, row[v]);
    double denom = 0.0;
    for (std::size_t v = 0; v < logits.cols; ++v) denom += std::exp(row[v] - maxv);
    const double lse = maxv + std::log(denom);
    total += lse - row[target];
    if (probs_out) {
      for (std::size_t v = 0; v < logits.cols; ++v) {
        (*probs_out)[t * logits.cols + v] = std::exp(row[v] - lse);
      }
    }
  }
  return total / static_cast<double>(logits.rows);
}

void adamw_step(Model& m, std::vector<ComplexTensor>& grads, TrainState& state, double lr) {
  std::vector<ComplexTensor*> params;
  for_each_param(m, [&](const std::string&, ComplexTensor& p) { params.push_back(&p); });
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adamw_step: gradient count does not match parameter count");
  }
  if (state.m1.empty()) {
    for (ComplexTensor* p : params) {
      state.m1.emplace_back(p->shape);
      state.m2.emplace_back(p->shape);
    }
  }

  // Global-norm clip across every plane of every gradient.
  double sq = 0.0;
  for (const ComplexTensor& g : grads) {
    for (double v : g.re) sq += v * v;
    for (double v : g.im) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > state.hyper.clip_norm) {
    const double scale = state.hyper.clip_norm / norm;
    for (ComplexTensor& g : grads) {
      for (double& v : g.re) v *= scale;
      for (double& v : g.im) v *= scale;
    }
  }

  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2, eps = state.hyper.adam_eps;
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);
  const double wd =
      state.stage == 1 ? state.hyper.weight_decay_stage1 : state.hyper.weight_decay_stage2;

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto update_plane = [&](std::vector<double>& w, const std::vector<double>& g,
                            std::vector<double>& m1, std::vector<double>& m2) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] *= 1.0 - lr * wd;
        m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
        m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m1[i] / bc1;
        const double vhat = m2[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    };
    update_plane(params[p]->re, grads[p].re, state.m1[p].re, state.m2[p].re);
    update_plane(params[p]->im, grads[p].im, state.m1[p].im, state.m2[p].im);
  }
  ++state.step;
}

std::string mode_name(Mode mode) {
  return mode == Mode::qat ? "qat" : "full_precision";
}

TrainResult train_loop(const Corpus& corpus, const ModelConfig& config, const TrainHyper& hyper,
                       Mode mode) {
  config.validate();
  hyper.validate();
  if (corpus.vocab_size > config.vocab_size) {
    throw std::invalid_argument("train_loop: corpus vocab " + std::to_string(corpus.vocab_size) +
                                " exceeds model vocab " + std::to_string(config.vocab_size));
  }
  if (corpus.tokens.size() < hyper.seq_len + 1) {
    throw std::invalid_argument("train_loop: corpus has " + std::to_string(corpus.tokens.size()) +
                                " tokens, shorter than one training window of " +
                                std::to_string(hyper.seq_len + 1));
  }

  TrainResult result;
  result.model = init_model(config, hyper.rng_seed);
  result.state.rng_seed = hyper.rng_seed;
  result.state.hyper = hyper;
  result.state.step = hyper.start_step;
  result.state.stage = hyper.start_stage;

  std::mt19937_64 rng(hyper.rng_seed);
  std::uniform_int_distribution<std::size_t> offset_dist(0,
                                                         corpus.tokens.size() - hyper.seq_len - 1);
  const std::size_t half = hyper.total_steps / 2;

  std::vector<ComplexTensor> grads;
  for_each_param(result.model, [&](const std::string&, const ComplexTensor& p) {
    grads.emplace_back(p.shape);
  });

  std::vector<double> seq_loss(hyper.batch_size);
  std::vector<std::vector<ComplexTensor>> seq_grads(hyper.batch_size);

  for (std::size_t step = hyper.start_step; step < hyper.total_steps; ++step) {
    result.state.stage = step < half ? 1 : 2;
    const double lr = lr_at(step, result.state);

    // Window offsets are drawn on the trainer thread in a fixed order;
    // sequences then run forward/backward against the immutable model in
    // parallel and are reduced in batch order, so the result is
    // bit-identical for any thread count.
    std::vector<std::size_t> offsets(hyper.batch_size);
    for (auto& off : offsets) off = offset_dist(rng);

    parallel_for(hyper.batch_size, [&](std::size_t begin, std::size_t end) {
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t off = offsets[b];
        std::vector<int> ids(corpus.tokens.begin() + off,
                             corpus.tokens.begin() + off + hyper.seq_len);
        std::vector<int> targets(corpus.tokens.begin() + off + 1,
                                 corpus.tokens.begin() + off + hyper.seq_len + 1);
        ModelTape tape = build_model_tape(result.model, ids, mode, &targets);
        tape.graph.backward(tape.loss);
        seq_loss[b] = tape.graph.scalar_value(tape.loss);
        seq_grads[b].clear();
        for (std::size_t p = 0; p < grads.size(); ++p) {
          seq_grads[b].push_back(tape.graph.grad(tape.params[p]));
        }
      }
    });

    for (ComplexTensor& g : grads) {
      std::fill(g.re.begin(), g.re.end(), 0.0);
      std::fill(g.im.begin(), g.im.end(), 0.0);
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < hyper.batch_size; ++b) {
      loss_sum += seq_loss[b];
      for (std::size_t p = 0; p < grads.size(); ++p) {
        const ComplexTensor& g = seq_grads[b][p];
        if (hyper.fp32_grad_accum) {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            grads[p].re[i] = static_cast<float>(static_cast<float>(grads[p].re[i]) +
                                                static_cast<float>(g.re[i]));
            grads[p].im[i] = static_cast<float>(static_cast<float>(grads[p].im[i]) +
                                                static_cast<float>(g.im[i]));
          }
        } else {
          for (std::size_t i = 0; i < g.numel(); ++i) {
            grads[p].re[i] += g.re[i];
            grads[p].im[i] += g.im[i];
          }
        }
      }
    }
    const double inv_batch = 1.0 / static_cast<double>(hyper.batch_size);
    for (ComplexTensor& g : grads) {
      for (double& v : g.re) v *= inv_batch;
      for (double& v : g.im) v *= inv_batch;
    }

    result.trace.push_back({step, lr, loss_sum * inv_batch, mode});
    adamw_step(result.model, grads, result.state, lr);
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path.string());
  out << "step,lr,loss,mode\n";
  out << std::setprecision(17);
  for (const LossRecord& r : trace) {
    out << r.step << ',' << r.lr << ',' << r.loss << ',' << mode_name(r.mode) << '\n';
  }
}

}  // namespace phasor
