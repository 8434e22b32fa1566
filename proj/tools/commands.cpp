#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "phasor/analysis.hpp"
#include "phasor/checkpoint.hpp"
#include "phasor/config.hpp"
#include "phasor/corpus.hpp"
#include "phasor/kernel.hpp"
#include "phasor/model.hpp"
#include "phasor/threading.hpp"
#include "phasor/train.hpp"

namespace phasor::cli {

namespace {

void apply_globals(const GlobalOpts& g) {
  set_num_threads(g.deterministic ? 1 : g.threads);
}

Mode parse_mode(const std::string& s) {
  if (s == "qat") return Mode::qat;
  if (s == "full_precision") return Mode::full_precision;
  throw std::runtime_error("unknown mode '" + s + "' (expected qat or full_precision)");
}

KernelKind parse_kernel(const std::string& s) {
  if (s == "float") return KernelKind::float_ref;
  if (s == "multfree") return KernelKind::multfree;
  if (s == "lut") return KernelKind::lut;
  throw std::runtime_error("unknown kernel '" + s + "' (expected float, multfree or lut)");
}

}  // namespace

int cmd_train(const TrainOpts& opts, const GlobalOpts& g) {
  apply_globals(g);
  RunConfig cfg = parse_config_file(opts.config);
  if (g.seed) cfg.train.rng_seed = *g.seed;
  const Corpus corpus =
      opts.vocab ? load_corpus(opts.corpus, *opts.vocab) : load_corpus(opts.corpus);
  const Mode mode = parse_mode(opts.mode);

  TrainResult result = train_loop(corpus, cfg.model, cfg.train, mode);
  write_loss_csv(opts.loss_csv, result.trace);
  if (opts.save == "quantized") {
    save_checkpoint(result.model, CheckpointMode::quantized, opts.out_checkpoint);
  } else if (opts.save == "full") {
    save_checkpoint(result.model, CheckpointMode::full, opts.out_checkpoint);
  } else {
    throw std::runtime_error("unknown save mode '" + opts.save + "' (expected full or quantized)");
  }
  if (!result.trace.empty()) {
    std::cout << "trained " << result.trace.size() << " steps (" << mode_name(mode)
              << "); first loss " << result.trace.front().loss << ", last loss "
              << result.trace.back().loss << "\n";
  }
  std::cout << "wrote " << opts.out_checkpoint.string() << " and " << opts.loss_csv.string()
            << "\n";
  return 0;
}

int cmd_quantize(const QuantizeOpts& opts, const GlobalOpts& g) {
  apply_globals(g);
  Checkpoint ck = load_checkpoint(opts.in_checkpoint);
  if (ck.mode == CheckpointMode::quantized) {
    throw std::runtime_error("checkpoint " + opts.in_checkpoint.string() +
                             " is already quantized");
  }
  save_checkpoint(quantize_model(*ck.full), opts.out_checkpoint);
  std::cout << "wrote quantized checkpoint " << opts.out_checkpoint.string() << "\n";
  return 0;
}

namespace {

std::vector<int> prompt_to_ids(const std::string& prompt, std::size_t vocab_size) {
  std::vector<int> ids;
  ids.reserve(prompt.size());
  for (unsigned char b : prompt) {
    if (static_cast<std::size_t>(b) >= vocab_size) {
      throw std::runtime_error("prompt byte " + std::to_string(static_cast<int>(b)) +
                               " is outside the model vocab of " + std::to_string(vocab_size));
    }
    ids.push_back(static_cast<int>(b));
  }
  if (ids.empty()) throw std::runtime_error("prompt must not be empty");
  return ids;
}

std::size_t argmax_row(const RealMatrix& logits, std::size_t row) {
  const double* r = logits.data.data() + row * logits.cols;
  std::size_t best = 0;
  for (std::size_t v = 1; v < logits.cols; ++v) {
    if (r[v] > r[best]) best = v;
  }
  return best;
}

}  // namespace

int cmd_infer(const InferOpts& opts, const GlobalOpts& g) {
  apply_globals(g);
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  const KernelKind kind = parse_kernel(opts.kernel);
  if (ck.mode == CheckpointMode::full && kind != KernelKind::float_ref) {
    throw std::runtime_error("the " + opts.kernel +
                             " kernel needs packed weights; run the quantize command first or "
                             "use --kernel float");
  }
  const ModelConfig& cfg = ck.config;
  std::vector<int> ids = prompt_to_ids(opts.prompt, cfg.vocab_size);

  const auto forward = [&](const std::vector<int>& context) {
    if (ck.mode == CheckpointMode::full) {
      return model_forward(context, *ck.full, Mode::full_precision);
    }
    return quantized_forward(context, *ck.quantized, kind);
  };

  std::ofstream dump;
  if (opts.dump_logits) {
    dump.open(*opts.dump_logits);
    if (!dump) throw std::runtime_error("cannot open " + opts.dump_logits->string());
    dump << "pos,token_id,logit\n" << std::setprecision(17);
  }

  for (std::size_t step = 0; step < opts.n_tokens; ++step) {
    // No KV cache: recompute over the trailing max_seq window.
    const std::size_t start = ids.size() > cfg.max_seq ? ids.size() - cfg.max_seq : 0;
    const std::vector<int> context(ids.begin() + static_cast<std::ptrdiff_t>(start), ids.end());
    const RealMatrix logits = forward(context);
    const std::size_t last = logits.rows - 1;
    if (dump.is_open()) {
      for (std::size_t v = 0; v < logits.cols; ++v) {
        dump << ids.size() << ',' << v << ',' << logits.at(last, v) << '\n';
      }
    }
    ids.push_back(static_cast<int>(argmax_row(logits, last)));
  }

  std::string text;
  text.reserve(ids.size());
  for (int id : ids) text.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  if (opts.out_text) {
    std::ofstream out(*opts.out_text, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + opts.out_text->string());
    out << text;
  }
  std::cout << text << "\n";
  return 0;
}

int cmd_bench(const BenchOpts& opts, const GlobalOpts& g) {
  apply_globals(g);
  std::vector<BenchPath> paths;
  for (const std::string& p : opts.paths) {
    if (p == "float_ref") paths.push_back(BenchPath::float_ref);
    else if (p == "multfree") paths.push_back(BenchPath::multfree);
    else if (p == "lut") paths.push_back(BenchPath::lut);
    else throw std::runtime_error("unknown bench path '" + p + "'");
  }

  std::vector<BenchRow> rows;
  std::stringstream sizes(opts.sizes);
  std::string triple;
  while (std::getline(sizes, triple, ',')) {
    std::size_t m = 0, k = 0, n = 0;
    char x1 = 0, x2 = 0;
    std::istringstream ts(triple);
    if (!(ts >> m >> x1 >> k >> x2 >> n) || x1 != 'x' || x2 != 'x') {
      throw std::runtime_error("bad size spec '" + triple + "' (expected MxKxN)");
    }
    const std::uint64_t seed = g.seed ? *g.seed : 0;
    for (BenchRow& r : run_bench(m, k, n, opts.reps, paths, seed)) rows.push_back(std::move(r));
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (opts.out) {
    file.open(*opts.out);
    if (!file) throw std::runtime_error("cannot open " + opts.out->string());
    out = &file;
  }
  if (opts.format == "csv") {
    *out << "path,m,k,n,reps,ns_per_call,weight_bytes\n";
    for (const BenchRow& r : rows) {
      *out << r.path << ',' << r.m << ',' << r.k << ',' << r.n << ',' << r.reps << ','
           << r.ns_per_call << ',' << r.weight_bytes << '\n';
    }
  } else if (opts.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const BenchRow& r : rows) {
      j.push_back({{"path", r.path},
                   {"m", r.m},
                   {"k", r.k},
                   {"n", r.n},
                   {"reps", r.reps},
                   {"ns_per_call", r.ns_per_call},
                   {"weight_bytes", r.weight_bytes},
                   {"adds_estimate", r.adds_estimate}});
    }
    *out << j.dump(2) << "\n";
  } else {
    throw std::runtime_error("unknown format '" + opts.format + "' (expected csv or json)");
  }
  return 0;
}

int cmd_analyze(const AnalyzeOpts& opts, const GlobalOpts& g) {
  apply_globals(g);
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  if (ck.mode != CheckpointMode::quantized) {
    throw std::runtime_error(
        "checkpoint " + opts.checkpoint.string() +
        " holds full-precision weights; codebook histograms need packed 2-bit weights — run the "
        "quantize command first");
  }
  const QuantizedModel& m = *ck.quantized;

  nlohmann::json tensors = nlohmann::json::array();
  std::array<std::uint64_t, 4> overall{};
  std::uint64_t overall_total = 0;
  const auto add_tensor = [&](const std::string& name, std::size_t layer,
                              const PackedQuantTensor& p) {
    const CodebookHistogram h = codebook_histogram(p);
    for (std::size_t i = 0; i < 4; ++i) overall[i] += h.counts[i];
    overall_total += h.total;
    tensors.push_back({{"name", name},
                       {"layer", layer},
                       {"rows", p.rows},
                       {"cols", p.cols},
                       {"codebook_counts", h.counts},
                       {"codebook_freqs", h.freqs},
                       {"l2_norm", dequantized_l2_norm(p)}});
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const QuantizedLayer& lw = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    add_tensor(p + "wq", l, lw.wq);
    add_tensor(p + "wk", l, lw.wk);
    add_tensor(p + "wv", l, lw.wv);
    add_tensor(p + "wo", l, lw.wo);
    add_tensor(p + "w_up", l, lw.w_up);
    add_tensor(p + "w_gate", l, lw.w_gate);
    add_tensor(p + "w_down", l, lw.w_down);
  }

  nlohmann::json doc;
  doc["codeword_order"] = {"+1", "+i", "-1", "-i"};
  doc["tensors"] = tensors;
  std::array<double, 4> overall_freqs{};
  for (std::size_t i = 0; i < 4; ++i) {
    overall_freqs[i] = static_cast<double>(overall[i]) / static_cast<double>(overall_total);
  }
  doc["summary"] = {{"total_weights", overall_total},
                    {"codebook_counts", overall},
                    {"codebook_freqs", overall_freqs}};

  std::ofstream json_out(opts.out_json);
  if (!json_out) throw std::runtime_error("cannot open " + opts.out_json.string());
  json_out << doc.dump(2) << "\n";

  std::ofstream emb_out(opts.embeddings_csv);
  if (!emb_out) throw std::runtime_error("cannot open " + opts.embeddings_csv.string());
  export_embeddings_csv(m.embed, emb_out);

  std::cout << "wrote " << opts.out_json.string() << " and " << opts.embeddings_csv.string()
            << "\n";
  return 0;
}

}  // namespace phasor::cli
