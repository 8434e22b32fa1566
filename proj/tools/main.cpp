#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"2-bit complex-valued LLM toolkit: QAT training, phase quantization, "
               "multiplication-free inference, benchmarks and analysis"};
  app.require_subcommand(1);

  phasor::cli::GlobalOpts global;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "RNG seed (overrides the config value)");
  app.add_option("--threads", global.threads, "Worker threads for row-parallel kernels");
  app.add_flag("--deterministic", global.deterministic,
               "Force single-threaded, bit-reproducible execution");

  phasor::cli::TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a text corpus");
  train_cmd->add_option("--config", train.config, "Flat key=value config file")->required();
  train_cmd->add_option("--corpus", train.corpus, "Raw text corpus")->required();
  train_cmd->add_option("--out", train.out_checkpoint, "Output checkpoint path")->required();
  train_cmd->add_option("--loss-csv", train.loss_csv, "Per-step loss trace CSV")->required();
  train_cmd->add_option("--vocab", train.vocab, "Optional vocab file of extra multi-byte tokens");
  train_cmd->add_option("--mode", train.mode, "qat or full_precision")
      ->check(CLI::IsMember({"qat", "full_precision"}));
  train_cmd->add_option("--save", train.save, "Checkpoint form: full or quantized")
      ->check(CLI::IsMember({"full", "quantized"}));

  phasor::cli::QuantizeOpts quantize;
  auto* quant_cmd = app.add_subcommand("quantize", "Pack a full checkpoint to 2-bit weights");
  quant_cmd->add_option("input", quantize.in_checkpoint, "Full-precision checkpoint")->required();
  quant_cmd->add_option("output", quantize.out_checkpoint, "Quantized checkpoint")->required();

  phasor::cli::InferOpts infer;
  auto* infer_cmd = app.add_subcommand("infer", "Greedy decoding from a checkpoint");
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "Checkpoint path")->required();
  infer_cmd->add_option("--prompt", infer.prompt, "Prompt text")->required();
  infer_cmd->add_option("--tokens", infer.n_tokens, "Number of tokens to generate");
  infer_cmd->add_option("--kernel", infer.kernel, "float, multfree or lut")
      ->check(CLI::IsMember({"float", "multfree", "lut"}));
  infer_cmd->add_option("--out", infer.out_text, "Also write the output text to a file");
  infer_cmd->add_option("--dump-logits", infer.dump_logits,
                        "Write per-generated-token logits to a CSV");

  phasor::cli::BenchOpts bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time the GEMM paths");
  bench_cmd->add_option("--sizes", bench.sizes, "Comma-separated MxKxN triples");
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per path");
  bench_cmd->add_option("--paths", bench.paths, "Subset of float_ref, multfree, lut");
  bench_cmd->add_option("--format", bench.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  bench_cmd->add_option("--out", bench.out, "Write the report to a file instead of stdout");

  phasor::cli::AnalyzeOpts analyze;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Codebook histograms, layer norms and embedding export");
  analyze_cmd->add_option("checkpoint", analyze.checkpoint, "Quantized checkpoint")->required();
  analyze_cmd->add_option("--out", analyze.out_json, "Stats JSON path");
  analyze_cmd->add_option("--embeddings", analyze.embeddings_csv, "Embedding CSV path");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) global.seed = seed_value;

  try {
    if (*train_cmd) return phasor::cli::cmd_train(train, global);
    if (*quant_cmd) return phasor::cli::cmd_quantize(quantize, global);
    if (*infer_cmd) return phasor::cli::cmd_infer(infer, global);
    if (*bench_cmd) return phasor::cli::cmd_bench(bench, global);
    if (*analyze_cmd) return phasor::cli::cmd_analyze(analyze, global);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
