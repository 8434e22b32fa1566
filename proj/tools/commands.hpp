#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phasor::cli {

struct GlobalOpts {
  std::optional<std::uint64_t> seed;  // overrides the config seed when set
  int threads = 1;
  bool deterministic = false;  // forces single-threaded execution
};

struct TrainOpts {
  std::filesystem::path config;
  std::filesystem::path corpus;
  std::filesystem::path out_checkpoint;
  std::filesystem::path loss_csv;
  std::optional<std::filesystem::path> vocab;
  std::string mode = "qat";
  std::string save = "full";  // checkpoint mode: full | quantized
};
int cmd_train(const TrainOpts& opts, const GlobalOpts& g);

struct QuantizeOpts {
  std::filesystem::path in_checkpoint;
  std::filesystem::path out_checkpoint;
};
int cmd_quantize(const QuantizeOpts& opts, const GlobalOpts& g);

struct InferOpts {
  std::filesystem::path checkpoint;
  std::string prompt;
  std::size_t n_tokens = 0;
  std::string kernel = "lut";  // float | multfree | lut
  std::optional<std::filesystem::path> out_text;
  std::optional<std::filesystem::path> dump_logits;
};
int cmd_infer(const InferOpts& opts, const GlobalOpts& g);

struct BenchOpts {
  std::string sizes = "32x256x256";  // comma-separated MxKxN triples
  std::size_t reps = 10;
  std::vector<std::string> paths = {"float_ref", "multfree", "lut"};
  std::string format = "csv";  // csv | json
  std::optional<std::filesystem::path> out;
};
int cmd_bench(const BenchOpts& opts, const GlobalOpts& g);

struct AnalyzeOpts {
  std::filesystem::path checkpoint;
  std::filesystem::path out_json = "analysis.json";
  std::filesystem::path embeddings_csv = "embeddings.csv";
};
int cmd_analyze(const AnalyzeOpts& opts, const GlobalOpts& g);

}  // namespace phasor::cli
