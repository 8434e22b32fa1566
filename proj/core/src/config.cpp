#include "phasor/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace phasor {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    const long long v = std::stoll(value, &idx);
    if (idx != value.size() || v < 0) throw std::invalid_argument("not a count");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': expected a nonnegative integer, got '" +
                             value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    const double v = std::stod(value, &idx);
    if (idx != value.size()) throw std::invalid_argument("not a number");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  bool d_head_set = false;

  using Handler = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Handler> handlers = {
      {"vocab_size", [&](auto& k, auto& v) { cfg.model.vocab_size = parse_count(k, v); }},
      {"d_model", [&](auto& k, auto& v) { cfg.model.d_model = parse_count(k, v); }},
      {"n_heads", [&](auto& k, auto& v) { cfg.model.n_heads = parse_count(k, v); }},
      {"d_head",
       [&](auto& k, auto& v) {
         cfg.model.d_head = parse_count(k, v);
         d_head_set = true;
       }},
      {"d_ffn", [&](auto& k, auto& v) { cfg.model.d_ffn = parse_count(k, v); }},
      {"n_layers", [&](auto& k, auto& v) { cfg.model.n_layers = parse_count(k, v); }},
      {"max_seq", [&](auto& k, auto& v) { cfg.model.max_seq = parse_count(k, v); }},
      {"rope_base", [&](auto& k, auto& v) { cfg.model.rope_base = parse_real(k, v); }},
      {"norm_eps", [&](auto& k, auto& v) { cfg.model.norm_eps = parse_real(k, v); }},
      {"attn_scale_dim", [&](auto& k, auto& v) { cfg.model.attn_scale_dim = parse_count(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { cfg.train.batch_size = parse_count(k, v); }},
      {"seq_len", [&](auto& k, auto& v) { cfg.train.seq_len = parse_count(k, v); }},
      {"peak_lr_stage1", [&](auto& k, auto& v) { cfg.train.peak_lr_stage1 = parse_real(k, v); }},
      {"peak_lr_stage2", [&](auto& k, auto& v) { cfg.train.peak_lr_stage2 = parse_real(k, v); }},
      {"warmup_steps", [&](auto& k, auto& v) { cfg.train.warmup_steps = parse_count(k, v); }},
      {"total_steps", [&](auto& k, auto& v) { cfg.train.total_steps = parse_count(k, v); }},
      {"weight_decay_stage1",
       [&](auto& k, auto& v) { cfg.train.weight_decay_stage1 = parse_real(k, v); }},
      {"weight_decay_stage2",
       [&](auto& k, auto& v) { cfg.train.weight_decay_stage2 = parse_real(k, v); }},
      {"clip_norm", [&](auto& k, auto& v) { cfg.train.clip_norm = parse_real(k, v); }},
      {"beta1", [&](auto& k, auto& v) { cfg.train.beta1 = parse_real(k, v); }},
      {"beta2", [&](auto& k, auto& v) { cfg.train.beta2 = parse_real(k, v); }},
      {"adam_eps", [&](auto& k, auto& v) { cfg.train.adam_eps = parse_real(k, v); }},
      {"rng_seed", [&](auto& k, auto& v) { cfg.train.rng_seed = parse_count(k, v); }},
      {"fp32_grad_accum",
       [&](auto& k, auto& v) { cfg.train.fp32_grad_accum = parse_count(k, v) != 0; }},
      {"step", [&](auto& k, auto& v) { cfg.train.start_step = parse_count(k, v); }},
      {"stage",
       [&](auto& k, auto& v) {
         const std::size_t s = parse_count(k, v);
         if (s != 1 && s != 2) throw std::runtime_error("config key 'stage': must be 1 or 2");
         cfg.train.start_stage = static_cast<int>(s);
       }},
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": unknown key '" + key +
                               "'");
    }
    it->second(key, value);
  }

  if (!d_head_set) {
    if (cfg.model.n_heads == 0 || cfg.model.d_model % cfg.model.n_heads != 0) {
      throw std::runtime_error("config: d_head omitted but d_model is not divisible by n_heads");
    }
    cfg.model.d_head = cfg.model.d_model / cfg.model.n_heads;
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace phasor
