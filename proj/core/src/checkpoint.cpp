#include "phasor/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

namespace phasor {

namespace {

constexpr char kMagic[4] = {'I', 'F', 'R', 'Y'};

enum class TensorKind : std::uint8_t { real_fp = 0, complex_fp = 1, packed_q2 = 2 };

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* field) const {
    if (pos + n > buf.size()) {
      throw std::runtime_error(std::string("checkpoint truncated while reading ") + field);
    }
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return buf[pos++];
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
};

struct DirEntry {
  std::string name;
  TensorKind kind = TensorKind::real_fp;
  std::vector<std::uint64_t> dims;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

std::uint64_t expected_payload_length(const DirEntry& e) {
  std::uint64_t numel = 1;
  for (std::uint64_t d : e.dims) numel *= d;
  switch (e.kind) {
    case TensorKind::real_fp: return numel * 4;
    case TensorKind::complex_fp: return numel * 8;
    case TensorKind::packed_q2: {
      if (e.dims.size() != 2) {
        throw std::runtime_error("checkpoint: packed_q2 tensor '" + e.name + "' must be 2-D");
      }
      return 8 + e.dims[0] * ((e.dims[1] + 3) / 4);
    }
  }
  throw std::runtime_error("checkpoint: unknown tensor kind for '" + e.name + "'");
}

std::vector<std::uint8_t> encode_real_fp(const ComplexTensor& t) {
  // Complex [rows×d] laid out as a real [rows×2d] matrix, each row its
  // re half then its im half.
  std::vector<std::uint8_t> out;
  const std::size_t rows = t.shape[0], d = t.shape[1];
  out.reserve(rows * d * 8);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) put_f32(out, static_cast<float>(t.re[r * d + j]));
    for (std::size_t j = 0; j < d; ++j) put_f32(out, static_cast<float>(t.im[r * d + j]));
  }
  return out;
}

std::vector<std::uint8_t> encode_complex_fp(const ComplexTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(t.numel() * 8);
  for (double v : t.re) put_f32(out, static_cast<float>(v));
  for (double v : t.im) put_f32(out, static_cast<float>(v));
  return out;
}

std::vector<std::uint8_t> encode_packed(const PackedQuantTensor& p) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + p.codes.size());
  put_f32(out, p.dequant_re);
  put_f32(out, p.dequant_im);
  out.insert(out.end(), p.codes.begin(), p.codes.end());
  return out;
}

struct PendingTensor {
  DirEntry entry;
  std::vector<std::uint8_t> payload;
};

class Writer {
 public:
  void add(std::string name, TensorKind kind, std::vector<std::uint64_t> dims,
           std::vector<std::uint8_t> payload) {
    PendingTensor t;
    t.entry.name = std::move(name);
    t.entry.kind = kind;
    t.entry.dims = std::move(dims);
    t.entry.length = payload.size();
    t.payload = std::move(payload);
    tensors_.push_back(std::move(t));
  }

  void write(const ModelConfig& cfg, CheckpointMode mode, const std::filesystem::path& path) {
    std::vector<std::uint8_t> head;
    head.insert(head.end(), kMagic, kMagic + 4);
    put_u32(head, kCheckpointVersion);
    put_u32(head, static_cast<std::uint32_t>(cfg.vocab_size));
    put_u32(head, static_cast<std::uint32_t>(cfg.d_model));
    put_u32(head, static_cast<std::uint32_t>(cfg.n_heads));
    put_u32(head, static_cast<std::uint32_t>(cfg.d_head));
    put_u32(head, static_cast<std::uint32_t>(cfg.d_ffn));
    put_u32(head, static_cast<std::uint32_t>(cfg.n_layers));
    put_u32(head, static_cast<std::uint32_t>(cfg.max_seq));
    put_u32(head, static_cast<std::uint32_t>(cfg.attn_scale_dim));
    put_f64(head, cfg.rope_base);
    put_f64(head, cfg.norm_eps);
    head.push_back(static_cast<std::uint8_t>(mode));

    // Directory size is known up front, so offsets can be absolute.
    std::size_t dir_size = 4;
    for (const PendingTensor& t : tensors_) {
      dir_size += 4 + t.entry.name.size() + 1 + 1 + 8 * t.entry.dims.size() + 8 + 8;
    }
    std::uint64_t offset = head.size() + dir_size;

    put_u32(head, static_cast<std::uint32_t>(tensors_.size()));
    for (PendingTensor& t : tensors_) {
      t.entry.offset = offset;
      offset += t.entry.length;
      put_u32(head, static_cast<std::uint32_t>(t.entry.name.size()));
      head.insert(head.end(), t.entry.name.begin(), t.entry.name.end());
      head.push_back(static_cast<std::uint8_t>(t.entry.kind));
      head.push_back(static_cast<std::uint8_t>(t.entry.dims.size()));
      for (std::uint64_t d : t.entry.dims) put_u64(head, d);
      put_u64(head, t.entry.offset);
      put_u64(head, t.entry.length);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
    for (const PendingTensor& t : tensors_) {
      out.write(reinterpret_cast<const char*>(t.payload.data()),
                static_cast<std::streamsize>(t.payload.size()));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
  }

 private:
  std::vector<PendingTensor> tensors_;
};

void add_common(Writer& w, const ModelConfig& cfg, const ComplexTensor& embed,
                const ComplexTensor& final_norm, const ComplexTensor& lm_head) {
  w.add("embed", TensorKind::complex_fp, {cfg.vocab_size, cfg.d_model}, encode_complex_fp(embed));
  w.add("final_norm", TensorKind::complex_fp, {cfg.d_model}, encode_complex_fp(final_norm));
  w.add("lm_head", TensorKind::real_fp, {cfg.vocab_size, 2 * cfg.d_model},
        encode_real_fp(lm_head));
}

}  // namespace

void save_checkpoint(const Model& m, CheckpointMode mode, const std::filesystem::path& path) {
  if (mode == CheckpointMode::quantized) {
    save_checkpoint(quantize_model(m), path);
    return;
  }
  m.config.validate();
  Writer w;
  add_common(w, m.config, m.embed, m.final_norm_gain, m.lm_head);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const LayerWeights& lw = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    w.add(p + "attn_norm", TensorKind::complex_fp, {m.config.d_model},
          encode_complex_fp(lw.attn_norm_gain));
    w.add(p + "ffn_norm", TensorKind::complex_fp, {m.config.d_model},
          encode_complex_fp(lw.ffn_norm_gain));
    for (const auto& [name, t] :
         std::initializer_list<std::pair<const char*, const ComplexTensor*>>{
             {"wq", &lw.wq}, {"wk", &lw.wk}, {"wv", &lw.wv}, {"wo", &lw.wo},
             {"w_up", &lw.w_up}, {"w_gate", &lw.w_gate}, {"w_down", &lw.w_down}}) {
      w.add(p + name, TensorKind::complex_fp, {t->shape[0], t->shape[1]}, encode_complex_fp(*t));
    }
  }
  w.write(m.config, CheckpointMode::full, path);
}

void save_checkpoint(const QuantizedModel& m, const std::filesystem::path& path) {
  m.config.validate();
  Writer w;
  add_common(w, m.config, m.embed, m.final_norm_gain, m.lm_head);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const QuantizedLayer& lw = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    w.add(p + "attn_norm", TensorKind::complex_fp, {m.config.d_model},
          encode_complex_fp(lw.attn_norm_gain));
    w.add(p + "ffn_norm", TensorKind::complex_fp, {m.config.d_model},
          encode_complex_fp(lw.ffn_norm_gain));
    for (const auto& [name, t] :
         std::initializer_list<std::pair<const char*, const PackedQuantTensor*>>{
             {"wq", &lw.wq}, {"wk", &lw.wk}, {"wv", &lw.wv}, {"wo", &lw.wo},
             {"w_up", &lw.w_up}, {"w_gate", &lw.w_gate}, {"w_down", &lw.w_down}}) {
      w.add(p + name, TensorKind::packed_q2, {t->rows, t->cols}, encode_packed(*t));
    }
  }
  w.write(m.config, CheckpointMode::quantized, path);
}

namespace {

class Loader {
 public:
  explicit Loader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  Checkpoint load() {
    Reader r{buf_};
    const std::string magic = r.str(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
      throw std::runtime_error("checkpoint " + path_.string() + ": bad magic '" + magic + "'");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
      throw std::runtime_error("checkpoint " + path_.string() + ": unsupported version " +
                               std::to_string(version) + " (expected " +
                               std::to_string(kCheckpointVersion) + ")");
    }
    ModelConfig cfg;
    cfg.vocab_size = r.u32("config.vocab_size");
    cfg.d_model = r.u32("config.d_model");
    cfg.n_heads = r.u32("config.n_heads");
    cfg.d_head = r.u32("config.d_head");
    cfg.d_ffn = r.u32("config.d_ffn");
    cfg.n_layers = r.u32("config.n_layers");
    cfg.max_seq = r.u32("config.max_seq");
    cfg.attn_scale_dim = r.u32("config.attn_scale_dim");
    cfg.rope_base = r.f64("config.rope_base");
    cfg.norm_eps = r.f64("config.norm_eps");
    cfg.validate();
    const std::uint8_t mode_byte = r.u8("config.mode");
    if (mode_byte > 1) {
      throw std::runtime_error("checkpoint: bad mode byte " + std::to_string(mode_byte));
    }
    const auto mode = static_cast<CheckpointMode>(mode_byte);

    const std::uint32_t count = r.u32("tensor_count");
    for (std::uint32_t i = 0; i < count; ++i) {
      DirEntry e;
      const std::uint32_t name_len = r.u32("tensor name length");
      e.name = r.str(name_len, "tensor name");
      const std::uint8_t kind = r.u8("tensor kind");
      if (kind > 2) {
        throw std::runtime_error("checkpoint: unknown tensor kind for '" + e.name + "'");
      }
      e.kind = static_cast<TensorKind>(kind);
      const std::uint8_t ndim = r.u8("tensor rank");
      for (std::uint8_t d = 0; d < ndim; ++d) e.dims.push_back(r.u64("tensor dim"));
      e.offset = r.u64("tensor offset");
      e.length = r.u64("tensor length");
      if (e.offset < r.pos || e.offset + e.length > buf_.size()) {
        throw std::runtime_error("checkpoint: tensor '" + e.name + "' payload outside file");
      }
      if (e.length != expected_payload_length(e)) {
        throw std::runtime_error("checkpoint: tensor '" + e.name + "' length " +
                                 std::to_string(e.length) + " does not match its shape");
      }
      if (!entries_.emplace(e.name, e).second) {
        throw std::runtime_error("checkpoint: duplicate tensor '" + e.name + "'");
      }
    }
    check_no_overlap();

    Checkpoint ck;
    ck.mode = mode;
    ck.config = cfg;
    if (mode == CheckpointMode::full) {
      Model m;
      m.config = cfg;
      m.embed = complex_fp("embed", {cfg.vocab_size, cfg.d_model});
      m.final_norm_gain = complex_fp("final_norm", {cfg.d_model});
      m.lm_head = real_fp_as_complex("lm_head", cfg.vocab_size, cfg.d_model);
      m.layers.resize(cfg.n_layers);
      for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        LayerWeights& lw = m.layers[l];
        lw.attn_norm_gain = complex_fp(p + "attn_norm", {cfg.d_model});
        lw.ffn_norm_gain = complex_fp(p + "ffn_norm", {cfg.d_model});
        lw.wq = complex_fp(p + "wq", {cfg.d_model, cfg.d_model});
        lw.wk = complex_fp(p + "wk", {cfg.d_model, cfg.d_model});
        lw.wv = complex_fp(p + "wv", {cfg.d_model, cfg.d_model});
        lw.wo = complex_fp(p + "wo", {cfg.d_model, cfg.d_model});
        lw.w_up = complex_fp(p + "w_up", {cfg.d_model, cfg.d_ffn});
        lw.w_gate = complex_fp(p + "w_gate", {cfg.d_model, cfg.d_ffn});
        lw.w_down = complex_fp(p + "w_down", {cfg.d_ffn, cfg.d_model});
      }
      ck.full = std::move(m);
    } else {
      QuantizedModel m;
      m.config = cfg;
      m.embed = complex_fp("embed", {cfg.vocab_size, cfg.d_model});
      m.final_norm_gain = complex_fp("final_norm", {cfg.d_model});
      m.lm_head = real_fp_as_complex("lm_head", cfg.vocab_size, cfg.d_model);
      m.layers.resize(cfg.n_layers);
      for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        QuantizedLayer& lw = m.layers[l];
        lw.attn_norm_gain = complex_fp(p + "attn_norm", {cfg.d_model});
        lw.ffn_norm_gain = complex_fp(p + "ffn_norm", {cfg.d_model});
        lw.wq = packed(p + "wq", cfg.d_model, cfg.d_model);
        lw.wk = packed(p + "wk", cfg.d_model, cfg.d_model);
        lw.wv = packed(p + "wv", cfg.d_model, cfg.d_model);
        lw.wo = packed(p + "wo", cfg.d_model, cfg.d_model);
        lw.w_up = packed(p + "w_up", cfg.d_ffn, cfg.d_model);
        lw.w_gate = packed(p + "w_gate", cfg.d_ffn, cfg.d_model);
        lw.w_down = packed(p + "w_down", cfg.d_model, cfg.d_ffn);
      }
      ck.quantized = std::move(m);
    }
    return ck;
  }

 private:
  const DirEntry& find(const std::string& name, TensorKind kind,
                       const std::vector<std::uint64_t>& dims) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    }
    const DirEntry& e = it->second;
    if (e.kind != kind) throw std::runtime_error("checkpoint: tensor '" + name + "' has wrong kind");
    if (e.dims != dims) {
      throw std::runtime_error("checkpoint: tensor '" + name + "' has unexpected shape");
    }
    return e;
  }

  float read_f32_at(std::size_t pos) const {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos + i]) << (8 * i);
    return std::bit_cast<float>(v);
  }

  ComplexTensor complex_fp(const std::string& name, std::vector<std::size_t> shape) const {
    std::vector<std::uint64_t> dims(shape.begin(), shape.end());
    const DirEntry& e = find(name, TensorKind::complex_fp, dims);
    ComplexTensor t(shape);
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i) t.re[i] = read_f32_at(e.offset + 4 * i);
    for (std::size_t i = 0; i < n; ++i) t.im[i] = read_f32_at(e.offset + 4 * (n + i));
    return t;
  }

  // A real [rows×2d] matrix decoded back into the complex [rows×d] form.
  ComplexTensor real_fp_as_complex(const std::string& name, std::size_t rows,
                                   std::size_t d) const {
    const DirEntry& e = find(name, TensorKind::real_fp, {rows, 2 * d});
    ComplexTensor t({rows, d});
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t row_off = e.offset + 4 * (r * 2 * d);
      for (std::size_t j = 0; j < d; ++j) {
        t.re[r * d + j] = read_f32_at(row_off + 4 * j);
        t.im[r * d + j] = read_f32_at(row_off + 4 * (d + j));
      }
    }
    return t;
  }

  PackedQuantTensor packed(const std::string& name, std::size_t rows, std::size_t cols) const {
    const DirEntry& e = find(name, TensorKind::packed_q2, {rows, cols});
    PackedQuantTensor p(rows, cols);
    p.dequant_re = read_f32_at(e.offset);
    p.dequant_im = read_f32_at(e.offset + 4);
    if (!(p.dequant_re > 0.0f) || !(p.dequant_im > 0.0f)) {
      throw std::runtime_error("checkpoint: tensor '" + name + "' has non-positive dequant scale");
    }
    std::copy(buf_.begin() + static_cast<std::ptrdiff_t>(e.offset + 8),
              buf_.begin() + static_cast<std::ptrdiff_t>(e.offset + e.length), p.codes.begin());
    return p;
  }

  void check_no_overlap() const {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    spans.reserve(entries_.size());
    for (const auto& [name, e] : entries_) spans.emplace_back(e.offset, e.length);
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
        throw std::runtime_error("checkpoint: overlapping tensor payloads");
      }
    }
  }

  std::filesystem::path path_;
  std::vector<std::uint8_t> buf_;
  std::map<std::string, DirEntry> entries_;
};

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return Loader(path).load(); }

}  // namespace phasor
