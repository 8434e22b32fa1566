#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "phasor/model.hpp"

namespace phasor {

// Single-file checkpoint container. Little-endian throughout.
//
//   magic "IFRY" | version u32 | config record | directory | payloads
//
// Config record: vocab_size, d_model, n_heads, d_head, d_ffn, n_layers,
// max_seq, attn_scale_dim (u32 each), rope_base f64, norm_eps f64,
// mode u8. Directory: count u32, then per tensor: name (u32 length +
// bytes), kind u8 (0 real_fp, 1 complex_fp, 2 packed_q2), ndim u8,
// dims u64 each, absolute byte offset u64, byte length u64.
//
// Payloads: real_fp is row-major 32-bit IEEE-754; complex_fp is the re
// plane then the im plane; packed_q2 is dequant_re f32, dequant_im f32,
// then the PackedQuantTensor code bytes (rows·ceil(cols/4)).
enum class CheckpointMode : std::uint8_t { full = 0, quantized = 1 };

constexpr std::uint32_t kCheckpointVersion = 1;

// In quantized mode the seven per-layer projections are packed to 2-bit
// codes; embeddings, norm gains, and the LM head stay full precision.
void save_checkpoint(const Model& m, CheckpointMode mode, const std::filesystem::path& path);
void save_checkpoint(const QuantizedModel& m, const std::filesystem::path& path);

struct Checkpoint {
  CheckpointMode mode = CheckpointMode::full;
  ModelConfig config;
  std::optional<Model> full;
  std::optional<QuantizedModel> quantized;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace phasor
