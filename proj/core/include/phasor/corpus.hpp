#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phasor {

// Tokenized training data. Byte-level by default (vocab 256); an
// optional vocab file adds multi-byte tokens on top of the byte
// alphabet (ids 256+), applied greedily longest-match-first.
struct Corpus {
  std::vector<int> tokens;
  std::size_t vocab_size = 256;
};

Corpus load_corpus(const std::filesystem::path& text_path);
Corpus load_corpus(const std::filesystem::path& text_path,
                   const std::filesystem::path& vocab_path);

Corpus tokenize_bytes(const std::string& text);

// Vocab file: one token per line, raw bytes with \n, \t, \\ and \xHH
// escapes. Returned ids start at 256.
std::vector<std::string> load_vocab_file(const std::filesystem::path& vocab_path);
Corpus tokenize_with_vocab(const std::string& text, const std::vector<std::string>& extra_tokens);

}  // namespace phasor
