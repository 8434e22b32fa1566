#include "phasor/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phasor {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string unescape(const std::string& line) {
  std::string out;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '\\' || i + 1 == line.size()) {
      out.push_back(line[i]);
      continue;
    }
    const char c = line[++i];
    switch (c) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '\\': out.push_back('\\'); break;
      case 'x': {
        if (i + 2 >= line.size()) throw std::runtime_error("vocab file: truncated \\x escape");
        const int hi = hex_digit(line[i + 1]);
        const int lo = hex_digit(line[i + 2]);
        if (hi < 0 || lo < 0) throw std::runtime_error("vocab file: bad \\x escape");
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        break;
      }
      default: throw std::runtime_error(std::string("vocab file: unknown escape \\") + c);
    }
  }
  return out;
}

}  // namespace

Corpus tokenize_bytes(const std::string& text) {
  Corpus c;
  c.vocab_size = 256;
  c.tokens.reserve(text.size());
  for (unsigned char byte : text) c.tokens.push_back(static_cast<int>(byte));
  return c;
}

std::vector<std::string> load_vocab_file(const std::filesystem::path& vocab_path) {
  std::ifstream in(vocab_path);
  if (!in) throw std::runtime_error("cannot open vocab file: " + vocab_path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::string tok = unescape(line);
    if (tok.empty()) continue;
    tokens.push_back(tok);
  }
  return tokens;
}

Corpus tokenize_with_vocab(const std::string& text, const std::vector<std::string>& extra_tokens) {
  // Longer tokens take priority; ids follow the file order on top of the
  // 256 byte ids.
  std::vector<std::pair<std::string, int>> by_length;
  by_length.reserve(extra_tokens.size());
  for (std::size_t i = 0; i < extra_tokens.size(); ++i) {
    by_length.emplace_back(extra_tokens[i], static_cast<int>(256 + i));
  }
  std::stable_sort(by_length.begin(), by_length.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  Corpus c;
  c.vocab_size = 256 + extra_tokens.size();
  std::size_t pos = 0;
  while (pos < text.size()) {
    int matched = -1;
    std::size_t len = 1;
    for (const auto& [tok, id] : by_length) {
      if (tok.size() <= text.size() - pos && text.compare(pos, tok.size(), tok) == 0) {
        matched = id;
        len = tok.size();
        break;
      }
    }
    if (matched >= 0) {
      c.tokens.push_back(matched);
    } else {
      c.tokens.push_back(static_cast<int>(static_cast<unsigned char>(text[pos])));
    }
    pos += len;
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& text_path) {
  return tokenize_bytes(read_file(text_path));
}

Corpus load_corpus(const std::filesystem::path& text_path,
                   const std::filesystem::path& vocab_path) {
  return tokenize_with_vocab(read_file(text_path), load_vocab_file(vocab_path));
}

}  // namespace phasor
