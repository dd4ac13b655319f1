#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lyricnn/errors.hpp"

namespace lyricnn {

namespace detail {

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and are kept verbatim;
// only ASCII punctuation is stripped from token edges.
inline bool is_token_edge_char(unsigned char c) { return is_ascii_alnum(c) || c >= 0x80; }

}  // namespace detail

// Lowercases, splits on whitespace, strips leading/trailing ASCII punctuation
// from each token (internal characters such as apostrophes survive), and
// drops tokens that end up empty.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t begin = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == begin) continue;
    std::size_t lo = begin, hi = i;  // [lo, hi)
    while (lo < hi && !detail::is_token_edge_char(static_cast<unsigned char>(text[lo]))) ++lo;
    while (hi > lo && !detail::is_token_edge_char(static_cast<unsigned char>(text[hi - 1]))) --hi;
    if (lo == hi) continue;
    std::string token(text.substr(lo, hi - lo));
    for (char& c : token) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    tokens.push_back(std::move(token));
  }
  return tokens;
}

// Frequency-ordered token->id map with reserved PAD=0 and UNK=1 ids.
// Construction is deterministic: descending frequency, ties broken by
// ascending lexicographic order. The reserved surface forms "<pad>"/"<unk>"
// can never collide with real tokens because tokenize() strips '<' and '>'.
class Vocabulary {
 public:
  static constexpr std::uint32_t kPadId = 0;
  static constexpr std::uint32_t kUnkId = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t min_freq, std::size_t max_size) {
    if (min_freq < 1) throw ValidationError("build_vocab: min_freq must be >= 1");
    if (max_size < 3) throw ValidationError("build_vocab: max_size must be >= 3");
    if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");

    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& tokens : corpus) {
      for (const auto& token : tokens) ++freq[token];
    }
    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    std::vector<std::string> id_to_token = {kPadToken, kUnkToken};
    for (const auto& [token, count] : entries) {
      if (count < min_freq) break;
      if (id_to_token.size() >= max_size) break;
      id_to_token.push_back(token);
    }
    return Vocabulary(std::move(id_to_token));
  }

  // Rebuilds a vocabulary from an id-ordered token list (model files).
  static Vocabulary from_tokens(std::vector<std::string> id_to_token) {
    if (id_to_token.size() < 2 || id_to_token[0] != kPadToken || id_to_token[1] != kUnkToken)
      throw ValidationError("vocabulary: token list must start with reserved <pad>, <unk>");
    return Vocabulary(std::move(id_to_token));
  }

  std::uint32_t id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  const std::string& token(std::uint32_t id) const { return id_to_token_.at(id); }
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& id_to_token() const { return id_to_token_; }

  // {token: id} export, reserved tokens included.
  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (std::uint32_t i = 0; i < id_to_token_.size(); ++i) out[id_to_token_[i]] = i;
    return out;
  }

 private:
  explicit Vocabulary(std::vector<std::string> id_to_token) : id_to_token_(std::move(id_to_token)) {
    for (std::uint32_t i = 0; i < id_to_token_.size(); ++i) {
      auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], i);
      if (!inserted) throw ValidationError("vocabulary: duplicate token '" + id_to_token_[i] + "'");
    }
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::uint32_t> token_to_id_;
};

// Fixed-length token-id sequence; padding ids occupy a contiguous suffix.
using TokenSequence = std::vector<std::uint32_t>;

// Known tokens map to their ids, unknown to UNK; the sequence is truncated to
// the first seq_len tokens and right-padded with PAD.
inline TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                            std::size_t seq_len) {
  if (seq_len < 1) throw ValidationError("encode: sequence length must be >= 1");
  TokenSequence ids(seq_len, Vocabulary::kPadId);
  const std::size_t n = std::min(tokens.size(), seq_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

}  // namespace lyricnn
