#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hostpred::ngram {

using TokenId = std::uint32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr int kMinGram = 3;
inline constexpr int kMaxGram = 5;

// Throws Error{unsupported_gram} unless kMinGram <= n <= kMaxGram.
void check_gram(int n);

// Overlapping windows: residues.size() - n + 1 tokens.
std::vector<std::string> tokenize_ngrams(std::string_view residues, int n);

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(int n) : n_(n) {}

  int n() const noexcept { return n_; }
  // Number of real tokens, excluding PAD and UNK.
  std::size_t size() const noexcept { return tokens_.size(); }
  // Embedding rows needed: size() + 2.
  std::size_t id_space() const noexcept { return tokens_.size() + 2; }

  // kUnk when absent.
  TokenId id_of(std::string_view token) const;
  const std::string& token_of(TokenId id) const;
  bool contains(std::string_view token) const;

  // Appends with the next free id; tokens must be new and of length n.
  TokenId add(std::string token);

 private:
  int n_ = 0;
  std::vector<std::string> tokens_;  // tokens_[k] has id k + 2
  std::unordered_map<std::string, TokenId> ids_;
};

// Ids 2, 3, ... by descending frequency, ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int n);

// "token<TAB>id" per line, sorted by id.
std::string format_vocab(const Vocabulary& vocab);
Vocabulary parse_vocab(std::string_view text);
void write_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary read_vocab(const std::filesystem::path& path);

struct EncodedSentence {
  std::vector<TokenId> ids;
  std::size_t original_length = 0;

  bool operator==(const EncodedSentence&) const = default;
};

EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// Mode of original_length, ties toward the smaller length.
std::size_t target_length(const std::vector<EncodedSentence>& sentences);

// Left-pads with kPad, or keeps the last `target` ids.
EncodedSentence pad_or_truncate(const EncodedSentence& s, std::size_t target);

}  // namespace hostpred::ngram
