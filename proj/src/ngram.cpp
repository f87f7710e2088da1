#include "hostpred/ngram.hpp"

#include <algorithm>
#include <map>

#include "hostpred/error.hpp"
#include "io_util.hpp"

namespace hostpred::ngram {

void check_gram(int n) {
  if (n < kMinGram || n > kMaxGram) {
    throw Error(ErrorKind::unsupported_gram,
                "n-gram size must be in [3, 5], got " + std::to_string(n));
  }
}

std::vector<std::string> tokenize_ngrams(std::string_view residues, int n) {
  check_gram(n);
  const auto width = static_cast<std::size_t>(n);
  if (residues.size() < width) {
    throw Error(ErrorKind::sequence_too_short, "sequence of length " +
                                                   std::to_string(residues.size()) +
                                                   " is shorter than n = " + std::to_string(n));
  }
  std::vector<std::string> tokens;
  tokens.reserve(residues.size() - width + 1);
  for (std::size_t k = 0; k + width <= residues.size(); ++k) {
    tokens.emplace_back(residues.substr(k, width));
  }
  return tokens;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  static const std::string pad = "<pad>";
  static const std::string unk = "<unk>";
  if (id == kPad) return pad;
  if (id == kUnk || id - 2 >= tokens_.size()) return unk;
  return tokens_[id - 2];
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

TokenId Vocabulary::add(std::string token) {
  if (static_cast<int>(token.size()) != n_) {
    throw Error(ErrorKind::invalid_argument,
                "token '" + token + "' does not have length " + std::to_string(n_));
  }
  const auto id = static_cast<TokenId>(tokens_.size() + 2);
  if (!ids_.emplace(token, id).second) {
    throw Error(ErrorKind::invalid_argument, "duplicate vocabulary token '" + token + "'");
  }
  tokens_.push_back(std::move(token));
  return id;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int n) {
  check_gram(n);
  std::map<std::string, std::size_t> counts;  // ordered: lexicographic tiebreak
  for (const auto& sentence : corpus) {
    for (const auto& token : sentence) ++counts[token];
  }
  if (counts.empty()) throw Error(ErrorKind::empty_corpus, "cannot build a vocabulary from no tokens");

  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab(n);
  for (auto& [token, count] : ordered) vocab.add(token);
  return vocab;
}

std::string format_vocab(const Vocabulary& vocab) {
  std::string out;
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const auto id = static_cast<TokenId>(k + 2);
    out += vocab.token_of(id);
    out += '\t';
    out += std::to_string(id);
    out += '\n';
  }
  return out;
}

Vocabulary parse_vocab(std::string_view text) {
  Vocabulary vocab;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split(line, '\t');
    std::size_t id = 0;
    if (fields.size() != 2 || !detail::parse_size(fields[1], id)) {
      throw Error(ErrorKind::malformed_dataset,
                  "vocabulary line " + std::to_string(line_no) + ": expected token<TAB>id");
    }
    if (vocab.n() == 0) {
      check_gram(static_cast<int>(fields[0].size()));
      vocab = Vocabulary(static_cast<int>(fields[0].size()));
    }
    if (id != vocab.size() + 2) {
      throw Error(ErrorKind::malformed_dataset,
                  "vocabulary line " + std::to_string(line_no) + ": ids must be contiguous from 2");
    }
    vocab.add(std::string(fields[0]));
  }
  if (vocab.n() == 0) throw Error(ErrorKind::empty_corpus, "vocabulary file is empty");
  return vocab;
}

void write_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  detail::write_file(path, format_vocab(vocab));
}

Vocabulary read_vocab(const std::filesystem::path& path) {
  return parse_vocab(detail::read_file(path));
}

EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  EncodedSentence s;
  s.ids.reserve(tokens.size());
  for (const auto& t : tokens) s.ids.push_back(vocab.id_of(t));
  s.original_length = s.ids.size();
  return s;
}

std::size_t target_length(const std::vector<EncodedSentence>& sentences) {
  if (sentences.empty()) throw Error(ErrorKind::empty_input, "no sentences to take a length mode from");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& s : sentences) ++counts[s.original_length];
  std::size_t best = 0;
  std::size_t best_count = 0;
  for (auto [length, count] : counts) {  // ascending length: strict > keeps the smaller
    if (count > best_count) {
      best = length;
      best_count = count;
    }
  }
  return best;
}

EncodedSentence pad_or_truncate(const EncodedSentence& s, std::size_t target) {
  EncodedSentence out;
  out.original_length = s.original_length;
  if (s.ids.size() >= target) {
    out.ids.assign(s.ids.end() - static_cast<std::ptrdiff_t>(target), s.ids.end());
  } else {
    out.ids.assign(target - s.ids.size(), kPad);
    out.ids.insert(out.ids.end(), s.ids.begin(), s.ids.end());
  }
  return out;
}

}  // namespace hostpred::ngram
