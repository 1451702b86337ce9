#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "isarforge/errors.hpp"
#include "isarforge/term.hpp"

namespace isarforge {

// Reserved ids 0..8, in this order, always present.
inline constexpr std::array<const char*, 9> kReservedTokens = {
    "<PAD>", "<BOS>", "<EOS>", "<UNK>", "<SEP>", "<F2>", "<F3>", "<F4>", "<F5>"};

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kSepId = 4;
inline constexpr int kF2Id = 5;

inline bool is_reserved_token(const std::string& tok) {
  for (const char* r : kReservedTokens)
    if (tok == r) return true;
  return false;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* t : kReservedTokens) push(t);
  }

  /// Adds a token if absent; returns its id either way.
  int add(const std::string& tok) {
    auto it = token_to_id_.find(tok);
    if (it != token_to_id_.end()) return it->second;
    return push(tok);
  }

  int encode(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  std::vector<int> encode(const TokenSeq& toks) const {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(encode(t));
    return ids;
  }

  const std::string& decode(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

  bool contains(const std::string& tok) const { return token_to_id_.count(tok) != 0; }

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t size_without_reserved() const { return id_to_token_.size() - kReservedTokens.size(); }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// FNV-1a over the id-ordered token list; used to pair checkpoints with vocabularies.
  std::uint64_t hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& tok : id_to_token_) {
      for (char c : tok) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
      }
      h ^= '\n';
      h *= 1099511628211ull;
    }
    return h;
  }

  // Plain text, one token per line, line number = id (reserved tokens first).
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& tok : id_to_token_) out << tok << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      if (lineno < kReservedTokens.size()) {
        if (line != kReservedTokens[lineno])
          throw IoError(path + ": reserved token mismatch at line " + std::to_string(lineno));
      } else {
        v.add(line);
      }
      ++lineno;
    }
    if (lineno < kReservedTokens.size()) throw IoError(path + ": truncated vocabulary");
    return v;
  }

 private:
  int push(std::string tok) {
    int id = static_cast<int>(id_to_token_.size());
    token_to_id_.emplace(tok, id);
    id_to_token_.push_back(std::move(tok));
    return id;
  }

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Frequency-ordered vocabulary over the corpus (ids by descending count, then
/// lexicographic). Tokens with count < min_count are left out and encode as <UNK>.
inline Vocabulary build_vocab(const std::vector<TokenSeq>& corpus, int min_count = 1) {
  if (corpus.empty()) throw EmptyCorpus();
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& seq : corpus)
    for (const auto& tok : seq)
      if (!is_reserved_token(tok)) ++counts[tok];
  std::vector<std::pair<std::string, std::uint64_t>> entries(counts.begin(), counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, count] : entries)
    if (count >= static_cast<std::uint64_t>(min_count)) v.add(tok);
  return v;
}

}  // namespace isarforge
