#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace dgmn {

constexpr int kPadId = 0;
constexpr int kUnkId = 1;

// Token ids: 0 = PAD, 1 = UNK, real tokens from 2 on,
// ordered by count descending then lexicographic.
class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);  // returns existing or new id
  int lookup(const std::string& token) const;  // UNK if absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  // serialization: one token per line, line number = id - 2
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  std::uint64_t hash() const;  // FNV-1a over the token list

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// lowercase, punctuation separated into its own tokens, whitespace split
std::vector<std::string> tokenize(const std::string& text);

// pad with PAD on the right to the budget, or keep the last `budget` tokens
std::vector<int> encode_sequence(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab, int length_budget);

}  // namespace dgmn
