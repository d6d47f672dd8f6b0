#include "dgmn/vocab.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace dgmn {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_["<pad>"] = kPadId;
  token_to_id_["<unk>"] = kUnkId;
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  return id_to_token_.at(static_cast<std::size_t>(id));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("vocab: cannot write " + path);
  for (std::size_t i = 2; i < id_to_token_.size(); ++i) out << id_to_token_[i] << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("vocab: cannot read " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) v.add(line);
  }
  return v;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& t : id_to_token_) {
    for (char c : t) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 1099511628211ULL;
    }
    h ^= static_cast<std::uint8_t>('\n');
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::vector<int> encode_sequence(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab, int length_budget) {
  if (length_budget < 1) throw std::runtime_error("encode_sequence: budget must be >= 1");
  std::vector<int> ids(static_cast<std::size_t>(length_budget), kPadId);
  const std::size_t n = tokens.size();
  const std::size_t start = n > static_cast<std::size_t>(length_budget)
                                ? n - static_cast<std::size_t>(length_budget)
                                : 0;  // suffix truncation
  for (std::size_t i = start; i < n; ++i) ids[i - start] = vocab.lookup(tokens[i]);
  return ids;
}

}  // namespace dgmn
