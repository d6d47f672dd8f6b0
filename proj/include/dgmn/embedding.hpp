#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dgmn/tensor.hpp"
#include "dgmn/vocab.hpp"

namespace dgmn {

struct embedding_format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared word embedding table; row 0 (PAD) is all zeros and stays zero
// under training updates (the optimizer re-zeros it after each step).
template <class T>
struct EmbeddingTable {
  Tensor<T> matrix;  // [|V|, d_emb]
  bool trainable = true;
  double coverage = 0.0;  // |found ∩ vocab| / |vocab − reserved|

  int dim() const { return matrix.shape()[1]; }
  int vocab_size() const { return matrix.shape()[0]; }

  void zero_pad_row() {
    std::fill_n(matrix.data().begin(), dim(), T(0));
  }
};

template <class T>
EmbeddingTable<T> init_embeddings(const Vocabulary& vocab, int d_emb, std::uint64_t seed,
                                  bool trainable = true) {
  EmbeddingTable<T> table;
  table.matrix = Tensor<T>::zeros({vocab.size(), d_emb}, trainable);
  table.trainable = trainable;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  auto& d = table.matrix.data();
  for (int r = 1; r < vocab.size(); ++r)  // PAD row stays zero
    for (int j = 0; j < d_emb; ++j) d[static_cast<std::size_t>(r) * d_emb + j] = static_cast<T>(dist(rng));
  return table;
}

// GloVe text format: one "token v1 v2 ... vD" line per vector. In-vocab
// tokens found in the file get their vectors; missing tokens keep their
// uniform [-0.1, 0.1] initialization; the PAD row is zeroed.
template <class T>
EmbeddingTable<T> load_pretrained(const std::string& path, const Vocabulary& vocab,
                                  int d_emb, std::uint64_t seed, bool trainable = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw embedding_format_error("cannot read embedding file " + path);
  EmbeddingTable<T> table = init_embeddings<T>(vocab, d_emb, seed, trainable);
  std::string line;
  std::size_t line_no = 0;
  long long found = 0;
  std::vector<bool> seen(static_cast<std::size_t>(vocab.size()), false);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string token;
    is >> token;
    std::vector<T> vec;
    double v;
    while (is >> v) vec.push_back(static_cast<T>(v));
    if (static_cast<int>(vec.size()) != d_emb)
      throw embedding_format_error("embedding file line " + std::to_string(line_no) + ": got " +
                                   std::to_string(vec.size()) + " values, expected " +
                                   std::to_string(d_emb));
    const int id = vocab.lookup(token);
    if (id == kUnkId && token != vocab.token(kUnkId)) continue;  // not in vocab
    if (id == kPadId) continue;
    if (!seen[static_cast<std::size_t>(id)]) {
      seen[static_cast<std::size_t>(id)] = true;
      if (id >= 2) ++found;
    }
    std::copy(vec.begin(), vec.end(),
              table.matrix.data().begin() + static_cast<std::ptrdiff_t>(id) * d_emb);
  }
  table.zero_pad_row();
  const int real = vocab.size() - 2;
  table.coverage = real > 0 ? static_cast<double>(found) / real : 0.0;
  return table;
}

}  // namespace dgmn
