#pragma once

// Attentive module: scaled dot-product attention plus a two-projection
// feed-forward block with residual connections and row-wise normalization,
// and the three self-encodings (utterances, document sentences, response).

#include <random>
#include <utility>
#include <vector>

#include "dgmn/data.hpp"
#include "dgmn/embedding.hpp"
#include "dgmn/tensor.hpp"
#include "dgmn/trace.hpp"

namespace dgmn {

template <class T>
struct AttentiveModuleParams {
  Tensor<T> ff1_weight;  // [d, d_ff]
  Tensor<T> ff1_bias;    // [d_ff]
  Tensor<T> ff2_weight;  // [d_ff, d]
  Tensor<T> ff2_bias;    // [d]
  Tensor<T> norm1_gain, norm1_bias;  // [d_ff]
  Tensor<T> norm2_gain, norm2_bias;  // [d]
};

template <class T>
Tensor<T> glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor<T> t = Tensor<T>::zeros({rows, cols}, true);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
Tensor<T> const_vector(int n, T v, bool requires_grad = true) {
  Tensor<T> t = Tensor<T>::zeros({n}, requires_grad);
  std::fill(t.data().begin(), t.data().end(), v);
  return t;
}

template <class T>
AttentiveModuleParams<T> init_attentive_params(int d, int d_ff, std::mt19937_64& rng) {
  AttentiveModuleParams<T> p;
  p.ff1_weight = glorot_uniform<T>(d, d_ff, rng);
  p.ff1_bias = const_vector<T>(d_ff, T(0));
  p.ff2_weight = glorot_uniform<T>(d_ff, d, rng);
  p.ff2_bias = const_vector<T>(d, T(0));
  p.norm1_gain = const_vector<T>(d_ff, T(1));
  p.norm1_bias = const_vector<T>(d_ff, T(0));
  p.norm2_gain = const_vector<T>(d, T(1));
  p.norm2_bias = const_vector<T>(d, T(0));
  return p;
}

template <class T>
struct EncodedSequence {
  Tensor<T> matrix;  // [L, d]
  Mask mask;         // true = real token
};

// weights = softmax(Q K^T / sqrt(d)) with masked keys excluded; out = weights V
template <class T>
std::pair<Tensor<T>, Tensor<T>> scaled_dot_attention(const Tensor<T>& Q, const Tensor<T>& K,
                                                     const Tensor<T>& V,
                                                     const Mask* key_mask = nullptr) {
  if (K.shape()[0] != V.shape()[0])
    throw dim_error("scaled_dot_attention: nK " + std::to_string(K.shape()[0]) + " != nV " +
                    std::to_string(V.shape()[0]));
  const int d = Q.shape()[1];
  if (K.shape()[1] != d)
    throw dim_error("scaled_dot_attention: query dim " + std::to_string(d) + " != key dim " +
                    std::to_string(K.shape()[1]));
  Tensor<T> logits = scale(matmul(Q, transpose2d(K)), T(1) / std::sqrt(static_cast<T>(d)));
  Tensor<T> weights = softmax_rows(logits, key_mask);
  return {matmul(weights, V), weights};
}

// two projections, each followed by a residual connection and row-wise
// normalization; the first residual is applied only when d_ff == d
template <class T>
Tensor<T> feed_forward(const Tensor<T>& x, const AttentiveModuleParams<T>& p) {
  const int d = x.shape()[1];
  const int d_ff = p.ff1_weight.shape()[1];
  Tensor<T> h = relu(add_rowvec(matmul(x, p.ff1_weight), p.ff1_bias));
  if (d_ff == d) h = add(h, x);
  Tensor<T> h1 = row_normalize(h, p.norm1_gain, p.norm1_bias);
  Tensor<T> h2 = add(add_rowvec(matmul(h1, p.ff2_weight), p.ff2_bias), x);
  return row_normalize(h2, p.norm2_gain, p.norm2_bias);
}

// the whole attentive module f_ATT(Q, K, V); PAD query rows are zeroed
template <class T>
EncodedSequence<T> f_att(const EncodedSequence<T>& q, const EncodedSequence<T>& kv,
                         const AttentiveModuleParams<T>& p, ForwardTrace<T>* trace = nullptr,
                         Tensor<T>* weights_out = nullptr) {
  auto [attended, weights] = scaled_dot_attention(q.matrix, kv.matrix, kv.matrix, &kv.mask);
  if (trace) trace->add_rows(weights, &kv.mask);
  if (weights_out) *weights_out = weights;
  Tensor<T> out = feed_forward(attended, p);
  out = mul_rowmask(out, q.mask);
  return {out, q.mask};
}

template <class T>
struct Encodings {
  std::vector<EncodedSequence<T>> U;  // one per real utterance
  std::vector<EncodedSequence<T>> D;  // one per real document sentence
  EncodedSequence<T> R;
};

template <class T>
EncodedSequence<T> embed_sequence(const EmbeddingTable<T>& emb, const std::vector<int>& ids) {
  EncodedSequence<T> s;
  s.matrix = embed(emb.matrix, ids);
  s.mask.reserve(ids.size());
  for (int id : ids) s.mask.push_back(id != kPadId ? 1 : 0);
  return s;
}

// U_i, D_j and R obtained by attending to themselves through f_ATT with a
// single shared parameter set
template <class T>
Encodings<T> encode_all(const EncodedExample& ex, const EmbeddingTable<T>& emb,
                        const AttentiveModuleParams<T>& p, ForwardTrace<T>* trace = nullptr) {
  if (ex.n_real < 1) throw data_error("encode_all: context must have at least one utterance");
  if (ex.m_real < 1) throw data_error("encode_all: document must have at least one sentence");
  Encodings<T> enc;
  for (int i = 0; i < ex.n_real; ++i) {
    auto e = embed_sequence(emb, ex.ctx_ids[static_cast<std::size_t>(i)]);
    enc.U.push_back(f_att(e, e, p, trace));
  }
  for (int j = 0; j < ex.m_real; ++j) {
    auto e = embed_sequence(emb, ex.doc_ids[static_cast<std::size_t>(j)]);
    enc.D.push_back(f_att(e, e, p, trace));
  }
  auto er = embed_sequence(emb, ex.resp_ids);
  enc.R = f_att(er, er, p, trace);
  return enc;
}

}  // namespace dgmn
