#pragma once

// Cross-attention grounding: document-aware context representations Û,
// context-aware document representations D̂, and the augmented Ũ that
// prepends the un-fused U_i (the no-grounding slot).

#include <vector>

#include "dgmn/encoder.hpp"

namespace dgmn {

template <class T>
struct FusedContext {
  // per utterance i: [U_i, Û_{i,1}, ..., Û_{i,m}], each [l_u, d]
  std::vector<std::vector<EncodedSequence<T>>> views;
};

template <class T>
struct FusedDocument {
  // per sentence j: [D̂_{j,1}, ..., D̂_{j,n}], each [l_d, d]
  std::vector<std::vector<EncodedSequence<T>>> views;
};

// Û_{i,j} = f_ATT(U_i, D_j, D_j); index 0 of each list is U_i itself
template <class T>
FusedContext<T> fuse_context(const std::vector<EncodedSequence<T>>& U,
                             const std::vector<EncodedSequence<T>>& D,
                             const AttentiveModuleParams<T>& p,
                             ForwardTrace<T>* trace = nullptr) {
  FusedContext<T> fc;
  if (trace) trace->fusion_ctx_attn.assign(U.size(), {});
  for (std::size_t i = 0; i < U.size(); ++i) {
    std::vector<EncodedSequence<T>> row;
    row.push_back(U[i]);
    for (std::size_t j = 0; j < D.size(); ++j) {
      Tensor<T> w;
      row.push_back(f_att(U[i], D[j], p, trace, trace ? &w : nullptr));
      if (trace) trace->fusion_ctx_attn[i].push_back(w.data());
    }
    fc.views.push_back(std::move(row));
  }
  return fc;
}

// D̂_{j,i} = f_ATT(D_j, U_i, U_i); no un-fused slot on the document side
template <class T>
FusedDocument<T> fuse_document(const std::vector<EncodedSequence<T>>& D,
                               const std::vector<EncodedSequence<T>>& U,
                               const AttentiveModuleParams<T>& p,
                               ForwardTrace<T>* trace = nullptr) {
  FusedDocument<T> fd;
  for (std::size_t j = 0; j < D.size(); ++j) {
    std::vector<EncodedSequence<T>> row;
    for (std::size_t i = 0; i < U.size(); ++i) row.push_back(f_att(D[j], U[i], p, trace));
    fd.views.push_back(std::move(row));
  }
  return fd;
}

}  // namespace dgmn
