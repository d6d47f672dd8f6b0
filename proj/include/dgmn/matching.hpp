#pragma once

// Hierarchical interaction: response-guided attention first over token
// positions within each view, then over the views themselves, followed by
// the ReLU-projected matching feature per response position.

#include <utility>
#include <vector>

#include "dgmn/fusion.hpp"

namespace dgmn {

template <class T>
struct AdditiveAttentionParams {
  Tensor<T> w;  // [d_att, 2d]
  Tensor<T> v;  // [d_att]
  Tensor<T> b;  // [d_att]
};

template <class T>
struct InteractionParams {
  AdditiveAttentionParams<T> level1;
  AdditiveAttentionParams<T> level2;
  Tensor<T> w_p;  // [d_m, 2d]
  Tensor<T> b_p;  // [d_m]
};

template <class T>
AdditiveAttentionParams<T> init_additive_attention(int d, int d_att, std::mt19937_64& rng) {
  AdditiveAttentionParams<T> p;
  p.w = glorot_uniform<T>(d_att, 2 * d, rng);
  p.v = Tensor<T>::zeros({d_att}, true);
  {
    const double s = std::sqrt(6.0 / (d_att + 1));
    std::uniform_real_distribution<double> dist(-s, s);
    for (auto& x : p.v.data()) x = static_cast<T>(dist(rng));
  }
  p.b = const_vector<T>(d_att, T(0));
  return p;
}

template <class T>
InteractionParams<T> init_interaction_params(int d, int d_att, int d_m, std::mt19937_64& rng) {
  InteractionParams<T> p;
  p.level1 = init_additive_attention<T>(d, d_att, rng);
  p.level2 = init_additive_attention<T>(d, d_att, rng);
  p.w_p = glorot_uniform<T>(d_m, 2 * d, rng);
  p.b_p = const_vector<T>(d_m, T(0));
  return p;
}

// ω_t = vᵀ tanh(w [view_t; r_j] + b); α = softmax over unmasked positions;
// h = Σ_t α_t view_t
template <class T>
std::pair<Tensor<T>, Tensor<T>> level1_summarize(const Tensor<T>& view, const Tensor<T>& r_j,
                                                 const AdditiveAttentionParams<T>& p,
                                                 const Mask* mask = nullptr) {
  const int L = view.shape()[0];
  Tensor<T> x = concat<T>({view, tile_rows(r_j, L)}, 1);  // [L, 2d]
  Tensor<T> a = tanh_t(add_rowvec(matmul(x, transpose2d(p.w)), p.b));
  Tensor<T> omega = reshape(matmul(a, reshape(p.v, {p.v.shape()[0], 1})), {1, L});
  Tensor<T> alpha = softmax_rows(omega, mask);  // [1, L]
  Tensor<T> h = reshape(matmul(alpha, view), {view.shape()[1]});
  return {h, reshape(alpha, {L})};
}

// same form over a list of summary vectors (the m+1 grounded views, or the
// n utterances on the document side)
template <class T>
std::pair<Tensor<T>, Tensor<T>> level2_summarize(const std::vector<Tensor<T>>& h_list,
                                                 const Tensor<T>& r_j,
                                                 const AdditiveAttentionParams<T>& p) {
  if (h_list.empty()) throw dim_error("level2_summarize: empty view list");
  Tensor<T> views = stack(h_list);  // [K, d]
  return level1_summarize(views, r_j, p, nullptr);
}

// ReLU(w_p [(h−r_j)⊙(h−r_j); h⊙r_j] + b_p)
template <class T>
Tensor<T> match_feature(const Tensor<T>& h, const Tensor<T>& r_j, const Tensor<T>& w_p,
                        const Tensor<T>& b_p) {
  Tensor<T> diff = sub(h, r_j);
  Tensor<T> feat = concat<T>({mul(diff, diff), mul(h, r_j)}, 0);  // [2d]
  Tensor<T> y = reshape(matmul(w_p, reshape(feat, {feat.shape()[0], 1})), {w_p.shape()[0]});
  return relu(add(y, b_p));
}

// Columns for PAD response positions are zeroed before aggregation.
// trace_level2, when given, receives the α' vector per real response position.
template <class T>
Tensor<T> match_views(const std::vector<EncodedSequence<T>>& views, const EncodedSequence<T>& R,
                      const InteractionParams<T>& p, ForwardTrace<T>* trace = nullptr,
                      std::vector<std::vector<T>>* trace_level2 = nullptr) {
  const int l_r = R.matrix.shape()[0];
  const int d_m = p.w_p.shape()[0];
  std::vector<Tensor<T>> cols;
  for (int j = 0; j < l_r; ++j) {
    if (trace_level2) trace_level2->emplace_back();
    if (!R.mask[static_cast<std::size_t>(j)]) {
      cols.push_back(Tensor<T>::zeros({d_m}));
      continue;
    }
    Tensor<T> r_j = select_row(R.matrix, j);
    std::vector<Tensor<T>> hs;
    for (const auto& view : views) {
      auto [h, alpha] = level1_summarize(view.matrix, r_j, p.level1, &view.mask);
      if (trace) trace->add_rows(reshape(alpha, {1, alpha.shape()[0]}), &view.mask);
      hs.push_back(std::move(h));
    }
    Tensor<T> h;
    if (views.size() == 1) {
      h = hs[0];
      if (trace_level2) trace_level2->back() = {T(1)};
    } else {
      auto [h2, alpha2] = level2_summarize(hs, r_j, p.level2);
      if (trace) trace->add_rows(reshape(alpha2, {1, alpha2.shape()[0]}), nullptr);
      if (trace_level2) trace_level2->back() = alpha2.data();
      h = h2;
    }
    cols.push_back(match_feature(h, r_j, p.w_p, p.b_p));
  }
  return stack(cols);  // [l_r, d_m], row j = m_{i,j}
}

// M̃_i: two-level interaction over the m+1 grounded views of utterance i
template <class T>
Tensor<T> match_grounded_context(const std::vector<EncodedSequence<T>>& u_tilde_i,
                                 const EncodedSequence<T>& R, const InteractionParams<T>& p,
                                 ForwardTrace<T>* trace = nullptr,
                                 std::vector<std::vector<T>>* trace_level2 = nullptr) {
  return match_views(u_tilde_i, R, p, trace, trace_level2);
}

// M̂_j: same procedure over the n context-fused views of sentence j
template <class T>
Tensor<T> match_fused_document(const std::vector<EncodedSequence<T>>& d_hat_j,
                               const EncodedSequence<T>& R, const InteractionParams<T>& p,
                               ForwardTrace<T>* trace = nullptr) {
  return match_views<T>(d_hat_j, R, p, trace, nullptr);
}

// M_i: one-level interaction of the plain U_i against the response
template <class T>
Tensor<T> match_plain_context(const EncodedSequence<T>& u_i, const EncodedSequence<T>& R,
                              const InteractionParams<T>& p, ForwardTrace<T>* trace = nullptr) {
  return match_views<T>(std::vector<EncodedSequence<T>>{u_i}, R, p, trace, nullptr);
}

}  // namespace dgmn
