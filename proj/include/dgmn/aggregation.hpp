#pragma once

// Stacks matching matrices into tensors, applies the 3D CNN to produce the
// matching vectors t, t̂, t̃, and computes the final score and BCE loss.

#include <string>
#include <vector>

#include "dgmn/matching.hpp"

namespace dgmn {

enum class Ablation { Full, T, TPlusTTilde, NoGround };

inline std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::T: return "t";
    case Ablation::TPlusTTilde: return "t_plus_ttilde";
    case Ablation::NoGround: return "noground";
  }
  return "full";
}

inline Ablation ablation_from_name(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "t") return Ablation::T;
  if (s == "t_plus_ttilde") return Ablation::TPlusTTilde;
  if (s == "noground") return Ablation::NoGround;
  throw std::runtime_error("unknown ablation '" + s + "'");
}

template <class T>
struct CnnParams {
  Tensor<T> kernels1;  // [filters, 1, 3, 3, 3]
  Tensor<T> bias1;     // [filters]
  bool second_block = false;
  Tensor<T> kernels2;  // [filters, filters, 3, 3, 3]
  Tensor<T> bias2;     // [filters]
};

inline int pooled_dim(int n) { return (n + 2) / 3; }

// flattened matching-vector length for a [1, slots, l_r, d_m] input
inline int cnn_output_len(int slots, int l_r, int d_m, int filters, bool* used_second = nullptr) {
  int D = pooled_dim(slots), H = pooled_dim(l_r), W = pooled_dim(d_m);
  bool second = filters * D * H * W > 4096;
  if (second) {
    D = pooled_dim(D);
    H = pooled_dim(H);
    W = pooled_dim(W);
  }
  if (used_second) *used_second = second;
  return filters * D * H * W;
}

template <class T>
CnnParams<T> init_cnn_params(int slots, int l_r, int d_m, int filters, std::mt19937_64& rng) {
  CnnParams<T> p;
  cnn_output_len(slots, l_r, d_m, filters, &p.second_block);
  auto init_kernels = [&rng](int c_out, int c_in) {
    const int fan = c_in * 27;
    const double s = std::sqrt(6.0 / (fan + c_out * 27));
    std::uniform_real_distribution<double> dist(-s, s);
    Tensor<T> k = Tensor<T>::zeros({c_out, c_in, 3, 3, 3}, true);
    for (auto& v : k.data()) v = static_cast<T>(dist(rng));
    return k;
  };
  // small positive bias keeps the zero-padded tensor regions off the exact
  // ReLU kink, where the loss would not be differentiable
  p.kernels1 = init_kernels(filters, 1);
  p.bias1 = const_vector<T>(filters, T(0.1));
  if (p.second_block) {
    p.kernels2 = init_kernels(filters, filters);
    p.bias2 = const_vector<T>(filters, T(0.1));
  }
  return p;
}

// matrices stacked along the depth axis; unused slots zero-filled
template <class T>
Tensor<T> build_tensor(const std::vector<Tensor<T>>& matrices, int slots) {
  if (matrices.empty()) throw dim_error("build_tensor: empty matrix list");
  if (static_cast<int>(matrices.size()) > slots)
    throw dim_error("build_tensor: " + std::to_string(matrices.size()) + " matrices exceed " +
                    std::to_string(slots) + " slots");
  std::vector<Tensor<T>> parts = matrices;
  const auto& s = matrices[0].shape();
  while (static_cast<int>(parts.size()) < slots) parts.push_back(Tensor<T>::zeros(s));
  Tensor<T> stacked = stack(parts);  // [slots, l_r, d_m]
  return reshape(stacked, {1, slots, s[0], s[1]});
}

// conv3d (ReLU) -> maxpool3d [-> second block] -> flatten
template <class T>
Tensor<T> cnn_vector(const Tensor<T>& x, const CnnParams<T>& p) {
  Tensor<T> y = maxpool3d(relu(conv3d(x, p.kernels1, p.bias1)));
  if (p.second_block) y = maxpool3d(relu(conv3d(y, p.kernels2, p.bias2)));
  return reshape(y, {static_cast<int>(y.size())});
}

template <class T>
struct ScoreParams {
  Tensor<T> w_o;  // [|t| + |t̂| + |t̃|] per the active ablation
  Tensor<T> b_o;  // scalar
};

template <class T>
ScoreParams<T> init_score_params(int len, std::mt19937_64& rng) {
  ScoreParams<T> p;
  const double s = std::sqrt(6.0 / (len + 1));
  std::uniform_real_distribution<double> dist(-s, s);
  p.w_o = Tensor<T>::zeros({len}, true);
  for (auto& v : p.w_o.data()) v = static_cast<T>(dist(rng));
  p.b_o = Tensor<T>::scalar(T(0), true);
  return p;
}

// σ([t; t̂; t̃] w_o + b_o) over whichever vectors the ablation keeps
template <class T>
Tensor<T> score(const std::vector<Tensor<T>>& vectors, const ScoreParams<T>& p) {
  Tensor<T> v = vectors.size() == 1 ? vectors[0] : concat(vectors, 0);
  const int n = v.shape()[0];
  if (p.w_o.size() != static_cast<std::size_t>(n))
    throw dim_error("score: w_o length " + std::to_string(p.w_o.size()) +
                    " != concatenated vector length " + std::to_string(n));
  Tensor<T> dot = reshape(matmul(reshape(v, {1, n}), reshape(p.w_o, {n, 1})), {1});
  return sigmoid(add(dot, p.b_o));
}

// −Σ [y log g + (1−y) log(1−g)], scores clamped to [1e-7, 1−1e-7];
// mean reduction divides by the batch size
template <class T>
Tensor<T> bce_loss(const std::vector<Tensor<T>>& scores, const std::vector<int>& labels,
                   bool mean_reduction = true) {
  if (scores.size() != labels.size() || scores.empty())
    throw dim_error("bce_loss: need matching, non-empty scores and labels");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::runtime_error("bce_loss: label must be 0 or 1");
  Tensor<T> g = clamp(concat(scores, 0), T(1e-7), T(1) - T(1e-7));
  std::vector<T> y_pos(labels.size()), y_neg(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y_pos[i] = static_cast<T>(labels[i]);
    y_neg[i] = static_cast<T>(1 - labels[i]);
  }
  Tensor<T> pos = mul_const(log_t(g), y_pos);
  Tensor<T> neg = mul_const(log_t(add_const(scale(g, T(-1)), T(1))), y_neg);
  Tensor<T> loss = scale(sum(add(pos, neg)), T(-1));
  if (mean_reduction) loss = scale(loss, T(1) / static_cast<T>(scores.size()));
  return loss;
}

}  // namespace dgmn
