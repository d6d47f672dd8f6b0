#pragma once

#include <vector>

#include "dgmn/tensor.hpp"

namespace dgmn {

// Intermediate attention weights collected during a forward pass, for
// normalization checks and heatmap export.
template <class T>
struct ForwardTrace {
  // every normalized weight row produced anywhere in the pass
  std::vector<std::vector<T>> weight_rows;
  std::vector<Mask> weight_masks;  // empty mask means all positions are real

  // fusion attention on the context side: [i][j] -> row-major l_u x l_d matrix
  std::vector<std::vector<std::vector<T>>> fusion_ctx_attn;
  // second-level interaction weights on the context side:
  // [i][response position] -> length m+1 (slot 0 = no grounding)
  std::vector<std::vector<std::vector<T>>> ctx_level2;

  T score{};

  void add_rows(const Tensor<T>& weights, const Mask* mask) {
    const int k = weights.shape().back();
    const std::size_t rows = weights.size() / k;
    for (std::size_t r = 0; r < rows; ++r) {
      weight_rows.emplace_back(weights.data().begin() + r * k,
                               weights.data().begin() + (r + 1) * k);
      weight_masks.push_back(mask ? *mask : Mask{});
    }
  }
};

}  // namespace dgmn
