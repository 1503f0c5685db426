// Copyright 2026 The occflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OCCFLOW__ATTENTION_HPP_
#define OCCFLOW__ATTENTION_HPP_

#include <vector>

#include "occflow/layers.hpp"
#include "occflow/tensor.hpp"

namespace occflow
{

/// Additive pre-softmax value for disallowed query/key pairs.
inline constexpr double kMaskValue = -1e9;

/// Per-head width for a layer of model width `dim`: `head_dim` when set,
/// otherwise dim / heads (ConfigError if indivisible).
std::size_t resolve_head_dim(std::size_t dim, std::size_t heads, std::size_t head_dim);

/// Scaled dot-product attention over split heads.
///
/// q is [.., Nq, heads*d]; k and v are [.., Nk, heads*d]. `bias` is
/// [heads, Nq, Nk] and `mask` is any additive tensor broadcastable to
/// [.., heads, Nq, Nk]; both are optional. Returns the concatenated heads
/// [.., Nq, heads*d]. When `weights` is given it receives the attention
/// probabilities [.., heads, Nq, Nk].
Tensor attention_heads(const Tensor & q, const Tensor & k, const Tensor & v, std::size_t heads,
                       const Tensor & bias = {}, const Tensor & mask = {}, Tensor * weights = nullptr);

/// MSA(Q, K, V) = (head_1 || ... || head_m) W^O with head_i = softmax(Q K^T / sqrt(d) + B) V.
Tensor msa(const Tensor & q, const Tensor & k, const Tensor & v, std::size_t heads,
           const Linear & out_proj, const Tensor & bias = {}, const Tensor & mask = {});

/// Learned relative positional bias for a (rows x cols) window.
class RelPosBias
{
public:
  RelPosBias() = default;
  RelPosBias(const Scope & scope, std::size_t rows, std::size_t cols, std::size_t heads);

  /// Bias laid out as [heads, N, N] with N = rows * cols.
  Tensor operator()() const;
  /// Table row used for the token pair (i, j).
  std::size_t row_of(std::size_t i, std::size_t j) const { return index_[i * tokens() + j]; }
  std::size_t tokens() const { return rows_ * cols_; }

  Tensor table;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t heads_ = 0;
  std::vector<std::size_t> index_;
};

/// [H,W,C] -> [nWindows, wh*ww, C]; windows and slots both row-major.
Tensor window_partition(const Tensor & x, std::size_t wh, std::size_t ww);
inline Tensor window_partition(const Tensor & x, std::size_t w) { return window_partition(x, w, w); }
/// Inverse of window_partition.
Tensor window_reverse(const Tensor & windows, std::size_t wh, std::size_t ww, std::size_t height,
                      std::size_t width);

/// Cyclic roll of [H,W,C]: out[r, c] = x[(r + dr) mod H, (c + dc) mod W].
Tensor cyclic_shift(const Tensor & x, long dr, long dc);

/// Additive mask [nWindows, 1, N, N] separating cells that come from different
/// regions once the map has been rolled by `shift`.
Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t wh, std::size_t ww,
                           std::size_t shift);

/// Multi-head attention with separate query/key/value projections.
class MultiHeadAttention
{
public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const Scope & scope, std::size_t query_dim, std::size_t kv_dim,
                     std::size_t out_dim, std::size_t heads, std::size_t head_dim);

  Tensor operator()(const Tensor & query, const Tensor & kv, const Tensor & mask,
                    const ForwardContext & ctx) const;
  std::size_t heads() const { return heads_; }

  Linear q;
  Linear k;
  Linear v;
  Linear out;

private:
  std::size_t heads_ = 1;
};

/// (Shifted) window self-attention over a fixed [H,W,dim] feature map.
class WindowAttention
{
public:
  WindowAttention() = default;
  WindowAttention(const Scope & scope, std::size_t height, std::size_t width, std::size_t dim,
                  std::size_t window, std::size_t heads, std::size_t head_dim, std::size_t shift);

  Tensor operator()(const Tensor & x, const ForwardContext & ctx) const;

  std::size_t heads() const { return heads_; }
  std::size_t shift() const { return shift_; }
  std::size_t window_rows() const { return wh_; }
  std::size_t window_cols() const { return ww_; }
  const Tensor & mask() const { return mask_; }

  Linear qkv;
  Linear proj;
  RelPosBias bias;

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t wh_ = 0;
  std::size_t ww_ = 0;
  std::size_t heads_ = 1;
  std::size_t head_dim_ = 1;
  std::size_t shift_ = 0;
  Tensor mask_;
};

}  // namespace occflow

#endif  // OCCFLOW__ATTENTION_HPP_
