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

#include "occflow/attention.hpp"

#include <cmath>
#include <numeric>

namespace occflow
{

std::size_t resolve_head_dim(std::size_t dim, std::size_t heads, std::size_t head_dim)
{
  if (heads == 0) throw ConfigError("attention needs at least one head");
  if (head_dim > 0) return head_dim;
  if (dim % heads != 0) {
    throw ConfigError("model dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  return dim / heads;
}

namespace
{

// [.., N, heads*d] -> [.., heads, N, d]
Tensor split_heads(const Tensor & x, std::size_t heads)
{
  const std::size_t r = x.rank();
  const std::size_t hd = x.dim(-1);
  if (hd % heads != 0) {
    throw ConfigError("width " + std::to_string(hd) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  Shape s = x.shape();
  s.back() = heads;
  s.push_back(hd / heads);
  std::vector<std::size_t> axes(r + 1);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(reshape(x, std::move(s)), axes);
}

// [.., heads, N, d] -> [.., N, heads*d]
Tensor merge_heads(const Tensor & x)
{
  const std::size_t r = x.rank();
  std::vector<std::size_t> axes(r);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[r - 3], axes[r - 2]);
  Tensor t = permute(x, axes);
  Shape s(t.shape().begin(), t.shape().end() - 2);
  s.push_back(x.dim(-3) * x.dim(-1));
  return reshape(t, std::move(s));
}

}  // namespace

Tensor attention_heads(const Tensor & q, const Tensor & k, const Tensor & v, std::size_t heads,
                       const Tensor & bias, const Tensor & mask, Tensor * weights)
{
  if (q.rank() < 2 || k.rank() != q.rank() || v.rank() != q.rank()) {
    throw DimensionError("attention operands must share rank >= 2: " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  if (q.dim(-1) != k.dim(-1) || k.dim(-2) != v.dim(-2)) {
    throw DimensionError("attention query/key/value extents disagree: " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const Tensor qh = split_heads(q, heads);
  const Tensor kh = split_heads(k, heads);
  const Tensor vh = split_heads(v, heads);
  const double d = static_cast<double>(qh.dim(-1));
  Tensor logits = scale(matmul(qh, transpose(kh, -1, -2)), 1.0 / std::sqrt(d));
  if (bias.defined()) logits = add(logits, bias);
  if (mask.defined()) logits = add(logits, mask);
  const Tensor w = softmax(logits, -1);
  if (weights) *weights = w;
  return merge_heads(matmul(w, vh));
}

Tensor msa(const Tensor & q, const Tensor & k, const Tensor & v, std::size_t heads,
           const Linear & out_proj, const Tensor & bias, const Tensor & mask)
{
  return out_proj(attention_heads(q, k, v, heads, bias, mask));
}

RelPosBias::RelPosBias(const Scope & scope, std::size_t rows, std::size_t cols, std::size_t heads)
: rows_(rows), cols_(cols), heads_(heads)
{
  table = scope.param("table", {(2 * rows - 1) * (2 * cols - 1), heads}, Init::normal_small);
  const std::size_t n = rows * cols;
  index_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t dr = i / cols + rows - 1 - j / cols;
      const std::size_t dc = i % cols + cols - 1 - j % cols;
      index_[i * n + j] = dr * (2 * cols - 1) + dc;
    }
  }
}

Tensor RelPosBias::operator()() const
{
  const std::size_t n = tokens();
  return permute(reshape(take_rows(table, index_), {n, n, heads_}), {2, 0, 1});
}

Tensor window_partition(const Tensor & x, std::size_t wh, std::size_t ww)
{
  if (x.rank() != 3) throw DimensionError("window_partition expects [H,W,C], got " + shape_str(x.shape()));
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  if (wh == 0 || ww == 0 || H % wh != 0 || W % ww != 0) {
    throw ConfigError("feature map " + shape_str(x.shape()) + " not divisible into " +
                      std::to_string(wh) + "x" + std::to_string(ww) + " windows");
  }
  const Tensor t = permute(reshape(x, {H / wh, wh, W / ww, ww, C}), {0, 2, 1, 3, 4});
  return reshape(t, {(H / wh) * (W / ww), wh * ww, C});
}

Tensor window_reverse(const Tensor & windows, std::size_t wh, std::size_t ww, std::size_t height,
                      std::size_t width)
{
  if (windows.rank() != 3 || height % wh != 0 || width % ww != 0 ||
      windows.dim(0) != (height / wh) * (width / ww) || windows.dim(1) != wh * ww) {
    throw ConfigError("window_reverse: " + shape_str(windows.shape()) + " does not tile " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  const std::size_t C = windows.dim(2);
  const Tensor t = permute(reshape(windows, {height / wh, width / ww, wh, ww, C}), {0, 2, 1, 3, 4});
  return reshape(t, {height, width, C});
}

Tensor cyclic_shift(const Tensor & x, long dr, long dc)
{
  if (x.rank() != 3) throw DimensionError("cyclic_shift expects [H,W,C], got " + shape_str(x.shape()));
  const long H = static_cast<long>(x.dim(0));
  const long W = static_cast<long>(x.dim(1));
  std::vector<std::size_t> rows(static_cast<std::size_t>(H * W));
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      const long sr = ((r + dr) % H + H) % H;
      const long sc = ((c + dc) % W + W) % W;
      rows[static_cast<std::size_t>(r * W + c)] = static_cast<std::size_t>(sr * W + sc);
    }
  }
  const Tensor flat = reshape(x, {x.dim(0) * x.dim(1), x.dim(2)});
  return reshape(take_rows(flat, rows), x.shape());
}

Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t wh, std::size_t ww,
                           std::size_t shift)
{
  // Region labels in rolled coordinates: [0, E-w), [E-w, E-s), [E-s, E).
  auto band = [shift](std::size_t i, std::size_t extent, std::size_t w) -> int {
    if (i < extent - w) return 0;
    if (i < extent - shift) return 1;
    return 2;
  };
  std::vector<double> label(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      label[r * width + c] = 3 * band(r, height, wh) + band(c, width, ww);
    }
  }
  const Tensor windows = window_partition(Tensor({height, width, 1}, label), wh, ww);
  const std::size_t nw = windows.dim(0);
  const std::size_t n = wh * ww;
  const auto lv = windows.values();
  std::vector<double> m(nw * n * n, 0.0);
  for (std::size_t w = 0; w < nw; ++w) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (lv[w * n + i] != lv[w * n + j]) m[(w * n + i) * n + j] = kMaskValue;
      }
    }
  }
  return Tensor({nw, 1, n, n}, std::move(m));
}

MultiHeadAttention::MultiHeadAttention(const Scope & scope, std::size_t query_dim,
                                       std::size_t kv_dim, std::size_t out_dim, std::size_t heads,
                                       std::size_t head_dim)
: heads_(heads)
{
  const std::size_t inner = heads * head_dim;
  q = Linear(scope.child("q"), query_dim, inner);
  k = Linear(scope.child("k"), kv_dim, inner);
  v = Linear(scope.child("v"), kv_dim, inner);
  out = Linear(scope.child("out"), inner, out_dim);
}

Tensor MultiHeadAttention::operator()(const Tensor & query, const Tensor & kv, const Tensor & mask,
                                      const ForwardContext & ctx) const
{
  return ctx.drop(msa(q(query), k(kv), v(kv), heads_, out, {}, mask));
}

WindowAttention::WindowAttention(const Scope & scope, std::size_t height, std::size_t width,
                                 std::size_t dim, std::size_t window, std::size_t heads,
                                 std::size_t head_dim, std::size_t shift)
: height_(height),
  width_(width),
  wh_(std::min(window, height)),
  ww_(std::min(window, width)),
  heads_(heads),
  head_dim_(resolve_head_dim(dim, heads, head_dim)),
  // A window covering the whole map leaves nothing to shift.
  shift_((height <= window && width <= window) ? 0 : shift)
{
  if (height % wh_ != 0 || width % ww_ != 0) {
    throw ConfigError("feature map " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible by window " + std::to_string(window));
  }
  if (shift_ >= std::min(wh_, ww_) && shift_ != 0) {
    throw ConfigError("shift must be smaller than the window");
  }
  const std::size_t inner = heads_ * head_dim_;
  qkv = Linear(scope.child("qkv"), dim, 3 * inner);
  proj = Linear(scope.child("proj"), inner, dim);
  bias = RelPosBias(scope.child("rel_bias"), wh_, ww_, heads_);
  if (shift_ > 0) mask_ = shifted_window_mask(height_, width_, wh_, ww_, shift_);
}

Tensor WindowAttention::operator()(const Tensor & x, const ForwardContext & ctx) const
{
  if (x.rank() != 3 || x.dim(0) != height_ || x.dim(1) != width_) {
    throw DimensionError("window attention built for " + std::to_string(height_) + "x" +
                         std::to_string(width_) + ", got " + shape_str(x.shape()));
  }
  const long s = static_cast<long>(shift_);
  const Tensor shifted = s ? cyclic_shift(x, s, s) : x;
  const Tensor windows = window_partition(shifted, wh_, ww_);
  const std::size_t inner = heads_ * head_dim_;
  const Tensor qkv_out = qkv(windows);
  const Tensor q = slice(qkv_out, -1, 0, inner);
  const Tensor k = slice(qkv_out, -1, inner, inner);
  const Tensor v = slice(qkv_out, -1, 2 * inner, inner);
  const Tensor attended = ctx.drop(msa(q, k, v, heads_, proj, bias(), mask_));
  const Tensor merged = window_reverse(attended, wh_, ww_, height_, width_);
  return s ? cyclic_shift(merged, -s, -s) : merged;
}

}  // namespace occflow
