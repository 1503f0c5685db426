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

#include <gtest/gtest.h>

#include <cmath>

#include "occflow/losses.hpp"
#include "occflow/warp.hpp"
#include "test_util.hpp"

namespace occflow
{
namespace
{

using testing::random_tensor;

Tensor binary_tensor(const Shape & shape, Rng & rng, double rate = 0.3)
{
  Tensor t(shape);
  for (double & v : t.data()) v = rng.uniform(0, 1) < rate ? 1.0 : 0.0;
  return t;
}

long double sigmoid_ld(long double z) { return 1.0L / (1.0L + std::exp(-z)); }

TEST(BceLoss, HandValues)
{
  EXPECT_NEAR(bce_loss(Tensor({3}, {0.0, 0.0, 0.0}), Tensor({3}, {1.0, 1.0, 0.0})).item(), 3 * std::log(2.0), 1e-15);
  EXPECT_LT(bce_loss(Tensor({1}, {30.0}), Tensor({1}, {1.0})).item(), 1e-12);
  EXPECT_NEAR(bce_loss(Tensor({1}, {-800.0}), Tensor({1}, {1.0})).item(), 800.0, 1e-9);
}

TEST(BceLoss, ExtendedPrecisionOracle)
{
  Rng rng(1);
  const Tensor z = random_tensor({6, 7, 1}, rng, -12, 12);
  const Tensor t = binary_tensor({6, 7, 1}, rng, 0.5);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const long double s = sigmoid_ld(z.values()[i]);
    ref -= t.values()[i] * std::log(s) + (1.0L - t.values()[i]) * std::log(1.0L - s);
  }
  EXPECT_NEAR(bce_loss(z, t).item(), static_cast<double>(ref), 1e-10);
}

TEST(FocalLoss, ReducesToHalfBce)
{
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor z = random_tensor({8, 8, 1}, rng, -10, 10);
    const Tensor t = binary_tensor({8, 8, 1}, rng);
    EXPECT_EQ(focal_loss(z, t, 0.0, 0.5).item(), 0.5 * bce_loss(z, t).item());
  }
}

TEST(FocalLoss, HandValues)
{
  EXPECT_NEAR(focal_loss(Tensor({1}, {0.0}), Tensor({1}, {1.0}), 2.0, 0.25).item(), 0.25 * 0.25 * std::log(2.0), 1e-15);
  EXPECT_EQ(focal_loss(Tensor({2}, {800.0, -800.0}), Tensor({2}, {1.0, 0.0}), 2.0, 0.25).item(), 0.0);
  // negatives carry the complementary weight
  EXPECT_NEAR(focal_loss(Tensor({1}, {0.0}), Tensor({1}, {0.0}), 2.0, 0.25).item(), 0.75 * 0.25 * std::log(2.0), 1e-15);
}

TEST(FocalLoss, ExtendedPrecisionOracle)
{
  Rng rng(3);
  const Tensor z = random_tensor({40}, rng, -8, 8);
  const Tensor t = binary_tensor({40}, rng);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const long double p = sigmoid_ld(z.values()[i]);
    const bool pos = t.values()[i] > 0.5;
    const long double pt = pos ? p : 1.0L - p;
    const long double at = pos ? 0.25L : 0.75L;
    ref -= at * std::pow(1.0L - pt, 2.0L) * std::log(pt);
  }
  EXPECT_NEAR(focal_loss(z, t, 2.0, 0.25).item(), static_cast<double>(ref), 1e-10);
}

TEST(FocalLoss, ParameterChecks)
{
  const Tensor z({1}, {0.0}), t({1}, {1.0});
  EXPECT_THROW(focal_loss(z, t, -1.0, 0.25), ConfigError);
  EXPECT_THROW(focal_loss(z, t, 2.0, 0.0), ConfigError);
  EXPECT_THROW(focal_loss(z, t, 2.0, 1.0), ConfigError);
  EXPECT_THROW(bce_loss(Tensor({2}), Tensor({3})), DimensionError);
}

struct Box
{
  Tensor prev{Shape{16, 16, 1}};
  Tensor cur{Shape{16, 16, 1}};
  Box()
  {
    for (std::size_t r = 5; r < 8; ++r)
      for (std::size_t c = 3; c < 7; ++c) {
        prev.data()[r * 16 + c] = 1.0;
        cur.data()[r * 16 + c + 2] = 1.0;
      }
  }
  Tensor uniform_flow(double dx, double dy) const
  {
    Tensor f(Shape{16, 16, 2});
    for (std::size_t i = 0; i < 256; ++i) {
      f.data()[2 * i] = dx;
      f.data()[2 * i + 1] = dy;
    }
    return f;
  }
  Tensor perfect_logits() const
  {
    Tensor z(Shape{16, 16, 1});
    for (std::size_t i = 0; i < 256; ++i) z.data()[i] = cur.values()[i] > 0.5 ? 30.0 : -30.0;
    return z;
  }
};

TEST(WarpLoss, PerfectFlowReachesClampFloor)
{
  const Box b;
  const double floor = -256.0 * std::log1p(-kWarpEps);
  const double loss = warp_loss(b.prev, b.cur, b.uniform_flow(-2, 0), b.perfect_logits()).item();
  EXPECT_GE(loss, floor - 1e-12);
  EXPECT_LT(loss, floor + 1e-9);
}

TEST(WarpLoss, OffGridFlowIsWorse)
{
  const Box b;
  const double perfect = warp_loss(b.prev, b.cur, b.uniform_flow(-2, 0), b.perfect_logits()).item();
  const double off = warp_loss(b.prev, b.cur, b.uniform_flow(-100, 0), b.perfect_logits()).item();
  EXPECT_GT(off, perfect);
  EXPECT_NEAR(off, 12 * -std::log(kWarpEps) + 244 * -std::log1p(-kWarpEps), 1e-8);
}

TEST(WarpLoss, EmptyPreviousGivesClampedZeroField)
{
  Rng rng(4);
  const Box b;
  const Tensor zero(Shape{16, 16, 1});
  const double loss = warp_loss(zero, b.cur, random_tensor({16, 16, 2}, rng, -3, 3), random_tensor({16, 16, 1}, rng)).item();
  const Tensor eps_field = add_scalar(Tensor(Shape{16, 16, 1}), kWarpEps);
  EXPECT_NEAR(loss, bce_prob(eps_field, b.cur).item(), 1e-9);
}

// Independent composition of the objective from per-step terms.
double recomposed(const Tensor & logits, const Tensor & flow, const TargetTensors & t)
{
  const std::size_t T = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  double obs = 0, occ = 0, warp = 0, focal = 0;
  for (std::size_t k = 0; k < T; ++k) {
    auto step = [&](const Tensor & x, std::size_t c0, std::size_t n) {
      return reshape(slice(slice(x, 0, k, 1), -1, c0, n), {H, W, n});
    };
    const Tensor zo = step(logits, 0, 1), zc = step(logits, 1, 1);
    const Tensor go = step(t.observed, 0, 1), gc = step(t.occluded, 0, 1);
    obs += bce_loss(zo, go).item();
    occ += bce_loss(zc, gc).item();
    focal += focal_loss(zo, go, 2.0, 0.25).item() + focal_loss(zc, gc, 2.0, 0.25).item();
    const Tensor prev_gt = k == 0 ? t.current : reshape(slice(slice(t.observed, 0, k - 1, 1), -1, 0, 1), {H, W, 1});
    warp += warp_loss(prev_gt, go, step(flow, 0, 2), zo).item();
  }
  return (1000 * obs + 1000 * occ + 1000 * warp + focal) / static_cast<double>(H * W * T);
}

TargetTensors random_targets(Rng & rng, std::size_t T, std::size_t H, std::size_t W)
{
  return {binary_tensor({T, H, W, 1}, rng), binary_tensor({T, H, W, 1}, rng, 0.1), random_tensor({T, H, W, 2}, rng, -4, 4),
          binary_tensor({H, W, 1}, rng)};
}

TEST(TotalLoss, RecompositionOracle)
{
  Rng rng(5);
  const Tensor logits = random_tensor({4, 64, 64, 2}, rng, -6, 6);
  const Tensor flow = random_tensor({4, 64, 64, 2}, rng, -5, 5);
  const TargetTensors t = random_targets(rng, 4, 64, 64);
  const LossTerms terms = total_loss(logits, flow, t, LossWeights{});
  const double ref = recomposed(logits, flow, t);
  EXPECT_NEAR(terms.total.item(), ref, 1e-10 * std::abs(ref));
  EXPECT_NEAR(terms.total.item(),
              (1000 * (terms.obs.item() + terms.occ.item() + terms.warp.item()) + terms.focal.item()) / (4 * 64 * 64),
              1e-12 * std::abs(ref));
}

TEST(TotalLoss, WeightChecks)
{
  Rng rng(6);
  const std::size_t T = 2, H = 4, W = 4;
  const TargetTensors t = random_targets(rng, T, H, W);
  const Tensor flow = random_tensor({T, H, W, 2}, rng);
  // softplus(-z) = 1 for every positive cell, softplus(z) = 1 for every negative one
  const double z1 = -std::log(std::exp(1.0) - 1.0);
  Tensor logits(Shape{T, H, W, 2});
  for (std::size_t i = 0; i < T * H * W; ++i) logits.data()[2 * i] = t.observed.values()[i] > 0.5 ? z1 : -z1;
  LossWeights only_obs;
  only_obs.occ = only_obs.warp = only_obs.focal = 0.0;
  const LossTerms a = total_loss(logits, flow, t, only_obs);
  EXPECT_NEAR(a.obs.item(), static_cast<double>(T * H * W), 1e-12);
  EXPECT_NEAR(a.total.item(), 1000.0, 1e-10);
  LossWeights none = only_obs;
  none.obs = 0.0;
  EXPECT_EQ(total_loss(logits, flow, t, none).total.item(), 0.0);
}

TEST(TotalLoss, WarpTermIgnoresOccludedStream)
{
  Rng rng(7);
  const TargetTensors t = random_targets(rng, 3, 8, 8);
  const Tensor flow = random_tensor({3, 8, 8, 2}, rng);
  Tensor logits = random_tensor({3, 8, 8, 2}, rng, -4, 4);
  const double before = total_loss(logits, flow, t, LossWeights{}).warp.item();
  for (std::size_t i = 0; i < 3 * 64; ++i) logits.data()[2 * i + 1] += 3.0;
  EXPECT_EQ(total_loss(logits, flow, t, LossWeights{}).warp.item(), before);
}

TEST(TotalLoss, TermsAreNonNegative)
{
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const TargetTensors t = random_targets(rng, 2, 8, 8);
    const LossTerms terms =
      total_loss(random_tensor({2, 8, 8, 2}, rng, -20, 20), random_tensor({2, 8, 8, 2}, rng, -9, 9), t, LossWeights{});
    for (const Tensor * x : {&terms.obs, &terms.occ, &terms.warp, &terms.focal, &terms.total}) EXPECT_GE(x->item(), 0.0);
  }
}

TEST(TotalLoss, ShapeErrors)
{
  Rng rng(9);
  const TargetTensors t = random_targets(rng, 2, 8, 8);
  EXPECT_THROW(total_loss(Tensor(Shape{2, 8, 8, 3}), Tensor(Shape{2, 8, 8, 3}), t, LossWeights{}), DimensionError);
  EXPECT_THROW(total_loss(Tensor(Shape{3, 8, 8, 2}), Tensor(Shape{3, 8, 8, 2}), t, LossWeights{}), DimensionError);
  EXPECT_THROW(total_loss(Tensor(Shape{2, 8, 8, 2}), Tensor(Shape{2, 8, 4, 2}), t, LossWeights{}), DimensionError);
}

TEST(Losses, FiniteDifference)
{
  Rng rng(10);
  const TargetTensors t = random_targets(rng, 2, 6, 6);
  const Tensor target1 = reshape(slice(t.observed, 0, 0, 1), {6, 6, 1});
  const Tensor z = random_tensor({6, 6, 1}, rng, -3, 3);
  EXPECT_LT(finite_difference_check([&](const Tensor & x) { return bce_loss(x, target1); }, z), 1e-4);
  EXPECT_LT(finite_difference_check([&](const Tensor & x) { return focal_loss(x, target1, 2.0, 0.25); }, z), 1e-4);
  // fractional flows keep bilinear sampling away from its kinks
  Tensor f = random_tensor({6, 6, 2}, rng, 0.15, 0.85);
  EXPECT_LT(finite_difference_check([&](const Tensor & x) { return warp_loss(t.current, target1, x, z); }, f), 1e-4);
  EXPECT_LT(finite_difference_check([&](const Tensor & x) { return warp_loss(t.current, target1, f, x); }, z), 1e-4);
  const Tensor logits = random_tensor({2, 6, 6, 2}, rng, -3, 3);
  const Tensor flow = random_tensor({2, 6, 6, 2}, rng, 0.15, 0.85);
  EXPECT_LT(finite_difference_check([&](const Tensor & x) { return total_loss(x, flow, t, LossWeights{}).total; }, logits),
            1e-4);
  EXPECT_LT(finite_difference_check([&](const Tensor & x) { return total_loss(logits, x, t, LossWeights{}).total; }, flow),
            1e-4);
}

TEST(TargetTensors, LayoutAndErrors)
{
  PredictionSet gt;
  for (int k = 0; k < 3; ++k) {
    gt.observed.emplace_back(4, 5, OccupancyKind::observed);
    gt.occluded.emplace_back(4, 5, OccupancyKind::occluded);
    gt.flow.emplace_back(4, 5);
  }
  gt.observed[2].data[7] = 1.0;
  gt.flow[1].data[3] = -2.5;
  OccupancyGrid cur(4, 5);
  cur.data[0] = 1.0;
  const TargetTensors t = make_target_tensors(gt, cur);
  EXPECT_EQ(t.observed.shape(), (Shape{3, 4, 5, 1}));
  EXPECT_EQ(t.flow.shape(), (Shape{3, 4, 5, 2}));
  EXPECT_EQ(t.current.shape(), (Shape{4, 5, 1}));
  EXPECT_EQ(t.observed.values()[2 * 20 + 7], 1.0);
  EXPECT_EQ(t.flow.values()[40 + 3], -2.5);
  EXPECT_EQ(t.current.values()[0], 1.0);
  gt.flow.pop_back();
  EXPECT_THROW(make_target_tensors(gt, cur), DimensionError);
}

}  // namespace
}  // namespace occflow
