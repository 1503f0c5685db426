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

#ifndef OCCFLOW__GRADCHECK_HPP_
#define OCCFLOW__GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace occflow
{

struct GradCheckResult
{
  std::string name;
  /// Maximum relative error between analytic and central-difference gradients.
  double error = 0.0;
  std::size_t coordinates = 0;
};

inline constexpr double kGradTolerance = 1e-4;

/// Finite-difference checks of the attention, warp, fusion and loss
/// operators and of the 16 x 16 micro model end to end.
std::vector<GradCheckResult> gradient_suite(std::uint64_t seed = 7);

}  // namespace occflow

#endif  // OCCFLOW__GRADCHECK_HPP_
