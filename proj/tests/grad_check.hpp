// Copyright 2026 The lsr-code Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "lsr/objectives.hpp"

namespace lsr::testing {

/// Largest elementwise relative error between an analytic gradient and
/// central finite differences of `loss` around `x`. Entries where both
/// gradients are below `floor` in magnitude are compared against `floor`.
inline double max_grad_rel_error(Matrix x, const Matrix& analytic, const std::function<double(const Matrix&)>& loss,
                                 double h, double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double orig = x.data[i];
    x.data[i] = orig + h;
    const double up = loss(x);
    x.data[i] = orig - h;
    const double down = loss(x);
    x.data[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.data[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
    worst = std::max(worst, std::fabs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace lsr::testing
