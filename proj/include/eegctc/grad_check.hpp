/* Copyright 2026 The eegctc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef EEGCTC_GRAD_CHECK_HPP_
#define EEGCTC_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "eegctc/errors.hpp"
#include "eegctc/tensor.hpp"

namespace eegctc {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares params.grad() against central differences of `loss`, which must
// read the current contents of `params`. Each coordinate is perturbed in
// place and restored. With `stride` > 1 only every stride-th coordinate is
// probed (large kernels).
//
// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  Tensor<double>& params, double h,
                                  std::size_t stride = 1, double floor = 1e-8) {
  if (!(h > 0.0)) throw ArgumentError("grad_check: step must be positive");
  const auto analytic = params.grad();
  auto values = params.data();
  GradCheckResult r;
  for (std::size_t i = 0; i < values.size(); i += std::max<std::size_t>(stride, 1)) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss();
    values[i] = saved - h;
    const double down = loss();
    values[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite loss while perturbing coordinate " +
                         std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double rel = std::abs(a - numeric) / denom;
    if (r.checked++ == 0 || rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = i;
      r.analytic = a;
      r.numeric = numeric;
    }
  }
  return r;
}

}  // namespace eegctc

#endif  // EEGCTC_GRAD_CHECK_HPP_
