// Copyright 2026 The Fed3CR Authors.
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

#include "fed3cr/numerics.hpp"

#include <cmath>
#include <string>

namespace fed3cr {

GradCheckReport grad_check(const std::function<double(const Matrix&)>& f,
                           const Matrix& params, const Matrix& analytic_grad,
                           double eps, double rtol) {
  require_same_shape(params, analytic_grad, "grad_check");
  GradCheckReport report;
  Matrix probe = params;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + eps;
    const double plus = f(probe);
    probe.data()[i] = saved - eps;
    const double minus = f(probe);
    probe.data()[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw RuntimeFailure("grad_check: non-finite objective at entry " +
                           std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double analytic = analytic_grad.data()[i];
    const double denom = std::max(std::abs(numeric), std::abs(analytic));
    if (denom <= 1e-8) continue;
    ++report.entries_checked;
    const double rel = std::abs(numeric - analytic) / denom;
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error <= rtol;
  return report;
}

}  // namespace fed3cr
