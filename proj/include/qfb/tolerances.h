// Copyright 2026 The qfeedback Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QFB_TOLERANCES_H
#define QFB_TOLERANCES_H

namespace qfb {

/// Numerical acceptance thresholds shared by every invariant check.
struct ToleranceSettings {
    double hermiticity = 1e-10;
    double psd_eigenvalue = 1e-10;
    double unit_trace = 1e-10;
    double completeness = 1e-9;
    double unitarity = 1e-9;
    double probability_sum = 1e-9;
    /// Outcomes whose Born weight falls below this cannot be renormalized.
    double unnormalizable_probability = 1e-14;
};

inline constexpr ToleranceSettings default_tolerances{};

}  // namespace qfb

#endif
