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

#ifndef QFB_QUANTUM_CORE_H
#define QFB_QUANTUM_CORE_H

#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qfb/tolerances.h"

namespace qfb {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

bool all_finite(const ComplexMatrix &m);

/// Largest entry of |A - A^dagger|.
double hermiticity_defect(const ComplexMatrix &m);

/// Smallest eigenvalue of the Hermitian part (A + A^dagger) / 2.
double min_eigenvalue(const ComplexMatrix &m);

/// Throws InvalidArgument unless `m` is square, non-empty and finite.
void require_square_finite(const ComplexMatrix &m, std::string_view what);

namespace pauli {
ComplexMatrix x();
ComplexMatrix y();
ComplexMatrix z();
}  // namespace pauli

/// A normalized quantum state: Hermitian, positive semidefinite, unit trace.
class DensityMatrix {
   public:
    /// Validates every invariant against `tol`; throws InvalidArgument on violation.
    explicit DensityMatrix(ComplexMatrix mat, const ToleranceSettings &tol = default_tolerances);

    static DensityMatrix pure(const ComplexVector &psi);
    static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index k);
    static DensityMatrix maximally_mixed(Eigen::Index dim);

    const ComplexMatrix &mat() const {
        return mat_;
    }
    Eigen::Index dim() const {
        return mat_.rows();
    }

   private:
    struct Unchecked {};
    DensityMatrix(Unchecked, ComplexMatrix mat) : mat_(std::move(mat)) {
    }
    friend class WeightedState;

    ComplexMatrix mat_;
};

/// A subnormalized state such as K rho K^dagger; its trace is the carried weight.
class WeightedState {
   public:
    WeightedState() = default;
    explicit WeightedState(ComplexMatrix mat) : mat(std::move(mat)) {
    }
    static WeightedState from(const DensityMatrix &rho) {
        return WeightedState(rho.mat());
    }
    static WeightedState zero(Eigen::Index dim) {
        return WeightedState(ComplexMatrix::Zero(dim, dim));
    }

    double trace() const {
        return mat.trace().real();
    }
    Eigen::Index dim() const {
        return mat.rows();
    }

    /// Divides by the trace. Throws NumericalError when the trace is below the
    /// unnormalizable-probability threshold.
    DensityMatrix normalized(const ToleranceSettings &tol = default_tolerances) const;

    ComplexMatrix mat;
};

/// True when `w` is Hermitian, PSD and carries a trace in [0, 1 + tol].
bool is_valid_weighted_state(const WeightedState &w, const ToleranceSettings &tol = default_tolerances);

/// Measurement operators {K_x} with sum_x K_x^dagger K_x = 1. Each outcome carries
/// a real label that update rules consume as the measured value.
class KrausSet {
   public:
    KrausSet(std::vector<ComplexMatrix> operators, std::vector<double> outcome_values,
             const ToleranceSettings &tol = default_tolerances);

    /// Labels outcomes 0, 1, 2, ...
    explicit KrausSet(std::vector<ComplexMatrix> operators);

    Eigen::Index dim() const {
        return dim_;
    }
    std::size_t num_outcomes() const {
        return operators_.size();
    }
    const ComplexMatrix &op(std::size_t outcome) const {
        return operators_.at(outcome);
    }
    const std::vector<ComplexMatrix> &operators() const {
        return operators_;
    }
    double outcome_value(std::size_t outcome) const {
        return outcome_values_.at(outcome);
    }
    const std::vector<double> &outcome_values() const {
        return outcome_values_;
    }

   private:
    Eigen::Index dim_;
    std::vector<ComplexMatrix> operators_;
    std::vector<double> outcome_values_;
};

/// max |sum_k K_k^dagger K_k - 1| over entries.
double completeness_defect(std::span<const ComplexMatrix> ops);

/// A CPTP map given in Kraus form.
class QuantumChannel {
   public:
    explicit QuantumChannel(std::vector<ComplexMatrix> kraus_ops, const ToleranceSettings &tol = default_tolerances);

    static QuantumChannel identity(Eigen::Index dim);
    static QuantumChannel unitary(ComplexMatrix u, const ToleranceSettings &tol = default_tolerances);

    Eigen::Index dim() const {
        return kraus_ops_.front().rows();
    }
    const std::vector<ComplexMatrix> &kraus_ops() const {
        return kraus_ops_;
    }

   private:
    std::vector<ComplexMatrix> kraus_ops_;
};

/// Born rule over every outcome of `kraus`. Entries are clamped to [0, 1].
std::vector<double> born_probabilities(const KrausSet &kraus, const DensityMatrix &rho,
                                       const ToleranceSettings &tol = default_tolerances);

struct MeasurementBranch {
    WeightedState state;  ///< K rho K^dagger, not normalized.
    double probability;   ///< tr[K rho K^dagger]
    bool normalizable;    ///< false when probability is below the unnormalizable threshold
};

MeasurementBranch post_measurement_state(const ComplexMatrix &k, const DensityMatrix &rho,
                                         const ToleranceSettings &tol = default_tolerances);

/// K rho K^dagger without any validation; the hot path of both engines.
WeightedState conjugate(const ComplexMatrix &k, const WeightedState &rho);

WeightedState apply_channel(const QuantumChannel &ch, const WeightedState &rho);

/// exp(a) via Pade scaling and squaring. Throws NumericalError instead of
/// returning non-finite entries.
ComplexMatrix matrix_exponential(const ComplexMatrix &a);

}  // namespace qfb

#endif
